//! Error kinds of the command line and their exit codes.

use std::fmt;
use std::io;
use std::path::Path;

use dkgad::ensemble::EnsembleError;
use dkgad::eval::EvalError;
use dkgad::features::FeatureError;
use dkgad::graph::CacheError;
use dkgad::graph::GraphError;
use dkgad::labels::LabelError;
use dkgad::models::ModelError;
use dkgad::pipeline::PipelineError;
use dkgad::synth::SynthError;
use dkgad::ttl::{ScanError, SnapshotError};

/// Failure class; each maps to its own exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Unexpected internal or I/O failure.
    Internal,
    /// A declared input file or directory does not exist.
    MissingInput,
    /// Input exists but violates its format or schema, or a config value is invalid.
    Schema,
    /// Training failed: single-class data or numerical divergence.
    Training,
    /// Inputs that must line up do not (row counts, widths, keys).
    Mismatch,
}

impl ErrorKind {
    pub fn code(self) -> i32 {
        match self {
            ErrorKind::Internal => 1,
            ErrorKind::MissingInput => 3,
            ErrorKind::Schema => 4,
            ErrorKind::Training => 5,
            ErrorKind::Mismatch => 6,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorKind::Internal => "internal",
            ErrorKind::MissingInput => "missing_input",
            ErrorKind::Schema => "schema",
            ErrorKind::Training => "training",
            ErrorKind::Mismatch => "mismatch",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, e: io::Error) -> Self {
        let kind = if e.kind() == io::ErrorKind::NotFound {
            ErrorKind::MissingInput
        } else {
            ErrorKind::Internal
        };
        Self::new(kind, format!("{}: {e}", path.display()))
    }

    pub fn missing(path: &Path, what: &str) -> Self {
        Self::new(ErrorKind::MissingInput, format!("{what} not found: {}", path.display()))
    }

    /// The machine-parsable line printed on stderr.
    pub fn line(&self) -> String {
        let msg = self.message.replace('\n', " | ");
        format!("error: code={} kind={} message={msg}", self.kind.code(), self.kind.name())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn model_kind(e: &ModelError) -> ErrorKind {
    match e {
        ModelError::WidthMismatch { .. } => ErrorKind::Mismatch,
        ModelError::SingleClass | ModelError::Empty | ModelError::Diverged { .. } => ErrorKind::Training,
        ModelError::Config(_) | ModelError::Checkpoint(_) => ErrorKind::Schema,
    }
}

fn ensemble_kind(e: &EnsembleError) -> ErrorKind {
    match e {
        EnsembleError::Misaligned { .. } | EnsembleError::MissingRow { .. } => ErrorKind::Mismatch,
        EnsembleError::NonBinary { .. } | EnsembleError::TooFewMembers(_) | EnsembleError::Config(_) => {
            ErrorKind::Schema
        }
    }
}

fn eval_kind(e: &EvalError) -> ErrorKind {
    match e {
        EvalError::LengthMismatch { .. } => ErrorKind::Mismatch,
        EvalError::Empty => ErrorKind::Schema,
    }
}

fn feature_kind(e: &FeatureError) -> ErrorKind {
    match e {
        FeatureError::EmptyTrainingSet => ErrorKind::Training,
        _ => ErrorKind::Schema,
    }
}

macro_rules! from_error {
    ($ty:ty, $kind:expr) => {
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                let kind: fn(&$ty) -> ErrorKind = $kind;
                CliError::new(kind(&e), e.to_string())
            }
        }
    };
}

from_error!(ModelError, model_kind);
from_error!(EnsembleError, ensemble_kind);
from_error!(EvalError, eval_kind);
from_error!(FeatureError, feature_kind);
from_error!(LabelError, |_| ErrorKind::Schema);
from_error!(GraphError, |_| ErrorKind::Schema);
from_error!(ScanError, |e| match e {
    ScanError::Unreadable { source, .. } if source.kind() == io::ErrorKind::NotFound => ErrorKind::MissingInput,
    _ => ErrorKind::Schema,
});
from_error!(SnapshotError, |e| match e {
    SnapshotError::Io { .. } => ErrorKind::Internal,
    SnapshotError::Parse { .. } => ErrorKind::Schema,
});
from_error!(CacheError, |e| match e {
    CacheError::Io(_) => ErrorKind::Internal,
    _ => ErrorKind::Schema,
});
from_error!(SynthError, |e| match e {
    SynthError::Io { .. } => ErrorKind::Internal,
    _ => ErrorKind::Schema,
});
from_error!(PipelineError, |e| match e {
    PipelineError::Feature(e) => feature_kind(e),
    PipelineError::Label(_) | PipelineError::Config(_) => ErrorKind::Schema,
    PipelineError::Model(e) => model_kind(e),
    PipelineError::Ensemble(e) => ensemble_kind(e),
    PipelineError::Eval(e) => eval_kind(e),
});

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_are_distinct() {
        let kinds = [
            ErrorKind::Internal,
            ErrorKind::MissingInput,
            ErrorKind::Schema,
            ErrorKind::Training,
            ErrorKind::Mismatch,
        ];
        let mut codes: Vec<i32> = kinds.iter().map(|k| k.code()).collect();
        codes.sort_unstable();
        codes.dedup();
        assert_eq!(codes.len(), kinds.len());
        // 2 is left to argument parsing errors
        assert!(!codes.contains(&2) && !codes.contains(&0));
    }

    #[test]
    fn error_line_is_single_line_and_tagged() {
        let e: CliError = EvalError::LengthMismatch { predicted: 3, actual: 5 }.into();
        let line = e.line();
        assert!(line.starts_with("error: code=6 kind=mismatch message="), "{line}");
        assert!(line.contains('3') && line.contains('5'));
        let multi = CliError::new(ErrorKind::Schema, "a\nb");
        assert!(!multi.line().contains('\n'));
    }

    #[test]
    fn missing_files_map_to_missing_input() {
        let e = CliError::io(Path::new("/nope"), io::Error::from(io::ErrorKind::NotFound));
        assert_eq!(e.kind, ErrorKind::MissingInput);
    }
}
