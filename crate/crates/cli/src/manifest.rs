//! Run manifest: one record per command invocation, appended to a JSON
//! file next to the artifacts it describes.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult, ErrorKind};

pub const MANIFEST_FILE: &str = "dkgad-manifest.json";
pub const MANIFEST_FORMAT: &str = "dkgad-run-manifest";

/// Format versions of every on-disk stage boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageVersions {
    pub tool: String,
    pub graph_cache: u32,
    pub checkpoint: u32,
}

impl StageVersions {
    pub fn current() -> Self {
        Self {
            tool: env!("CARGO_PKG_VERSION").to_string(),
            graph_cache: dkgad::graph::CACHE_VERSION,
            checkpoint: dkgad::models::CHECKPOINT_VERSION,
        }
    }
}

/// One command invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    /// Full argument vector, enough to re-run the command.
    pub args: Vec<String>,
    /// Effective configuration after defaults and overrides.
    pub config: Value,
    /// Named seeds used by the command's stages.
    pub seeds: Vec<(String, u64)>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub versions: StageVersions,
    pub started_unix: u64,
    /// Wall-clock seconds per named step.
    pub timings: Vec<(String, f64)>,
}

impl RunRecord {
    pub fn new(command: &str, config: Value) -> Self {
        Self {
            command: command.into(),
            args: std::env::args().collect(),
            config,
            seeds: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            versions: StageVersions::current(),
            started_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            timings: Vec::new(),
        }
    }

    pub fn seed(&mut self, name: &str, seed: u64) {
        self.seeds.push((name.into(), seed));
    }

    pub fn input(&mut self, p: impl Into<PathBuf>) {
        self.inputs.push(p.into());
    }

    pub fn output(&mut self, p: impl Into<PathBuf>) {
        self.outputs.push(p.into());
    }

    /// Runs `f` and records its wall-clock time under `step`.
    pub fn timed<T>(&mut self, step: &str, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        self.timings.push((step.into(), t0.elapsed().as_secs_f64()));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub runs: Vec<RunRecord>,
}

impl Default for RunManifest {
    fn default() -> Self {
        Self {
            format: MANIFEST_FORMAT.into(),
            runs: Vec::new(),
        }
    }
}

impl RunManifest {
    pub fn load(path: &Path) -> CliResult<Self> {
        if !path.exists() {
            return Ok(Self::default());
        }
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let m: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::new(ErrorKind::Schema, format!("{}: {e}", path.display())))?;
        if m.format != MANIFEST_FORMAT {
            return Err(CliError::new(
                ErrorKind::Schema,
                format!("{}: not a run manifest", path.display()),
            ));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
    }

    /// Appends `record` to the manifest in `dir`, creating it if needed.
    pub fn append(dir: &Path, record: RunRecord) -> CliResult<PathBuf> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let path = dir.join(MANIFEST_FILE);
        let mut m = Self::load(&path)?;
        m.runs.push(record);
        m.save(&path)?;
        Ok(path)
    }
}
