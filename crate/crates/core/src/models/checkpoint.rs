//! Model checkpoints: a JSON document
//! `{"format": "dkgad-model", "version": 1, "level": ..., "threshold": ..., "model": {"kind": ..., ...}}`.
//! Floats are written in shortest round-trip form, so loading restores the
//! exact parameters.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::neural::{CausalConvNet, DenseNet, SelfAttentionNet};
use super::{BoostedStumpsModel, IsolationForestModel, LinearSvmModel, ModelError, Scorer};
use crate::features::{Level, Standardizer};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

pub const CHECKPOINT_FORMAT: &str = "dkgad-model";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    If,
    Svm,
    Xgb,
    Mlp,
    Tcn,
    Sa,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::If,
        ModelKind::Svm,
        ModelKind::Xgb,
        ModelKind::Mlp,
        ModelKind::Tcn,
        ModelKind::Sa,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ModelKind::If => "if",
            ModelKind::Svm => "svm",
            ModelKind::Xgb => "xgb",
            ModelKind::Mlp => "mlp",
            ModelKind::Tcn => "tcn",
            ModelKind::Sa => "sa",
        }
    }

    /// Report label.
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::If => "IF",
            ModelKind::Svm => "SVM",
            ModelKind::Xgb => "XGB",
            ModelKind::Mlp => "MLP",
            ModelKind::Tcn => "TCN",
            ModelKind::Sa => "SA",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ModelKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.id().eq_ignore_ascii_case(s))
            .ok_or_else(|| ModelError::Config(format!("unknown model '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", bound = "T: Scalar")]
pub enum AnyModel<T> {
    If(IsolationForestModel<T>),
    Svm(LinearSvmModel<T>),
    Xgb(BoostedStumpsModel<T>),
    Mlp(DenseNet<T>),
    Tcn(CausalConvNet<T>),
    Sa(SelfAttentionNet<T>),
}

impl<T: Scalar> AnyModel<T> {
    pub fn kind(&self) -> ModelKind {
        match self {
            AnyModel::If(_) => ModelKind::If,
            AnyModel::Svm(_) => ModelKind::Svm,
            AnyModel::Xgb(_) => ModelKind::Xgb,
            AnyModel::Mlp(_) => ModelKind::Mlp,
            AnyModel::Tcn(_) => ModelKind::Tcn,
            AnyModel::Sa(_) => ModelKind::Sa,
        }
    }

    pub fn scorer(&self) -> &dyn Scorer<T> {
        match self {
            AnyModel::If(m) => m,
            AnyModel::Svm(m) => m,
            AnyModel::Xgb(m) => m,
            AnyModel::Mlp(m) => m,
            AnyModel::Tcn(m) => m,
            AnyModel::Sa(m) => m,
        }
    }

    pub fn predict_proba(&self, rows: &Matrix<T>) -> Result<Vec<T>, ModelError> {
        self.scorer().predict_proba(rows)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Checkpoint<T> {
    pub format: String,
    pub version: u32,
    /// Representation level the model was trained on.
    pub level: Level,
    pub threshold: f64,
    pub model: AnyModel<T>,
    /// Column standardization fitted on the training rows, applied to raw
    /// feature rows before scoring.
    #[serde(default)]
    pub standardizer: Option<Standardizer<T>>,
    /// First timestamp after the training period; rows from here on are
    /// held out.
    #[serde(default)]
    pub held_out_from: Option<i64>,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn new(model: AnyModel<T>, level: Level, threshold: f64) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            level,
            threshold,
            model,
            standardizer: None,
            held_out_from: None,
        }
    }

    /// Standardizes raw rows (when a standardizer is stored) and scores them.
    pub fn score_raw(&self, rows: &Matrix<T>) -> Result<Vec<T>, ModelError> {
        match &self.standardizer {
            Some(s) => {
                if s.mean.len() != rows.cols() {
                    return Err(ModelError::WidthMismatch {
                        expected: s.mean.len(),
                        got: rows.cols(),
                    });
                }
                let mut x = rows.clone();
                s.apply(&mut x);
                self.model.predict_proba(&x)
            }
            None => self.model.predict_proba(rows),
        }
    }
}

pub fn save_model<T: Scalar, W: Write>(ckpt: &Checkpoint<T>, w: W) -> Result<(), ModelError> {
    serde_json::to_writer(w, ckpt).map_err(|e| ModelError::Checkpoint(e.to_string()))
}

pub fn load_model<T: Scalar, R: Read>(r: R) -> Result<Checkpoint<T>, ModelError> {
    let v: serde_json::Value =
        serde_json::from_reader(r).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    if v.get("format").and_then(|f| f.as_str()) != Some(CHECKPOINT_FORMAT) {
        return Err(ModelError::Checkpoint("not a model checkpoint".into()));
    }
    match v.get("version").and_then(|f| f.as_u64()) {
        Some(x) if x == u64::from(CHECKPOINT_VERSION) => {}
        other => {
            return Err(ModelError::Checkpoint(format!(
                "unsupported checkpoint version {other:?}"
            )))
        }
    }
    serde_json::from_value(v).map_err(|e| ModelError::Checkpoint(e.to_string()))
}
