//! Detectors. Every model maps a feature row to a score in `[0, 1]`; a row
//! is flagged when its score reaches the configured threshold.

mod checkpoint;
mod iforest;
pub mod neural;
mod stumps;
mod svm;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::{load_model, save_model, AnyModel, Checkpoint, ModelKind, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use iforest::{average_path_length, train_isolation_forest, IsolationForestModel, IsolationTree, TreeNode};
pub use stumps::{train_boosted_stumps, BoostedStumpsModel, Stump};
pub use svm::{hinge_subgradient, svm_objective, train_linear_svm, LinearSvmModel};

use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("row width {got} does not match model width {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("training rows contain a single class")]
    SingleClass,
    #[error("no training rows")]
    Empty,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// Settings shared by the supervised classical models. `epochs` counts
/// passes for the SVM and rounds for boosting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub regularization: f64,
    /// `(normal, anomaly)`; `None` uses [`balanced_class_weights`].
    pub class_weights: Option<(f64, f64)>,
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            epochs: 30,
            learning_rate: 0.1,
            regularization: 1e-3,
            class_weights: None,
            threshold: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(ModelError::Config(format!("threshold {} outside (0, 1)", self.threshold)));
        }
        if let Some((a, b)) = self.class_weights {
            if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                return Err(ModelError::Config("class weights must be positive".into()));
            }
        }
        if !(self.learning_rate > 0.0) || self.regularization < 0.0 || self.epochs == 0 {
            return Err(ModelError::Config(
                "learning rate and epochs must be positive, regularization non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn weights_for(&self, labels: &[u8]) -> Result<(f64, f64), ModelError> {
        match self.class_weights {
            Some(w) => Ok(w),
            None => balanced_class_weights(labels),
        }
    }
}

/// Inverse class frequency, `n / (2 n_c)`, so the mean per-row weight is 1.
pub fn balanced_class_weights(labels: &[u8]) -> Result<(f64, f64), ModelError> {
    let pos = labels.iter().filter(|&&l| l != 0).count();
    let n = labels.len();
    if n == 0 {
        return Err(ModelError::Empty);
    }
    if pos == 0 || pos == n {
        return Err(ModelError::SingleClass);
    }
    Ok((n as f64 / (2.0 * (n - pos) as f64), n as f64 / (2.0 * pos as f64)))
}

pub(crate) fn check_supervised<T: Scalar>(rows: &Matrix<T>, labels: &[u8]) -> Result<(), ModelError> {
    if rows.rows() == 0 {
        return Err(ModelError::Empty);
    }
    if labels.len() != rows.rows() {
        return Err(ModelError::Config(format!(
            "{} labels for {} rows",
            labels.len(),
            rows.rows()
        )));
    }
    let pos = labels.iter().filter(|&&l| l != 0).count();
    if pos == 0 || pos == labels.len() {
        return Err(ModelError::SingleClass);
    }
    Ok(())
}

/// A fitted model that scores single rows.
pub trait Scorer<T: Scalar>: Sync {
    fn width(&self) -> usize;

    /// Score of one row of the model's width.
    fn score_row(&self, row: &[T]) -> T;

    /// Scores every row; rows are independent so they are scored in
    /// parallel, and the output order is the row order.
    fn predict_proba(&self, rows: &Matrix<T>) -> Result<Vec<T>, ModelError> {
        if rows.cols() != self.width() {
            return Err(ModelError::WidthMismatch {
                expected: self.width(),
                got: rows.cols(),
            });
        }
        Ok((0..rows.rows())
            .into_par_iter()
            .map(|i| self.score_row(rows.row(i)))
            .collect())
    }
}

pub fn hard_labels<T: Scalar>(scores: &[T], threshold: f64) -> Vec<u8> {
    scores.iter().map(|s| u8::from(s.as_f64() >= threshold)).collect()
}
