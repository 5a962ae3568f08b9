//! The three dataset representations built from a graph:
//!
//! * `D1` sequential: per entity and snapshot, the window of the entity's own
//!   attributes plus per-channel trend statistics;
//! * `D2` one-hop: as D1, over the entity's attributes extended with the
//!   aggregated attributes of its hierarchy neighbors;
//! * `D3` two-hop: per snapshot, the window over the concatenated structural
//!   vectors of every entity of the target category.
//!
//! Every row starts with its window block, laid out time-major
//! (`x(t-tau+1) | ... | x(t)`), so sequence models can reshape it to
//! `tau x channels` using [`SeqLayout`].

mod aggregate;
mod csv_io;
mod stats;
mod window;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use aggregate::{
    one_hop_aggregate, one_hop_width, two_hop_block_width, two_hop_concat, Aggregation,
};
pub use csv_io::{infer_layout, read_csv, write_csv, SNAPSHOT_ENTITY};
pub use stats::{stat_features, StatFeatures, StatFlags};
pub use window::window_concat;

use crate::graph::DynamicKnowledgeGraph;
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::ttl::{Category, SchemaError};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("category {0} has no registered entities")]
    EmptyCategory(Category),
    #[error("window length {tau} must be in 1..={snapshots}")]
    InvalidTau { tau: usize, snapshots: usize },
    #[error("normalization statistics requested from an empty training set")]
    EmptyTrainingSet,
    #[error("dataset csv: {0}")]
    Csv(String),
    #[error("{0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    D1,
    D2,
    D3,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::D1 => "D1",
            Level::D2 => "D2",
            Level::D3 => "D3",
        })
    }
}

impl FromStr for Level {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "d1" => Ok(Level::D1),
            "d2" => Ok(Level::D2),
            "d3" => Ok(Level::D3),
            _ => Err(FeatureError::Config(format!("unknown level '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    /// Window length in snapshots.
    pub tau: usize,
    pub stats: StatFlags,
    pub normalize: bool,
    pub aggregation: Aggregation,
}

impl WindowConfig {
    pub fn with_tau(self, tau: usize) -> Self {
        Self { tau, ..self }
    }
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            tau: 8,
            stats: StatFlags::ALL,
            normalize: true,
            aggregation: Aggregation::Mean,
        }
    }
}

/// Identity of a dataset row. D3 rows describe a whole snapshot and have
/// no entity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowKey {
    pub entity: Option<String>,
    pub t: i64,
}

impl RowKey {
    pub fn entity(entity: impl Into<String>, t: i64) -> Self {
        Self {
            entity: Some(entity.into()),
            t,
        }
    }

    pub fn snapshot(t: i64) -> Self {
        Self { entity: None, t }
    }
}

/// The leading `steps * channels` columns of each row form a time-major
/// sequence; remaining columns are per-row summaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeqLayout {
    pub steps: usize,
    pub channels: usize,
}

impl SeqLayout {
    pub fn width(self) -> usize {
        self.steps * self.channels
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset<T> {
    pub level: Level,
    pub rows: Matrix<T>,
    pub row_index: Vec<RowKey>,
    pub labels: Option<Vec<u8>>,
    pub feature_names: Vec<String>,
    pub seq: SeqLayout,
}

impl<T: Scalar> FeatureDataset<T> {
    pub fn len(&self) -> usize {
        self.rows.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.rows() == 0
    }

    pub fn width(&self) -> usize {
        self.rows.cols()
    }

    /// Row subset in the given order; labels follow.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            level: self.level,
            rows: self.rows.select_rows(idx),
            row_index: idx.iter().map(|&i| self.row_index[i].clone()).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| idx.iter().map(|&i| l[i]).collect()),
            feature_names: self.feature_names.clone(),
            seq: self.seq,
        }
    }
}

fn channel_names(prefix_names: &[String], tau: usize, stats: Option<StatFlags>) -> Vec<String> {
    let mut names = Vec::new();
    for k in 0..tau {
        let lag = tau - 1 - k;
        names.extend(prefix_names.iter().map(|c| format!("lag{lag}.{c}")));
    }
    if let Some(flags) = stats {
        for c in prefix_names {
            names.extend(flags.names().into_iter().map(|s| format!("{s}.{c}")));
        }
    }
    names
}

/// Builds the raw (unnormalized) dataset of one representation level for
/// entities of `target`. Call [`standardize`] afterwards when
/// `config.normalize` is set.
pub fn build_dataset<T: Scalar>(
    graph: &DynamicKnowledgeGraph<T>,
    level: Level,
    config: &WindowConfig,
    target: Category,
) -> Result<FeatureDataset<T>, FeatureError> {
    let n_t = graph.n_snapshots();
    if config.tau == 0 || config.tau > n_t {
        return Err(FeatureError::InvalidTau {
            tau: config.tau,
            snapshots: n_t,
        });
    }
    let tau = config.tau;
    let schema = graph.schema();
    let own_names: Vec<String> = schema
        .attributes_of(target)
        .iter()
        .map(|a| a.name.clone())
        .collect();

    // per "subject" (entity, or the whole snapshot for D3): a T x d series
    let (series, keys, chan_names, stats): (Vec<Vec<T>>, Vec<Option<String>>, Vec<String>, _) =
        match level {
            Level::D1 => {
                let tensor = graph.tensor(target);
                let n = graph.registry().len(target);
                (
                    (0..n).map(|e| tensor.series(e).to_vec()).collect(),
                    graph.registry().entities(target).iter().cloned().map(Some).collect(),
                    own_names,
                    Some(config.stats),
                )
            }
            Level::D2 => {
                let n = graph.registry().len(target);
                let d = two_hop_block_width(schema, target)?;
                let mut series = vec![Vec::with_capacity(n_t * d); n];
                for t in 0..n_t {
                    for (e, ch) in aggregate::entity_channels(graph, target, t, config.aggregation)?
                        .into_iter()
                        .enumerate()
                    {
                        series[e].extend(ch);
                    }
                }
                let mut names = own_names;
                names.extend(aggregate::one_hop_names(schema, target, config.aggregation)?);
                (
                    series,
                    graph.registry().entities(target).iter().cloned().map(Some).collect(),
                    names,
                    Some(config.stats),
                )
            }
            Level::D3 => {
                let mut s = Vec::new();
                for t in 0..n_t {
                    s.extend(two_hop_concat(graph, target, t, config.aggregation)?);
                }
                (
                    vec![s],
                    vec![None],
                    aggregate::two_hop_names(graph, target, config.aggregation)?,
                    None,
                )
            }
        };

    if keys.is_empty() {
        return Err(FeatureError::EmptyCategory(target));
    }
    let d = chan_names.len();
    let n_stats = stats.map_or(0, |f: StatFlags| f.count() * d);
    let width = tau * d + n_stats;
    let mut data = Vec::with_capacity(keys.len() * n_t * width);
    let mut row_index = Vec::with_capacity(keys.len() * n_t);
    let mut row = vec![T::zero(); width];
    let mut scratch = Vec::with_capacity(tau);
    for (s, key) in series.iter().zip(&keys) {
        for (t, &ts) in graph.timestamps().iter().enumerate() {
            window::window_into(s, d, tau, t, &mut row[..tau * d]);
            if let Some(flags) = stats {
                stats::stat_block_into(s, d, tau, t, flags, &mut scratch, &mut row[tau * d..]);
            }
            data.extend_from_slice(&row);
            row_index.push(RowKey {
                entity: key.clone(),
                t: ts,
            });
        }
    }
    Ok(FeatureDataset {
        level,
        rows: Matrix::from_vec(row_index.len(), width, data),
        row_index,
        labels: None,
        feature_names: channel_names(&chan_names, tau, stats),
        seq: SeqLayout {
            steps: tau,
            channels: d,
        },
    })
}

/// Per-column affine standardization fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Standardizer<T> {
    pub mean: Vec<T>,
    /// Zero marks a constant column, which maps to 0.
    pub scale: Vec<T>,
}

impl<T: Scalar> Standardizer<T> {
    pub fn fit(rows: &Matrix<T>, train: &[usize]) -> Result<Self, FeatureError> {
        if train.is_empty() {
            return Err(FeatureError::EmptyTrainingSet);
        }
        let n = T::count(train.len());
        let cols = rows.cols();
        let mut mean = vec![T::zero(); cols];
        for &i in train {
            for (m, &v) in mean.iter_mut().zip(rows.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![T::zero(); cols];
        for &i in train {
            for ((s, &v), &m) in var.iter_mut().zip(rows.row(i)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .zip(&mean)
            .map(|(s, &m)| {
                let sd = (s / n).sqrt();
                // relative floor so float noise in a constant column is not amplified
                if sd <= T::lit(1e-12) * (T::one() + m.abs()) {
                    T::zero()
                } else {
                    T::one() / sd
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn apply(&self, rows: &mut Matrix<T>) {
        for i in 0..rows.rows() {
            for ((v, &m), &s) in rows.row_mut(i).iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = (*v - m) * s;
            }
        }
    }
}

/// Standardizes every column in place using statistics of the rows for
/// which `is_train` holds.
pub fn standardize<T: Scalar>(
    dataset: &mut FeatureDataset<T>,
    is_train: impl Fn(&RowKey) -> bool,
) -> Result<Standardizer<T>, FeatureError> {
    let train: Vec<usize> = (0..dataset.len())
        .filter(|&i| is_train(&dataset.row_index[i]))
        .collect();
    let s = Standardizer::fit(&dataset.rows, &train)?;
    s.apply(&mut dataset.rows);
    Ok(s)
}
