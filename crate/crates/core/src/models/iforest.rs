//! Isolation forest: random axis-aligned partition trees scored by the
//! normalized expected isolation depth, `s(x) = 2^(-E[h(x)] / c(psi))`.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ModelError, Scorer};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Average unsuccessful-search path length in a binary search tree of `n`
/// points, with `c(0) = c(1) = 0` and `c(2) = 1`.
pub fn average_path_length(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let m = (n - 1) as f64;
            2.0 * (m.ln() + EULER_GAMMA) - 2.0 * m / n as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub enum TreeNode<T> {
    Split {
        feature: usize,
        value: T,
        left: usize,
        right: usize,
    },
    /// Leaf holding `size` training points.
    Leaf { size: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct IsolationTree<T> {
    /// Node 0 is the root.
    pub nodes: Vec<TreeNode<T>>,
}

impl<T: Scalar> IsolationTree<T> {
    /// Depth of the leaf reached by `row`, plus `c(size)` for unresolved leaves.
    pub fn path_length(&self, row: &[T]) -> f64 {
        let mut i = 0;
        let mut depth = 0.0;
        loop {
            match &self.nodes[i] {
                TreeNode::Split {
                    feature,
                    value,
                    left,
                    right,
                } => {
                    i = if row[*feature] < *value { *left } else { *right };
                    depth += 1.0;
                }
                TreeNode::Leaf { size } => return depth + average_path_length(*size),
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go<T>(nodes: &[TreeNode<T>], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
                TreeNode::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct IsolationForestModel<T> {
    pub trees: Vec<IsolationTree<T>>,
    pub subsample_size: usize,
    pub width: usize,
}

impl<T: Scalar> IsolationForestModel<T> {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn mean_path_length(&self, row: &[T]) -> f64 {
        self.trees.iter().map(|t| t.path_length(row)).sum::<f64>() / self.trees.len() as f64
    }

    /// Score for a given mean path length. With `c(psi) = 0` every point is
    /// equally (un)isolated and scores 0.5.
    pub fn score_from_path(&self, mean_path: f64) -> f64 {
        let c = average_path_length(self.subsample_size);
        if c == 0.0 {
            0.5
        } else {
            (-mean_path / c).exp2()
        }
    }
}

impl<T: Scalar> Scorer<T> for IsolationForestModel<T> {
    fn width(&self) -> usize {
        self.width
    }

    fn score_row(&self, row: &[T]) -> T {
        T::lit(self.score_from_path(self.mean_path_length(row)))
    }
}

/// Builds `n_trees` trees, each on a `psi`-row subsample drawn without
/// replacement. Each split picks a feature uniformly among those that are
/// not constant on the node and a value uniformly inside the node's range;
/// growth stops at depth `ceil(log2 psi)` or when a node cannot be split.
pub fn train_isolation_forest<T: Scalar>(
    rows: &Matrix<T>,
    n_trees: usize,
    psi: usize,
    seed: u64,
) -> Result<IsolationForestModel<T>, ModelError> {
    if rows.rows() == 0 {
        return Err(ModelError::Empty);
    }
    if psi < 2 {
        return Err(ModelError::Config(format!("subsample size {psi} must be at least 2")));
    }
    if psi > rows.rows() {
        return Err(ModelError::Config(format!(
            "subsample size {psi} exceeds {} rows",
            rows.rows()
        )));
    }
    if n_trees == 0 {
        return Err(ModelError::Config("at least one tree is required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_depth = (psi as f64).log2().ceil() as usize;
    let trees = (0..n_trees)
        .map(|_| {
            let idx = sample(&mut rng, rows.rows(), psi).into_vec();
            let mut nodes = Vec::new();
            grow(rows, idx, 0, max_depth, &mut rng, &mut nodes);
            IsolationTree { nodes }
        })
        .collect();
    Ok(IsolationForestModel {
        trees,
        subsample_size: psi,
        width: rows.cols(),
    })
}

fn grow<T: Scalar>(
    rows: &Matrix<T>,
    idx: Vec<usize>,
    depth: usize,
    max_depth: usize,
    rng: &mut ChaCha8Rng,
    nodes: &mut Vec<TreeNode<T>>,
) -> usize {
    let me = nodes.len();
    nodes.push(TreeNode::Leaf { size: idx.len() });
    if depth >= max_depth || idx.len() <= 1 {
        return me;
    }
    let ranges: Vec<(usize, T, T)> = (0..rows.cols())
        .filter_map(|f| {
            let (lo, hi) = idx.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &i| {
                let v = rows.get(i, f);
                (lo.min(v), hi.max(v))
            });
            (lo < hi).then_some((f, lo, hi))
        })
        .collect();
    if ranges.is_empty() {
        return me;
    }
    let (feature, lo, hi) = ranges[rng.random_range(0..ranges.len())];
    let u = T::lit(rng.random::<f64>());
    // keep the split strictly above the minimum so both sides are non-empty
    let mut value = lo + (hi - lo) * u;
    if value <= lo {
        value = hi;
    }
    let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| rows.get(i, feature) < value);
    let left = grow(rows, l, depth + 1, max_depth, rng, nodes);
    let right = grow(rows, r, depth + 1, max_depth, rng, nodes);
    nodes[me] = TreeNode::Split {
        feature,
        value,
        left,
        right,
    };
    me
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cluster_with_outlier(seed: u64) -> Matrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = Vec::new();
        for _ in 0..63 {
            v.push(rng.random::<f64>() - 0.5);
            v.push(rng.random::<f64>() - 0.5);
        }
        v.extend([10.0, 10.0]);
        Matrix::from_vec(64, 2, v)
    }

    #[test]
    fn normalizer_conventions() {
        assert_eq!(average_path_length(1), 0.0);
        assert_eq!(average_path_length(2), 1.0);
        let c256 = average_path_length(256);
        assert!((c256 - 10.244_770_920_2).abs() < 1e-6, "{c256}");
    }

    #[test]
    fn outlier_scores_highest() {
        for seed in 0..20 {
            let x = cluster_with_outlier(seed);
            let m = train_isolation_forest(&x, 100, 32, seed).unwrap();
            let s = m.predict_proba(&x).unwrap();
            let out = s[63];
            assert!(s[..63].iter().all(|&v| v < out), "seed {seed}");
            assert!(s.iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn depth_is_bounded() {
        let x = cluster_with_outlier(1);
        let m = train_isolation_forest(&x, 20, 16, 3).unwrap();
        assert!(m.trees.iter().all(|t| t.depth() <= 4));
    }

    #[test]
    fn fixed_points_of_the_score() {
        let m = IsolationForestModel::<f64> {
            trees: vec![],
            subsample_size: 64,
            width: 1,
        };
        let c = average_path_length(64);
        assert_eq!(m.score_from_path(c), 0.5);
        assert!(m.score_from_path(0.0) == 1.0);
        assert!(m.score_from_path(1e-9) < 1.0 && m.score_from_path(1e-9) > 0.999);
    }

    #[test]
    fn single_point_subsample_scores_half() {
        let m = IsolationForestModel::<f64> {
            trees: vec![IsolationTree {
                nodes: vec![TreeNode::Leaf { size: 1 }],
            }],
            subsample_size: 1,
            width: 2,
        };
        assert_eq!(m.score_row(&[3.0, -1.0]), 0.5);
    }

    #[test]
    fn errors() {
        let x = cluster_with_outlier(0);
        assert!(matches!(train_isolation_forest(&x, 10, 1, 0), Err(ModelError::Config(_))));
        assert!(train_isolation_forest(&x, 10, 65, 0).is_err());
        let m = train_isolation_forest(&x, 10, 8, 0).unwrap();
        assert!(matches!(
            m.predict_proba(&Matrix::<f64>::zeros(1, 3)),
            Err(ModelError::WidthMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn duplicate_rows_score_equal_and_training_is_deterministic() {
        let x = cluster_with_outlier(4);
        let a = train_isolation_forest(&x, 30, 16, 9).unwrap();
        let b = train_isolation_forest(&x, 30, 16, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.score_row(x.row(5)), a.score_row(&x.row(5).to_vec()));
    }
}
