//! Gradient-boosted depth-1 trees on the logistic loss with second-order
//! leaf values, as in XGBoost.

use serde::{Deserialize, Serialize};

use super::{check_supervised, ModelError, Scorer, TrainConfig};
use crate::matrix::Matrix;
use crate::scalar::{sigmoid, Scalar};

/// Rows with `x[feature] < threshold` take `left`, others `right`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Stump<T> {
    pub feature: usize,
    pub threshold: T,
    pub left: T,
    pub right: T,
}

impl<T: Scalar> Stump<T> {
    pub fn eval(&self, row: &[T]) -> T {
        if row[self.feature] < self.threshold {
            self.left
        } else {
            self.right
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BoostedStumpsModel<T> {
    pub stumps: Vec<Stump<T>>,
    pub learning_rate: T,
    pub width: usize,
    /// Total split gain per feature.
    pub gains: Vec<f64>,
}

impl<T: Scalar> BoostedStumpsModel<T> {
    pub fn rounds(&self) -> usize {
        self.stumps.len()
    }

    /// `learning_rate * sum of stump outputs`, the log-odds.
    pub fn additive_score(&self, row: &[T]) -> T {
        self.learning_rate * self.stumps.iter().map(|s| s.eval(row)).sum::<T>()
    }

    /// Gains normalized to sum to 1; all zero when no split was ever made.
    pub fn feature_importance(&self) -> Vec<f64> {
        let total: f64 = self.gains.iter().sum();
        if total > 0.0 {
            self.gains.iter().map(|g| g / total).collect()
        } else {
            vec![0.0; self.gains.len()]
        }
    }
}

impl<T: Scalar> Scorer<T> for BoostedStumpsModel<T> {
    fn width(&self) -> usize {
        self.width
    }

    fn score_row(&self, row: &[T]) -> T {
        sigmoid(self.additive_score(row))
    }
}

/// Each round computes weighted gradients `g = c (p - y)` and hessians
/// `h = c p (1 - p)` at the current log-odds (starting from 0), and picks
/// the stump maximizing
/// `G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda)` with leaf
/// values `-G/(H+lambda)`. Thresholds are midpoints between consecutive
/// distinct values. Without any positive-gain split the round adds a
/// constant stump.
pub fn train_boosted_stumps<T: Scalar>(
    rows: &Matrix<T>,
    labels: &[u8],
    config: &TrainConfig,
) -> Result<BoostedStumpsModel<T>, ModelError> {
    config.validate()?;
    check_supervised(rows, labels)?;
    let (w0, w1) = config.weights_for(labels)?;
    let lambda = config.regularization.max(1e-12);
    let n = rows.rows();
    let d = rows.cols();
    let eta = config.learning_rate;

    // per feature: row ids sorted by value, computed once
    let order: Vec<Vec<u32>> = (0..d)
        .map(|f| {
            let mut ix: Vec<u32> = (0..n as u32).collect();
            ix.sort_by(|&a, &b| {
                rows.get(a as usize, f)
                    .partial_cmp(&rows.get(b as usize, f))
                    .expect("finite features")
            });
            ix
        })
        .collect();
    let sorted_vals: Vec<Vec<f64>> = order
        .iter()
        .enumerate()
        .map(|(f, ix)| ix.iter().map(|&i| rows.get(i as usize, f).as_f64()).collect())
        .collect();

    let cw: Vec<f64> = labels.iter().map(|&l| if l != 0 { w1 } else { w0 }).collect();
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(l != 0)).collect();
    let mut f_val = vec![0.0f64; n];
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    let mut stumps = Vec::with_capacity(config.epochs);
    let mut gains = vec![0.0; d];
    for _ in 0..config.epochs {
        for i in 0..n {
            let p = 1.0 / (1.0 + (-f_val[i]).exp());
            g[i] = cw[i] * (p - y[i]);
            h[i] = cw[i] * p * (1.0 - p);
        }
        let (gs, hs): (f64, f64) = (g.iter().sum(), h.iter().sum());
        let parent = gs * gs / (hs + lambda);
        let mut best: Option<(f64, usize, f64, f64, f64)> = None;
        for (f, (ix, vals)) in order.iter().zip(&sorted_vals).enumerate() {
            let (mut gl, mut hl) = (0.0, 0.0);
            for k in 0..n - 1 {
                let i = ix[k] as usize;
                gl += g[i];
                hl += h[i];
                let (v, v_next) = (vals[k], vals[k + 1]);
                if v_next <= v {
                    continue;
                }
                let (gr, hr) = (gs - gl, hs - hl);
                let gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent;
                if gain > 1e-12 && best.is_none_or(|b| gain > b.0) {
                    best = Some((gain, f, 0.5 * (v + v_next), -gl / (hl + lambda), -gr / (hr + lambda)));
                }
            }
        }
        let stump = match best {
            Some((gain, feature, thr, left, right)) => {
                gains[feature] += gain;
                Stump {
                    feature,
                    threshold: T::lit(thr),
                    left: T::lit(left),
                    right: T::lit(right),
                }
            }
            None => {
                let v = T::lit(-gs / (hs + lambda));
                Stump {
                    feature: 0,
                    threshold: T::zero(),
                    left: v,
                    right: v,
                }
            }
        };
        for (i, fv) in f_val.iter_mut().enumerate() {
            *fv += eta * stump.eval(rows.row(i)).as_f64();
        }
        stumps.push(stump);
    }
    Ok(BoostedStumpsModel {
        stumps,
        learning_rate: T::lit(eta),
        width: d,
        gains,
    })
}
