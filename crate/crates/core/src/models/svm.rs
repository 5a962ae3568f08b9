//! Class-weighted linear SVM trained by stochastic subgradient descent on
//!
//! ```text
//! J(w, b) = lambda |w|^2 + (1/n) sum_i c_i max(0, 1 - y_i (w.x_i + b))
//! ```
//!
//! with `y_i` in {-1, +1}, followed by a logistic calibration of the margin.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_supervised, ModelError, Scorer, TrainConfig};
use crate::matrix::Matrix;
use crate::scalar::{dot, sigmoid, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LinearSvmModel<T> {
    pub weights: Vec<T>,
    pub bias: T,
    /// Probability is `sigmoid(a * margin + b)`.
    pub calibration: (T, T),
    /// Full objective after each epoch.
    pub objective: Vec<f64>,
}

impl<T: Scalar> LinearSvmModel<T> {
    pub fn margin(&self, row: &[T]) -> T {
        dot(&self.weights, row) + self.bias
    }
}

impl<T: Scalar> Scorer<T> for LinearSvmModel<T> {
    fn width(&self) -> usize {
        self.weights.len()
    }

    fn score_row(&self, row: &[T]) -> T {
        let (a, b) = self.calibration;
        sigmoid(a * self.margin(row) + b)
    }
}

fn signed(label: u8) -> f64 {
    if label != 0 {
        1.0
    } else {
        -1.0
    }
}

/// Full objective with per-class weights `(normal, anomaly)`.
pub fn svm_objective<T: Scalar>(
    w: &[T],
    b: T,
    rows: &Matrix<T>,
    labels: &[u8],
    weights: (f64, f64),
    lambda: f64,
) -> f64 {
    let reg = lambda * w.iter().map(|v| v.as_f64().powi(2)).sum::<f64>();
    let hinge: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let c = if l != 0 { weights.1 } else { weights.0 };
            let m = signed(l) * (dot(w, rows.row(i)) + b).as_f64();
            c * (1.0 - m).max(0.0)
        })
        .sum();
    reg + hinge / labels.len() as f64
}

/// Subgradient of `lambda |w|^2 + c max(0, 1 - y (w.x + b))` for one
/// sample; returns `(d/dw, d/db)`. In the flat region (margin > 1) this is
/// the regularizer gradient `2 lambda w`.
pub fn hinge_subgradient<T: Scalar>(w: &[T], b: T, x: &[T], y: u8, c: f64, lambda: f64) -> (Vec<T>, T) {
    let two_l = T::lit(2.0 * lambda);
    let mut gw: Vec<T> = w.iter().map(|&v| two_l * v).collect();
    let ys = T::lit(signed(y));
    if ys * (dot(w, x) + b) < T::one() {
        let k = T::lit(c) * ys;
        for (g, &xi) in gw.iter_mut().zip(x) {
            *g -= k * xi;
        }
        return (gw, -k);
    }
    (gw, T::zero())
}

/// Shuffled per-sample subgradient steps with step `eta / (1 + k / n)` at
/// global step `k`. After each epoch the full objective is evaluated; an
/// epoch that would increase it is discarded and the base step halved, so
/// the recorded objective never increases.
pub fn train_linear_svm<T: Scalar>(
    rows: &Matrix<T>,
    labels: &[u8],
    config: &TrainConfig,
) -> Result<LinearSvmModel<T>, ModelError> {
    config.validate()?;
    check_supervised(rows, labels)?;
    let weights = config.weights_for(labels)?;
    let lambda = config.regularization;
    let n = rows.rows();
    let d = rows.cols();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut w = vec![T::zero(); d];
    let mut b = T::zero();
    let mut best = svm_objective(&w, b, rows, labels, weights, lambda);
    let mut eta = config.learning_rate;
    let mut step = 0usize;
    let mut objective = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let (mut w_new, mut b_new) = (w.clone(), b);
        for &i in &order {
            let lr = eta / (1.0 + step as f64 / n as f64);
            step += 1;
            let c = if labels[i] != 0 { weights.1 } else { weights.0 };
            let x = rows.row(i);
            let ys = T::lit(signed(labels[i]));
            let active = ys * (dot(&w_new, x) + b_new) < T::one();
            let shrink = T::one() - T::lit(2.0 * lambda * lr);
            w_new.iter_mut().for_each(|v| *v *= shrink);
            if active {
                let k = T::lit(lr * c) * ys;
                for (v, &xi) in w_new.iter_mut().zip(x) {
                    *v += k * xi;
                }
                b_new += k;
            }
        }
        let obj = svm_objective(&w_new, b_new, rows, labels, weights, lambda);
        if !obj.is_finite() {
            return Err(ModelError::Diverged {
                epoch: objective.len(),
                loss: obj,
            });
        }
        if obj <= best {
            w = w_new;
            b = b_new;
            best = obj;
        } else {
            eta *= 0.5;
        }
        objective.push(best);
    }
    let margins: Vec<f64> = (0..n).map(|i| (dot(&w, rows.row(i)) + b).as_f64()).collect();
    let (a, c) = platt(&margins, labels, weights);
    Ok(LinearSvmModel {
        weights: w,
        bias: b,
        calibration: (T::lit(a), T::lit(c)),
        objective,
    })
}

/// Weighted logistic fit of `sigmoid(a m + b)` to the labels by Newton's
/// method with a small ridge for stability.
fn platt(margins: &[f64], labels: &[u8], weights: (f64, f64)) -> (f64, f64) {
    let (mut a, mut b) = (1.0, 0.0);
    let ridge = 1e-6;
    for _ in 0..50 {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (ridge * a, ridge * b, ridge, 0.0, ridge);
        for (&m, &l) in margins.iter().zip(labels) {
            let c = if l != 0 { weights.1 } else { weights.0 };
            let p = 1.0 / (1.0 + (-(a * m + b)).exp());
            let r = c * (p - f64::from(l));
            let h = c * (p * (1.0 - p)).max(1e-12);
            ga += r * m;
            gb += r;
            haa += h * m * m;
            hab += h * m;
            hbb += h;
        }
        let det = haa * hbb - hab * hab;
        if det.abs() < 1e-18 {
            break;
        }
        let da = (hbb * ga - hab * gb) / det;
        let db = (haa * gb - hab * ga) / det;
        a -= da;
        b -= db;
        if da.abs() + db.abs() < 1e-10 {
            break;
        }
    }
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn blobs(n0: usize, n1: usize, gap: f64, seed: u64) -> (Matrix<f64>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut v = Vec::new();
        let mut y = Vec::new();
        for i in 0..n0 + n1 {
            let pos = i >= n0;
            let c = if pos { gap / 2.0 } else { -gap / 2.0 };
            v.push(c + noise.sample(&mut rng));
            v.push(noise.sample(&mut rng) + rng.random::<f64>());
            y.push(u8::from(pos));
        }
        (Matrix::from_vec(n0 + n1, 2, v), y)
    }

    #[test]
    fn separable_blobs_are_separated() {
        let (x, y) = blobs(100, 100, 10.0, 1);
        let m = train_linear_svm(&x, &y, &TrainConfig::default()).unwrap();
        let pred = super::super::hard_labels(&m.predict_proba(&x).unwrap(), 0.5);
        assert_eq!(pred, y);
    }

    #[test]
    fn objective_never_increases() {
        let (x, y) = blobs(200, 20, 1.5, 2);
        let cfg = TrainConfig {
            epochs: 40,
            learning_rate: 1.0,
            ..Default::default()
        };
        let m = train_linear_svm(&x, &y, &cfg).unwrap();
        assert!(m.objective.windows(2).all(|w| w[1] <= w[0] + 1e-6));
    }

    #[test]
    fn heavier_anomaly_weight_does_not_lower_recall() {
        let (x, y) = blobs(300, 20, 1.0, 3);
        let recall = |w1: f64| {
            let cfg = TrainConfig {
                class_weights: Some((1.0, w1)),
                ..Default::default()
            };
            let m = train_linear_svm(&x, &y, &cfg).unwrap();
            let p = super::super::hard_labels(&m.predict_proba(&x).unwrap(), 0.5);
            crate::eval::compute_metrics(&p, &y).unwrap().recall
        };
        assert!(recall(10.0) >= recall(5.0));
    }

    #[test]
    fn flat_region_gradient_is_regularizer_only() {
        let w = [0.5, -2.0];
        let (gw, gb) = hinge_subgradient(&w, 0.0, &[4.0, -1.0], 1, 3.0, 0.1);
        assert_eq!(gw, vec![2.0 * 0.1 * 0.5, 2.0 * 0.1 * -2.0]);
        assert_eq!(gb, 0.0);
        let (gw, gb) = hinge_subgradient(&w, 0.0, &[0.0, 0.0], 1, 3.0, 0.1);
        assert_eq!(gw, vec![0.1, -0.4]);
        assert_eq!(gb, -3.0);
    }

    #[test]
    fn zero_margin_with_identity_calibration_is_half() {
        let m = LinearSvmModel::<f64> {
            weights: vec![1.0, -1.0],
            bias: 0.0,
            calibration: (1.0, 0.0),
            objective: vec![],
        };
        assert_eq!(m.score_row(&[2.0, 2.0]), 0.5);
    }

    #[test]
    fn single_class_is_rejected() {
        let x = Matrix::<f64>::zeros(3, 2);
        assert!(matches!(
            train_linear_svm(&x, &[0, 0, 0], &TrainConfig::default()),
            Err(ModelError::SingleClass)
        ));
    }
}
