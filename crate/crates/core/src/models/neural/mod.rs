//! Small neural scorers with hand-written backpropagation, trained by
//! momentum SGD on class-weighted binary cross-entropy.
//!
//! All parameters of a network live in one flat vector; layers address it
//! through fixed offsets. Per-sample gradients are accumulated in row
//! order, so training is deterministic for a given seed.

mod attention;
mod mlp;
mod tcn;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use attention::SelfAttentionNet;
pub use mlp::{Activation, DenseNet};
pub use tcn::CausalConvNet;

use super::ModelError;
use crate::matrix::Matrix;
use crate::scalar::{sigmoid, softplus, Scalar};

/// A network producing one logit per input row.
pub trait Network<T: Scalar>: Sync {
    fn params(&self) -> &[T];
    fn params_mut(&mut self) -> &mut [T];
    /// Width of the rows the network reads (it may use only a prefix).
    fn input_width(&self) -> usize;
    fn logit(&self, x: &[T]) -> T;
    /// Runs the forward pass, asks `upstream` for d(loss)/d(logit) and adds
    /// d(loss)/d(params) into `grad`. Returns the logit.
    fn backprop(&self, x: &[T], upstream: &mut dyn FnMut(T) -> T, grad: &mut [T]) -> T;
}

macro_rules! impl_scorer {
    ($ty:ident) => {
        impl<T: $crate::scalar::Scalar> $crate::models::Scorer<T> for $ty<T> {
            fn width(&self) -> usize {
                $crate::models::neural::Network::input_width(self)
            }

            fn score_row(&self, row: &[T]) -> T {
                $crate::scalar::sigmoid($crate::models::neural::Network::logit(self, row))
            }
        }
    };
}
pub(crate) use impl_scorer;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuralTrainConfig {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// `(normal, anomaly)`; `None` balances by inverse class frequency.
    pub class_weights: Option<(f64, f64)>,
    pub clip_norm: f64,
    pub threshold: f64,
}

impl Default for NeuralTrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            epochs: 20,
            batch_size: 32,
            learning_rate: 0.01,
            momentum: 0.9,
            class_weights: None,
            clip_norm: 5.0,
            threshold: 0.5,
        }
    }
}

impl NeuralTrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let ok = self.epochs > 0
            && self.batch_size > 0
            && self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.momentum)
            && self.clip_norm > 0.0
            && self.threshold > 0.0
            && self.threshold < 1.0
            && self.class_weights.is_none_or(|(a, b)| a > 0.0 && b > 0.0);
        if ok {
            Ok(())
        } else {
            Err(ModelError::Config(format!("invalid neural training settings {self:?}")))
        }
    }
}

/// `c * BCE(sigmoid(z), y)` in its stable logit form.
pub fn weighted_bce<T: Scalar>(z: T, y: u8, c: T) -> T {
    let yz = if y != 0 { z } else { T::zero() };
    c * (softplus(z) - yz)
}

/// Summed weighted loss and summed parameter gradient over the rows `idx`.
pub fn batch_gradient<T: Scalar, N: Network<T> + ?Sized>(
    net: &N,
    rows: &Matrix<T>,
    labels: &[u8],
    idx: &[usize],
    weights: (f64, f64),
    grad: &mut [T],
) -> T {
    let (w0, w1) = (T::lit(weights.0), T::lit(weights.1));
    let mut loss = T::zero();
    for &i in idx {
        let y = labels[i];
        let c = if y != 0 { w1 } else { w0 };
        let target = if y != 0 { T::one() } else { T::zero() };
        let z = net.backprop(rows.row(i), &mut |z| c * (sigmoid(z) - target), grad);
        loss += weighted_bce(z, y, c);
    }
    loss
}

/// Mini-batch momentum SGD. Batch gradients are averaged over the batch
/// and rescaled to at most `clip_norm`. Returns the mean weighted loss of
/// each epoch, measured during the pass.
pub fn train_network<T: Scalar, N: Network<T> + ?Sized>(
    net: &mut N,
    rows: &Matrix<T>,
    labels: &[u8],
    config: &NeuralTrainConfig,
) -> Result<Vec<f64>, ModelError> {
    train_network_monitored(net, rows, labels, config, &mut |_, _, _| {})
}

/// [`train_network`] that calls `monitor(epoch, net, loss)` after every
/// epoch, e.g. to keep the parameters that validate best.
pub fn train_network_monitored<T: Scalar, N: Network<T> + ?Sized>(
    net: &mut N,
    rows: &Matrix<T>,
    labels: &[u8],
    config: &NeuralTrainConfig,
    monitor: &mut dyn FnMut(usize, &N, f64),
) -> Result<Vec<f64>, ModelError> {
    config.validate()?;
    super::check_supervised(rows, labels)?;
    if rows.cols() != net.input_width() {
        return Err(ModelError::WidthMismatch {
            expected: net.input_width(),
            got: rows.cols(),
        });
    }
    let weights = match config.class_weights {
        Some(w) => w,
        None => super::balanced_class_weights(labels)?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n_par = net.params().len();
    let mut grad = vec![T::zero(); n_par];
    let mut velocity = vec![T::zero(); n_par];
    let mut order: Vec<usize> = (0..rows.rows()).collect();
    let lr = T::lit(config.learning_rate);
    let mu = T::lit(config.momentum);
    let clip = T::lit(config.clip_norm);
    let mut curve = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = T::zero());
            total += batch_gradient(&*net, rows, labels, batch, weights, &mut grad).as_f64();
            let inv = T::one() / T::count(batch.len());
            grad.iter_mut().for_each(|g| *g *= inv);
            let norm = grad.iter().map(|&g| g * g).sum::<T>().sqrt();
            if !norm.is_finite() {
                return Err(ModelError::Diverged {
                    epoch,
                    loss: f64::NAN,
                });
            }
            if norm > clip {
                let s = clip / norm;
                grad.iter_mut().for_each(|g| *g *= s);
            }
            for ((p, v), &g) in net.params_mut().iter_mut().zip(&mut velocity).zip(&grad) {
                *v = mu * *v - lr * g;
                *p += *v;
            }
        }
        let mean = total / rows.rows() as f64;
        if !mean.is_finite() {
            return Err(ModelError::Diverged { epoch, loss: mean });
        }
        curve.push(mean);
        monitor(epoch, net, mean);
    }
    Ok(curve)
}

/// One point of a training curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean weighted training loss of the epoch.
    pub loss: f64,
    pub validation_f1: Option<f64>,
}

/// Writes `epoch,loss,validation_f1`; the last field is empty when no
/// validation set was scored.
pub fn write_loss_curve<W: std::io::Write>(records: &[EpochRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "epoch,loss,validation_f1")?;
    for r in records {
        match r.validation_f1 {
            Some(f) => writeln!(w, "{},{},{}", r.epoch, r.loss, f)?,
            None => writeln!(w, "{},{},", r.epoch, r.loss)?,
        }
    }
    Ok(())
}

/// Largest relative difference between the analytic gradient and central
/// finite differences of the summed weighted loss, over every parameter.
/// The relative error is `|a - n| / max(|a|, |n|, floor)`.
pub fn gradient_check<T: Scalar, N: Network<T> + Clone>(
    net: &N,
    rows: &Matrix<T>,
    labels: &[u8],
    weights: (f64, f64),
    eps: f64,
    floor: f64,
) -> f64 {
    let idx: Vec<usize> = (0..rows.rows()).collect();
    let mut grad = vec![T::zero(); net.params().len()];
    batch_gradient(net, rows, labels, &idx, weights, &mut grad);
    let mut probe = net.clone();
    let loss = |m: &N| {
        let (w0, w1) = (T::lit(weights.0), T::lit(weights.1));
        idx.iter()
            .map(|&i| {
                let c = if labels[i] != 0 { w1 } else { w0 };
                weighted_bce(m.logit(rows.row(i)), labels[i], c).as_f64()
            })
            .sum::<f64>()
    };
    let mut worst: f64 = 0.0;
    for k in 0..grad.len() {
        let orig = probe.params()[k];
        probe.params_mut()[k] = orig + T::lit(eps);
        let up = loss(&probe);
        probe.params_mut()[k] = orig - T::lit(eps);
        let down = loss(&probe);
        probe.params_mut()[k] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let analytic = grad[k].as_f64();
        let denom = analytic.abs().max(numeric.abs()).max(floor);
        worst = worst.max((analytic - numeric).abs() / denom);
    }
    worst
}

/// Adds uniform noise in `[-scale, scale)` to every parameter, giving a
/// random point in parameter space (biases included).
pub fn randomize_params<T: Scalar, N: Network<T> + ?Sized>(net: &mut N, seed: u64, scale: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in net.params_mut() {
        *p += T::lit(rng.random_range(-scale..scale));
    }
}

/// Uniform Glorot-style initialization of a `fan_out x fan_in` block.
pub(crate) fn init_uniform<T: Scalar>(rng: &mut ChaCha8Rng, out: &mut [T], fan_in: usize, fan_out: usize) {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in out {
        *v = T::lit(rng.random_range(-a..a));
    }
}

/// Consecutive parameter blocks inside the flat vector.
#[derive(Debug, Default)]
pub(crate) struct Layout {
    len: usize,
}

impl Layout {
    pub(crate) fn take(&mut self, n: usize) -> usize {
        let off = self.len;
        self.len += n;
        off
    }

    pub(crate) fn len(&self) -> usize {
        self.len
    }
}

/// `out = W x + b` with `W` row-major `out.len() x x.len()`.
pub(crate) fn affine<T: Scalar>(w: &[T], b: &[T], x: &[T], out: &mut [T]) {
    let n_in = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        *o = b[i] + crate::scalar::dot(&w[i * n_in..(i + 1) * n_in], x);
    }
}

/// Accumulates `dW += dout x^T` and `db += dout`, and if given, `dx += W^T dout`.
pub(crate) fn affine_backward<T: Scalar>(
    w: &[T],
    x: &[T],
    dout: &[T],
    dw: &mut [T],
    db: &mut [T],
    dx: Option<&mut [T]>,
) {
    let n_in = x.len();
    for (i, &g) in dout.iter().enumerate() {
        db[i] += g;
        for (d, &xv) in dw[i * n_in..(i + 1) * n_in].iter_mut().zip(x) {
            *d += g * xv;
        }
    }
    if let Some(dx) = dx {
        for (i, &g) in dout.iter().enumerate() {
            for (d, &wv) in dx.iter_mut().zip(&w[i * n_in..(i + 1) * n_in]) {
                *d += g * wv;
            }
        }
    }
}

/// Mutable views of two disjoint ranges of `v`, in any order.
pub(crate) fn two_mut<T>(v: &mut [T], a: (usize, usize), b: (usize, usize)) -> (&mut [T], &mut [T]) {
    assert!(a.0 + a.1 <= b.0 || b.0 + b.1 <= a.0, "overlapping parameter blocks");
    if a.0 < b.0 {
        let (lo, hi) = v.split_at_mut(b.0);
        (&mut lo[a.0..a.0 + a.1], &mut hi[..b.1])
    } else {
        let (lo, hi) = v.split_at_mut(a.0);
        (&mut hi[..a.1], &mut lo[b.0..b.0 + b.1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_bce_matches_definition() {
        let z = 0.3f64;
        let p = 1.0 / (1.0 + (-z).exp());
        assert!((weighted_bce(z, 1, 2.0) - 2.0 * -(p.ln())).abs() < 1e-12);
        assert!((weighted_bce(z, 0, 0.5) - 0.5 * -((1.0 - p).ln())).abs() < 1e-12);
    }

    #[test]
    fn two_mut_splits() {
        let mut v = [0, 1, 2, 3, 4, 5];
        let (a, b) = two_mut(&mut v, (4, 2), (0, 2));
        assert_eq!((a.to_vec(), b.to_vec()), (vec![4, 5], vec![0, 1]));
    }
}
