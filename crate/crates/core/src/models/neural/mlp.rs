//! Fully connected network over the flattened feature row.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{affine, affine_backward, impl_scorer, init_uniform, two_mut, Layout, Network};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply<T: Scalar>(self, v: T) -> T {
        match self {
            Activation::Relu => v.max(T::zero()),
            Activation::Tanh => v.tanh(),
        }
    }

    /// Derivative in terms of the pre-activation `z` and output `a`.
    fn derivative<T: Scalar>(self, z: T, a: T) -> T {
        match self {
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => T::one() - a * a,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DenseNet<T> {
    /// Layer widths from input to the single output logit.
    pub dims: Vec<usize>,
    pub activation: Activation,
    pub params: Vec<T>,
}

impl<T: Scalar> DenseNet<T> {
    pub fn new(input: usize, hidden: &[usize], activation: Activation, seed: u64) -> Self {
        let mut dims = vec![input];
        dims.extend_from_slice(hidden);
        dims.push(1);
        let mut layout = Layout::default();
        let offs: Vec<(usize, usize)> = dims
            .windows(2)
            .map(|w| (layout.take(w[0] * w[1]), layout.take(w[1])))
            .collect();
        let mut params = vec![T::zero(); layout.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (l, &(w_off, _)) in offs.iter().enumerate() {
            let (i, o) = (dims[l], dims[l + 1]);
            init_uniform(&mut rng, &mut params[w_off..w_off + i * o], i, o);
        }
        Self {
            dims,
            activation,
            params,
        }
    }

    /// `(weight offset, bias offset)` per layer.
    fn offsets(&self) -> Vec<(usize, usize)> {
        let mut layout = Layout::default();
        self.dims
            .windows(2)
            .map(|w| (layout.take(w[0] * w[1]), layout.take(w[1])))
            .collect()
    }

    /// Pre-activations and activations of every layer; the first activation
    /// is the input, the last pre-activation the logit.
    fn forward_all(&self, x: &[T]) -> (Vec<Vec<T>>, Vec<Vec<T>>) {
        let offs = self.offsets();
        let n_layers = offs.len();
        let mut acts = vec![x[..self.dims[0]].to_vec()];
        let mut pres = Vec::with_capacity(n_layers);
        for (l, &(w_off, b_off)) in offs.iter().enumerate() {
            let (i, o) = (self.dims[l], self.dims[l + 1]);
            let mut z = vec![T::zero(); o];
            affine(
                &self.params[w_off..w_off + i * o],
                &self.params[b_off..b_off + o],
                &acts[l],
                &mut z,
            );
            if l + 1 < n_layers {
                acts.push(z.iter().map(|&v| self.activation.apply(v)).collect());
            }
            pres.push(z);
        }
        (pres, acts)
    }
}

impl<T: Scalar> Network<T> for DenseNet<T> {
    fn params(&self) -> &[T] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    fn input_width(&self) -> usize {
        self.dims[0]
    }

    fn logit(&self, x: &[T]) -> T {
        self.forward_all(x).0.last().expect("output layer")[0]
    }

    fn backprop(&self, x: &[T], upstream: &mut dyn FnMut(T) -> T, grad: &mut [T]) -> T {
        let (pres, acts) = self.forward_all(x);
        let offs = self.offsets();
        let z = pres.last().expect("output layer")[0];
        let mut delta = vec![upstream(z)];
        for l in (0..offs.len()).rev() {
            let (w_off, b_off) = offs[l];
            let (i, o) = (self.dims[l], self.dims[l + 1]);
            let mut dx = vec![T::zero(); i];
            let (dw, db) = two_mut(grad, (w_off, i * o), (b_off, o));
            affine_backward(
                &self.params[w_off..w_off + i * o],
                &acts[l],
                &delta,
                dw,
                db,
                (l > 0).then_some(&mut dx[..]),
            );
            if l > 0 {
                for ((d, &zp), &a) in dx.iter_mut().zip(&pres[l - 1]).zip(&acts[l]) {
                    *d *= self.activation.derivative(zp, a);
                }
            }
            delta = dx;
        }
        z
    }
}

impl_scorer!(DenseNet);
