//! Causal dilated 1-D convolutions over the window sequence, pooled into
//! the last step and the time average, then a dense logit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{impl_scorer, init_uniform, Layout, Network};
use crate::features::SeqLayout;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CausalConvNet<T> {
    pub seq: SeqLayout,
    /// Full row width; only the leading sequence block is read.
    pub row_width: usize,
    pub hidden: usize,
    pub kernel: usize,
    /// One entry per convolution layer.
    pub dilations: Vec<usize>,
    pub params: Vec<T>,
}

struct Offsets {
    /// Per layer: weight offset (kernel x out x in) and bias offset.
    layers: Vec<(usize, usize)>,
    head_w: usize,
    head_b: usize,
}

impl<T: Scalar> CausalConvNet<T> {
    pub fn new(seq: SeqLayout, row_width: usize, hidden: usize, kernel: usize, dilations: &[usize], seed: u64) -> Self {
        let mut net = Self {
            seq,
            row_width,
            hidden,
            kernel,
            dilations: dilations.to_vec(),
            params: Vec::new(),
        };
        let (offs, len) = net.offsets();
        net.params = vec![T::zero(); len];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (l, &(w, _)) in offs.layers.iter().enumerate() {
            let c_in = net.layer_in(l);
            let n = kernel * hidden * c_in;
            init_uniform(&mut rng, &mut net.params[w..w + n], kernel * c_in, hidden);
        }
        init_uniform(&mut rng, &mut net.params[offs.head_w..offs.head_w + 2 * hidden], 2 * hidden, 1);
        net
    }

    fn layer_in(&self, l: usize) -> usize {
        if l == 0 {
            self.seq.channels
        } else {
            self.hidden
        }
    }

    fn offsets(&self) -> (Offsets, usize) {
        let mut lay = Layout::default();
        let layers = (0..self.dilations.len())
            .map(|l| {
                let w = lay.take(self.kernel * self.hidden * self.layer_in(l));
                (w, lay.take(self.hidden))
            })
            .collect();
        let head_w = lay.take(2 * self.hidden);
        let head_b = lay.take(1);
        (
            Offsets {
                layers,
                head_w,
                head_b,
            },
            lay.len(),
        )
    }

    /// Pre-activations of each layer, each `steps x hidden` time-major;
    /// layer input for layer 0 is the raw sequence.
    fn conv_forward(&self, x: &[T], offs: &Offsets) -> Vec<Vec<T>> {
        let steps = self.seq.steps;
        let h = self.hidden;
        let mut pres: Vec<Vec<T>> = Vec::with_capacity(self.dilations.len());
        let mut input: Vec<T> = x[..self.seq.width()].to_vec();
        for (l, &(w_off, b_off)) in offs.layers.iter().enumerate() {
            let c_in = self.layer_in(l);
            let dil = self.dilations[l];
            let mut pre = vec![T::zero(); steps * h];
            for t in 0..steps {
                let out = &mut pre[t * h..(t + 1) * h];
                out.copy_from_slice(&self.params[b_off..b_off + h]);
                for j in 0..self.kernel {
                    let Some(src) = t.checked_sub(j * dil) else { break };
                    let xin = &input[src * c_in..(src + 1) * c_in];
                    let wj = &self.params[w_off + j * h * c_in..w_off + (j + 1) * h * c_in];
                    for (o, v) in out.iter_mut().enumerate() {
                        *v += crate::scalar::dot(&wj[o * c_in..(o + 1) * c_in], xin);
                    }
                }
            }
            input = pre.iter().map(|&v| v.max(T::zero())).collect();
            pres.push(pre);
        }
        pres
    }

    /// Activations of the last convolution layer, `steps x hidden`.
    pub fn features(&self, x: &[T]) -> Vec<T> {
        let (offs, _) = self.offsets();
        let pres = self.conv_forward(x, &offs);
        pres.last()
            .map(|p| p.iter().map(|&v| v.max(T::zero())).collect())
            .unwrap_or_default()
    }

    fn head(&self, feats: &[T], offs: &Offsets) -> T {
        let h = self.hidden;
        let steps = self.seq.steps;
        let w = &self.params[offs.head_w..offs.head_w + 2 * h];
        let mut z = self.params[offs.head_b];
        let inv = T::one() / T::count(steps);
        for k in 0..h {
            let last = feats[(steps - 1) * h + k];
            let mean = (0..steps).map(|t| feats[t * h + k]).sum::<T>() * inv;
            z += w[k] * last + w[h + k] * mean;
        }
        z
    }
}

impl<T: Scalar> Network<T> for CausalConvNet<T> {
    fn params(&self) -> &[T] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    fn input_width(&self) -> usize {
        self.row_width
    }

    fn logit(&self, x: &[T]) -> T {
        let (offs, _) = self.offsets();
        self.head(&self.features(x), &offs)
    }

    fn backprop(&self, x: &[T], upstream: &mut dyn FnMut(T) -> T, grad: &mut [T]) -> T {
        let (offs, _) = self.offsets();
        let steps = self.seq.steps;
        let h = self.hidden;
        let pres = self.conv_forward(x, &offs);
        let relu = |p: &Vec<T>| -> Vec<T> { p.iter().map(|&v| v.max(T::zero())).collect() };
        let feats = relu(pres.last().expect("at least one layer"));
        let z = self.head(&feats, &offs);
        let dz = upstream(z);

        // head
        let inv = T::one() / T::count(steps);
        let mut d_act = vec![T::zero(); steps * h];
        {
            let w = &self.params[offs.head_w..offs.head_w + 2 * h];
            for k in 0..h {
                let last = feats[(steps - 1) * h + k];
                let mean = (0..steps).map(|t| feats[t * h + k]).sum::<T>() * inv;
                grad[offs.head_w + k] += dz * last;
                grad[offs.head_w + h + k] += dz * mean;
                d_act[(steps - 1) * h + k] += dz * w[k];
                for t in 0..steps {
                    d_act[t * h + k] += dz * w[h + k] * inv;
                }
            }
            grad[offs.head_b] += dz;
        }

        for l in (0..offs.layers.len()).rev() {
            let (w_off, b_off) = offs.layers[l];
            let c_in = self.layer_in(l);
            let dil = self.dilations[l];
            let input: Vec<T> = if l == 0 {
                x[..self.seq.width()].to_vec()
            } else {
                relu(&pres[l - 1])
            };
            let d_pre: Vec<T> = d_act
                .iter()
                .zip(&pres[l])
                .map(|(&g, &p)| if p > T::zero() { g } else { T::zero() })
                .collect();
            let mut d_in = vec![T::zero(); steps * c_in];
            for t in 0..steps {
                let g = &d_pre[t * h..(t + 1) * h];
                for (o, &gv) in g.iter().enumerate() {
                    grad[b_off + o] += gv;
                }
                for j in 0..self.kernel {
                    let Some(src) = t.checked_sub(j * dil) else { break };
                    let base = w_off + j * h * c_in;
                    for (o, &gv) in g.iter().enumerate() {
                        if gv == T::zero() {
                            continue;
                        }
                        let row = base + o * c_in;
                        for c in 0..c_in {
                            grad[row + c] += gv * input[src * c_in + c];
                            d_in[src * c_in + c] += gv * self.params[row + c];
                        }
                    }
                }
            }
            d_act = d_in;
        }
        z
    }
}

impl_scorer!(CausalConvNet);
