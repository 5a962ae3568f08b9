//! Stacked single-head self-attention over the window sequence.
//!
//! ```text
//! h0[t] = W_in x[t] + b_in + P[t]
//! per stack:  A = softmax(Q K^T / sqrt(d)),  r = h + A V,
//!             h' = r + W2 relu(W1 r + b1) + b2
//! logit = w_o . mean_t h[t] + b_o
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{affine, affine_backward, impl_scorer, init_uniform, two_mut, Layout, Network};
use crate::features::SeqLayout;
use crate::scalar::{dot, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SelfAttentionNet<T> {
    pub seq: SeqLayout,
    pub row_width: usize,
    pub d_model: usize,
    pub d_ff: usize,
    pub n_stacks: usize,
    pub params: Vec<T>,
}

#[derive(Clone, Copy)]
struct StackOffsets {
    wq: usize,
    wk: usize,
    wv: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

struct Offsets {
    w_in: usize,
    b_in: usize,
    pos: usize,
    stacks: Vec<StackOffsets>,
    w_o: usize,
    b_o: usize,
}

/// Per-stack forward values needed by the backward pass.
struct StackCache<T> {
    h: Vec<T>,
    q: Vec<T>,
    k: Vec<T>,
    v: Vec<T>,
    a: Vec<T>,
    r: Vec<T>,
    z1: Vec<T>,
}

impl<T: Scalar> SelfAttentionNet<T> {
    pub fn new(seq: SeqLayout, row_width: usize, d_model: usize, d_ff: usize, n_stacks: usize, seed: u64) -> Self {
        let mut net = Self {
            seq,
            row_width,
            d_model,
            d_ff,
            n_stacks,
            params: Vec::new(),
        };
        let (o, len) = net.offsets();
        net.params = vec![T::zero(); len];
        let (c, d, f, l) = (seq.channels, d_model, d_ff, seq.steps);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = &mut net.params;
        init_uniform(&mut rng, &mut p[o.w_in..o.w_in + d * c], c, d);
        init_uniform(&mut rng, &mut p[o.pos..o.pos + l * d], d, d);
        p[o.pos..o.pos + l * d].iter_mut().for_each(|v| *v *= T::lit(0.1));
        for s in &o.stacks {
            for w in [s.wq, s.wk, s.wv] {
                init_uniform(&mut rng, &mut p[w..w + d * d], d, d);
            }
            init_uniform(&mut rng, &mut p[s.w1..s.w1 + f * d], d, f);
            init_uniform(&mut rng, &mut p[s.w2..s.w2 + d * f], f, d);
        }
        init_uniform(&mut rng, &mut p[o.w_o..o.w_o + d], d, 1);
        net
    }

    fn offsets(&self) -> (Offsets, usize) {
        let (c, d, f, l) = (self.seq.channels, self.d_model, self.d_ff, self.seq.steps);
        let mut lay = Layout::default();
        let w_in = lay.take(d * c);
        let b_in = lay.take(d);
        let pos = lay.take(l * d);
        let stacks = (0..self.n_stacks)
            .map(|_| StackOffsets {
                wq: lay.take(d * d),
                wk: lay.take(d * d),
                wv: lay.take(d * d),
                w1: lay.take(f * d),
                b1: lay.take(f),
                w2: lay.take(d * f),
                b2: lay.take(d),
            })
            .collect();
        let w_o = lay.take(d);
        let b_o = lay.take(1);
        (
            Offsets {
                w_in,
                b_in,
                pos,
                stacks,
                w_o,
                b_o,
            },
            lay.len(),
        )
    }

    fn project(&self, w: usize, h: &[T]) -> Vec<T> {
        let d = self.d_model;
        let mut out = vec![T::zero(); h.len()];
        let w = &self.params[w..w + d * d];
        for (src, dst) in h.chunks(d).zip(out.chunks_mut(d)) {
            for (o, v) in dst.iter_mut().enumerate() {
                *v = dot(&w[o * d..(o + 1) * d], src);
            }
        }
        out
    }

    fn forward(&self, x: &[T], o: &Offsets) -> (Vec<StackCache<T>>, Vec<T>) {
        let (c, d, f, l) = (self.seq.channels, self.d_model, self.d_ff, self.seq.steps);
        let p = &self.params;
        let mut h = vec![T::zero(); l * d];
        for t in 0..l {
            let out = &mut h[t * d..(t + 1) * d];
            affine(&p[o.w_in..o.w_in + d * c], &p[o.b_in..o.b_in + d], &x[t * c..(t + 1) * c], out);
            for (v, &pe) in out.iter_mut().zip(&p[o.pos + t * d..o.pos + (t + 1) * d]) {
                *v += pe;
            }
        }
        let scale = T::one() / T::count(d).sqrt();
        let mut caches = Vec::with_capacity(self.n_stacks);
        for s in &o.stacks {
            let q = self.project(s.wq, &h);
            let k = self.project(s.wk, &h);
            let v = self.project(s.wv, &h);
            let mut a = vec![T::zero(); l * l];
            for t in 0..l {
                let row = &mut a[t * l..(t + 1) * l];
                for u in 0..l {
                    row[u] = dot(&q[t * d..(t + 1) * d], &k[u * d..(u + 1) * d]) * scale;
                }
                softmax_in_place(row);
            }
            let mut r = h.clone();
            for t in 0..l {
                for u in 0..l {
                    let w = a[t * l + u];
                    for j in 0..d {
                        r[t * d + j] += w * v[u * d + j];
                    }
                }
            }
            let mut z1 = vec![T::zero(); l * f];
            let mut out = r.clone();
            let mut act = vec![T::zero(); f];
            let mut ff = vec![T::zero(); d];
            for t in 0..l {
                let zt = &mut z1[t * f..(t + 1) * f];
                affine(&p[s.w1..s.w1 + f * d], &p[s.b1..s.b1 + f], &r[t * d..(t + 1) * d], zt);
                for (a_, &z) in act.iter_mut().zip(zt.iter()) {
                    *a_ = z.max(T::zero());
                }
                affine(&p[s.w2..s.w2 + d * f], &p[s.b2..s.b2 + d], &act, &mut ff);
                for (o_, &fv) in out[t * d..(t + 1) * d].iter_mut().zip(&ff) {
                    *o_ += fv;
                }
            }
            caches.push(StackCache { h, q, k, v, a, r, z1 });
            h = out;
        }
        (caches, h)
    }

    fn pooled(&self, h: &[T]) -> Vec<T> {
        let d = self.d_model;
        let inv = T::one() / T::count(self.seq.steps);
        let mut m = vec![T::zero(); d];
        for row in h.chunks(d) {
            for (mv, &v) in m.iter_mut().zip(row) {
                *mv += v;
            }
        }
        m.iter_mut().for_each(|v| *v *= inv);
        m
    }

    /// Attention matrices (`steps x steps`, row-major) of every stack.
    pub fn attention_weights(&self, x: &[T]) -> Vec<Vec<T>> {
        let (o, _) = self.offsets();
        self.forward(x, &o).0.into_iter().map(|c| c.a).collect()
    }
}

fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let m = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut s = T::zero();
    for v in row.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    row.iter_mut().for_each(|v| *v /= s);
}

impl<T: Scalar> Network<T> for SelfAttentionNet<T> {
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
        let (o, _) = self.offsets();
        let (_, h) = self.forward(x, &o);
        let m = self.pooled(&h);
        dot(&self.params[o.w_o..o.w_o + self.d_model], &m) + self.params[o.b_o]
    }

    fn backprop(&self, x: &[T], upstream: &mut dyn FnMut(T) -> T, grad: &mut [T]) -> T {
        let (o, _) = self.offsets();
        let (c, d, f, l) = (self.seq.channels, self.d_model, self.d_ff, self.seq.steps);
        let p = &self.params;
        let (caches, h_top) = self.forward(x, &o);
        let m = self.pooled(&h_top);
        let z = dot(&p[o.w_o..o.w_o + d], &m) + p[o.b_o];
        let dz = upstream(z);
        for j in 0..d {
            grad[o.w_o + j] += dz * m[j];
        }
        grad[o.b_o] += dz;
        let inv = T::one() / T::count(l);
        let mut dh: Vec<T> = (0..l * d).map(|i| dz * p[o.w_o + i % d] * inv).collect();

        let scale = T::one() / T::count(d).sqrt();
        for (s, cache) in o.stacks.iter().zip(&caches).rev() {
            // feedforward with residual: dh is d(out)
            let mut dr = dh.clone();
            let mut act = vec![T::zero(); f];
            let mut dact = vec![T::zero(); f];
            for t in 0..l {
                let zt = &cache.z1[t * f..(t + 1) * f];
                for (a_, &zv) in act.iter_mut().zip(zt) {
                    *a_ = zv.max(T::zero());
                }
                dact.iter_mut().for_each(|v| *v = T::zero());
                let (dw2, db2) = two_mut(grad, (s.w2, d * f), (s.b2, d));
                affine_backward(
                    &p[s.w2..s.w2 + d * f],
                    &act,
                    &dh[t * d..(t + 1) * d],
                    dw2,
                    db2,
                    Some(&mut dact),
                );
                for (g, &zv) in dact.iter_mut().zip(zt) {
                    if zv <= T::zero() {
                        *g = T::zero();
                    }
                }
                let (dw1, db1) = two_mut(grad, (s.w1, f * d), (s.b1, f));
                affine_backward(
                    &p[s.w1..s.w1 + f * d],
                    &cache.r[t * d..(t + 1) * d],
                    &dact,
                    dw1,
                    db1,
                    Some(&mut dr[t * d..(t + 1) * d]),
                );
            }
            // attention with residual: r = h + A V
            let mut dh_in = dr.clone();
            let mut dq = vec![T::zero(); l * d];
            let mut dk = vec![T::zero(); l * d];
            let mut dv = vec![T::zero(); l * d];
            let mut da = vec![T::zero(); l];
            for t in 0..l {
                let dot_t = &dr[t * d..(t + 1) * d];
                let arow = &cache.a[t * l..(t + 1) * l];
                for u in 0..l {
                    da[u] = dot(dot_t, &cache.v[u * d..(u + 1) * d]);
                    for j in 0..d {
                        dv[u * d + j] += arow[u] * dot_t[j];
                    }
                }
                let mix = dot(arow, &da);
                for u in 0..l {
                    let ds = arow[u] * (da[u] - mix) * scale;
                    for j in 0..d {
                        dq[t * d + j] += ds * cache.k[u * d + j];
                        dk[u * d + j] += ds * cache.q[t * d + j];
                    }
                }
            }
            for (w, dproj) in [(s.wq, &dq), (s.wk, &dk), (s.wv, &dv)] {
                for t in 0..l {
                    let ht = &cache.h[t * d..(t + 1) * d];
                    let g = &dproj[t * d..(t + 1) * d];
                    for (a_, &gv) in g.iter().enumerate() {
                        let row = w + a_ * d;
                        for b in 0..d {
                            grad[row + b] += gv * ht[b];
                            dh_in[t * d + b] += gv * p[row + b];
                        }
                    }
                }
            }
            dh = dh_in;
        }

        for t in 0..l {
            let g = &dh[t * d..(t + 1) * d];
            for (j, &gv) in g.iter().enumerate() {
                grad[o.pos + t * d + j] += gv;
            }
            let (dw, db) = two_mut(grad, (o.w_in, d * c), (o.b_in, d));
            affine_backward(&p[o.w_in..o.w_in + d * c], &x[t * c..(t + 1) * c], g, dw, db, None);
        }
        z
    }
}

impl_scorer!(SelfAttentionNet);
