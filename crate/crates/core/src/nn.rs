//! Minimal dense networks over flat `f64` parameter vectors with
//! hand-written backpropagation, plus Adam and gradient-norm clipping.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x < 0.0 {
                    0.0
                } else {
                    x
                }
            }
            Activation::Identity => x,
        }
    }

    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// A stack of fully connected layers living at `offset` inside a larger
/// flat parameter vector. Each layer stores its weights row-major
/// (`out x in`) followed by its bias.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    hidden: Activation,
    output: Activation,
    offset: usize,
}

/// Per-sample activations kept for the backward pass.
#[derive(Clone, Debug, Default)]
pub struct MlpCache {
    /// `acts[0]` is the input, `acts[l + 1]` the post-activation of layer `l`.
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map_or(&[], |v| v.as_slice())
    }
}

impl Mlp {
    pub fn new(sizes: Vec<usize>, hidden: Activation, output: Activation, offset: usize) -> Self {
        assert!(sizes.len() >= 2, "an mlp needs at least one layer");
        Self {
            sizes,
            hidden,
            output,
            offset,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn n_params(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn end(&self) -> usize {
        self.offset + self.n_params()
    }

    fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.n_layers() {
            self.output
        } else {
            self.hidden
        }
    }

    /// Fills this network's slice of `params`. Weights are uniform with
    /// variance `gain^2 / fan_in`; the final layer uses `final_gain`.
    pub fn init<R: Rng + ?Sized>(&self, params: &mut [f64], gain: f64, final_gain: f64, rng: &mut R) {
        let mut off = self.offset;
        for l in 0..self.n_layers() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let g = if l + 1 == self.n_layers() { final_gain } else { gain };
            let a = g * (3.0 / fan_in as f64).sqrt();
            for w in &mut params[off..off + fan_in * fan_out] {
                *w = if a > 0.0 { rng.gen_range(-a..a) } else { 0.0 };
            }
            off += fan_in * fan_out;
            params[off..off + fan_out].fill(0.0);
            off += fan_out;
        }
    }

    pub fn forward<'c>(&self, params: &[f64], input: &[f64], cache: &'c mut MlpCache) -> &'c [f64] {
        debug_assert_eq!(input.len(), self.input_dim());
        let n = self.n_layers();
        cache.acts.resize_with(n + 1, Vec::new);
        cache.pre.resize_with(n, Vec::new);
        cache.acts[0].clear();
        cache.acts[0].extend_from_slice(input);
        let mut off = self.offset;
        for l in 0..n {
            let (fi, fo) = (self.sizes[l], self.sizes[l + 1]);
            let w = &params[off..off + fi * fo];
            let b = &params[off + fi * fo..off + fi * fo + fo];
            off += fi * fo + fo;
            let act = self.activation(l);
            let (head, tail) = cache.acts.split_at_mut(l + 1);
            let x = &head[l];
            let pre = &mut cache.pre[l];
            pre.clear();
            let out = &mut tail[0];
            out.clear();
            for o in 0..fo {
                let row = &w[o * fi..(o + 1) * fi];
                let z = b[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                pre.push(z);
                out.push(act.apply(z));
            }
        }
        cache.output()
    }

    /// Accumulates `d loss / d params` into `grads` (full-length vector) and
    /// optionally writes `d loss / d input` into `grad_input`.
    pub fn backward(
        &self,
        params: &[f64],
        cache: &MlpCache,
        grad_output: &[f64],
        grads: &mut [f64],
        grad_input: Option<&mut [f64]>,
    ) {
        let n = self.n_layers();
        let mut offsets = Vec::with_capacity(n);
        let mut off = self.offset;
        for l in 0..n {
            offsets.push(off);
            off += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        let mut delta: Vec<f64> = grad_output.to_vec();
        for l in (0..n).rev() {
            let (fi, fo) = (self.sizes[l], self.sizes[l + 1]);
            let act = self.activation(l);
            for (d, &z) in delta.iter_mut().zip(&cache.pre[l]) {
                *d *= act.derivative(z);
            }
            let off = offsets[l];
            let x = &cache.acts[l];
            {
                let (gw, gb) = grads[off..off + fi * fo + fo].split_at_mut(fi * fo);
                for o in 0..fo {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    for (g, xi) in gw[o * fi..(o + 1) * fi].iter_mut().zip(x) {
                        *g += d * xi;
                    }
                }
            }
            if l == 0 && grad_input.is_none() {
                break;
            }
            let w = &params[off..off + fi * fo];
            let mut next = vec![0.0; fi];
            for o in 0..fo {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                for (nx, wi) in next.iter_mut().zip(&w[o * fi..(o + 1) * fi]) {
                    *nx += d * wi;
                }
            }
            delta = next;
        }
        if let Some(gi) = grad_input {
            for (g, d) in gi.iter_mut().zip(&delta) {
                *g += d;
            }
        }
    }
}

/// Adam with bias correction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64, eps: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Rescales `grads` so its L2 norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_grad_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / (norm + 1e-6);
        grads.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

/// Stable hash of a parameter vector's bit patterns.
pub fn params_hash(params: &[f64]) -> u64 {
    // FNV-1a over the raw bits.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for p in params {
        for b in p.to_bits().to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn loss(mlp: &Mlp, p: &[f64], x: &[f64], target: &[f64]) -> f64 {
        let mut c = MlpCache::default();
        let y = mlp.forward(p, x, &mut c);
        y.iter().zip(target).map(|(a, b)| 0.5 * (a - b).powi(2)).sum()
    }

    #[test]
    fn backward_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mlp = Mlp::new(vec![4, 6, 5, 3], Activation::Relu, Activation::Identity, 2);
        let mut p = vec![0.0; mlp.end() + 1];
        mlp.init(&mut p, 1.0, 1.0, &mut rng);
        for b in p.iter_mut() {
            *b += rng.gen_range(-0.1..0.1);
        }
        let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let target = [0.3, -0.2, 0.9];
        let mut c = MlpCache::default();
        let y = mlp.forward(&p, &x, &mut c).to_vec();
        let gy: Vec<f64> = y.iter().zip(&target).map(|(a, b)| a - b).collect();
        let mut g = vec![0.0; p.len()];
        let mut gx = vec![0.0; 4];
        mlp.backward(&p, &c, &gy, &mut g, Some(&mut gx));
        assert_eq!(g[0], 0.0);
        assert_eq!(*g.last().unwrap(), 0.0);
        let eps = 1e-6;
        for i in mlp.offset()..mlp.end() {
            let mut pp = p.clone();
            pp[i] += eps;
            let up = loss(&mlp, &pp, &x, &target);
            pp[i] -= 2.0 * eps;
            let dn = loss(&mlp, &pp, &x, &target);
            let fd = (up - dn) / (2.0 * eps);
            assert!(
                (fd - g[i]).abs() < 1e-6 * (1.0 + fd.abs()),
                "param {i}: {fd} vs {}",
                g[i]
            );
        }
        for i in 0..4 {
            let mut xx = x.clone();
            xx[i] += eps;
            let up = loss(&mlp, &p, &xx, &target);
            xx[i] -= 2.0 * eps;
            let dn = loss(&mlp, &p, &xx, &target);
            let fd = (up - dn) / (2.0 * eps);
            assert!((fd - gx[i]).abs() < 1e-6 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn clip_scales_to_max_norm() {
        let mut g = vec![3.0, 4.0];
        let n = clip_grad_norm(&mut g, 0.5);
        assert_eq!(n, 5.0);
        let after = (g[0] * g[0] + g[1] * g[1]).sqrt();
        assert!((after - 0.5).abs() < 1e-6);
    }

    #[test]
    fn adam_with_zero_lr_is_identity() {
        let mut p = vec![1.0, -2.0];
        let mut a = Adam::new(2, 0.0, 1e-5);
        a.step(&mut p, &[0.5, 0.5]);
        assert_eq!(p, vec![1.0, -2.0]);
    }

    #[test]
    fn softmax_of_zero_logits_is_uniform() {
        let p = softmax(&[0.0; 7]);
        for x in p {
            assert!((x - 1.0 / 7.0).abs() < 1e-15);
        }
        let lp = log_softmax(&[1.0, 2.0, 3.0]);
        let s: f64 = lp.iter().map(|l| l.exp()).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}
