//! GRU encoder + MLP decoder with manual backpropagation.
//!
//! Input features per observed step are `[x − x_T, y − y_T, u, v]`: the
//! history is shifted so the last observed position sits at the origin.
//! The decoder emits `(μ_x, μ_y, s_x, s_y)` for each forecast step, where the
//! mean is an offset from the last observed position and the variance is
//! `softplus(s) + VARIANCE_FLOOR`.
//!
//! Parameter layout (row-major matrices, concatenated in this order):
//! `W_z U_z b_z W_r U_r b_r W_n U_n b_n W_1 b_1 W_2 b_2`.
//!
//! GRU cell:
//! ```text
//! z = σ(W_z x + U_z h + b_z)
//! r = σ(W_r x + U_r h + b_r)
//! n = tanh(W_n x + r ⊙ (U_n h) + b_n)
//! h' = (1 − z) ⊙ n + z ⊙ h
//! ```

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::types::{HistoryWindow, FORECAST_LEN, HISTORY_LEN};
use crate::{Error, Result};

pub const INPUT_DIM: usize = 4;
pub const OUTPUTS_PER_STEP: usize = 4;
pub const VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub hidden: usize,
    pub horizon: usize,
}

impl Architecture {
    pub fn new(hidden: usize) -> Self {
        Self {
            hidden,
            horizon: FORECAST_LEN,
        }
    }

    fn output_dim(&self) -> usize {
        OUTPUTS_PER_STEP * self.horizon
    }

    pub fn param_count(&self) -> usize {
        let h = self.hidden;
        3 * (h * INPUT_DIM + h * h + h) + (h * h + h) + (self.output_dim() * h + self.output_dim())
    }

    fn layout(&self) -> Layout {
        let h = self.hidden;
        let mut offset = 0;
        let mut take = |n: usize| {
            let start = offset;
            offset += n;
            start..offset
        };
        let gate = |take: &mut dyn FnMut(usize) -> std::ops::Range<usize>| Gate {
            w: take(h * INPUT_DIM),
            u: take(h * h),
            b: take(h),
        };
        let z = gate(&mut take);
        let r = gate(&mut take);
        let n = gate(&mut take);
        let w1 = take(h * h);
        let b1 = take(h);
        let w2 = take(self.output_dim() * h);
        let b2 = take(self.output_dim());
        Layout {
            z,
            r,
            n,
            w1,
            b1,
            w2,
            b2,
        }
    }

    /// Output-head bias range inside the flat parameter vector.
    pub fn head_bias_range(&self) -> std::ops::Range<usize> {
        self.layout().b2
    }

    /// Output-head weight range inside the flat parameter vector.
    pub fn head_weight_range(&self) -> std::ops::Range<usize> {
        self.layout().w2
    }
}

#[derive(Debug, Clone)]
struct Gate {
    w: std::ops::Range<usize>,
    u: std::ops::Range<usize>,
    b: std::ops::Range<usize>,
}

#[derive(Debug, Clone)]
struct Layout {
    z: Gate,
    r: Gate,
    n: Gate,
    w1: std::ops::Range<usize>,
    b1: std::ops::Range<usize>,
    w2: std::ops::Range<usize>,
    b2: std::ops::Range<usize>,
}

/// One network of the ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMember {
    pub architecture: Architecture,
    pub params: Vec<f64>,
}

/// Per-step Gaussian output of a single member, in world coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct MemberOutput {
    pub means: Vec<[f64; 2]>,
    pub variances: Vec<[f64; 2]>,
}

pub fn softplus(s: f64) -> f64 {
    if s > 30.0 {
        s
    } else {
        s.exp().ln_1p()
    }
}

fn sigmoid(s: f64) -> f64 {
    1.0 / (1.0 + (-s).exp())
}

/// Positive variance from a raw head output.
pub fn variance_transform(s: f64) -> f64 {
    softplus(s) + VARIANCE_FLOOR
}

impl EnsembleMember {
    /// PyTorch-style uniform(−1/√H, 1/√H) initialisation.
    pub fn initialize(architecture: Architecture, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (architecture.hidden as f64).sqrt();
        let params = (0..architecture.param_count())
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        Self {
            architecture,
            params,
        }
    }

    pub fn zeros(architecture: Architecture) -> Self {
        Self {
            architecture,
            params: vec![0.0; architecture.param_count()],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.len() != self.architecture.param_count() {
            return Err(Error::InvalidInput(format!(
                "member has {} parameters, architecture needs {}",
                self.params.len(),
                self.architecture.param_count()
            )));
        }
        if let Some(i) = self.params.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidInput(format!("parameter {i} is not finite")));
        }
        Ok(())
    }

    pub fn forward(&self, history: &HistoryWindow) -> Result<MemberOutput> {
        let (raw, _) = self.forward_cached(history)?;
        Ok(self.decode(&raw, history.last_position()))
    }

    fn decode(&self, raw: &[f64], origin: [f64; 2]) -> MemberOutput {
        let horizon = self.architecture.horizon;
        let mut means = Vec::with_capacity(horizon);
        let mut variances = Vec::with_capacity(horizon);
        for k in 0..horizon {
            let o = &raw[OUTPUTS_PER_STEP * k..OUTPUTS_PER_STEP * (k + 1)];
            means.push([o[0] + origin[0], o[1] + origin[1]]);
            variances.push([variance_transform(o[2]), variance_transform(o[3])]);
        }
        MemberOutput { means, variances }
    }

    /// Raw head output (4·F values, means relative to the last observation)
    /// together with the activations needed for backpropagation.
    fn forward_cached(&self, history: &HistoryWindow) -> Result<(Vec<f64>, Cache)> {
        let arch = self.architecture;
        let h_dim = arch.hidden;
        let l = arch.layout();
        let p = &self.params;
        let origin = history.last_position();

        let mut cache = Cache {
            inputs: Vec::with_capacity(HISTORY_LEN),
            hidden: vec![vec![0.0; h_dim]],
            z: Vec::with_capacity(HISTORY_LEN),
            r: Vec::with_capacity(HISTORY_LEN),
            n: Vec::with_capacity(HISTORY_LEN),
            un_h: Vec::with_capacity(HISTORY_LEN),
            dec_hidden: Vec::new(),
        };

        for obs in history.observations() {
            let x = [obs.x - origin[0], obs.y - origin[1], obs.u, obs.v];
            let h = cache.hidden.last().expect("seeded with h0");
            let mut z = affine(&p[l.z.w.clone()], &x, &p[l.z.b.clone()]);
            matvec_acc(&p[l.z.u.clone()], h, &mut z);
            z.iter_mut().for_each(|v| *v = sigmoid(*v));
            let mut r = affine(&p[l.r.w.clone()], &x, &p[l.r.b.clone()]);
            matvec_acc(&p[l.r.u.clone()], h, &mut r);
            r.iter_mut().for_each(|v| *v = sigmoid(*v));
            let mut un_h = vec![0.0; h_dim];
            matvec_acc(&p[l.n.u.clone()], h, &mut un_h);
            let mut n = affine(&p[l.n.w.clone()], &x, &p[l.n.b.clone()]);
            for i in 0..h_dim {
                n[i] = (n[i] + r[i] * un_h[i]).tanh();
            }
            let h_next: Vec<f64> = (0..h_dim)
                .map(|i| (1.0 - z[i]) * n[i] + z[i] * h[i])
                .collect();
            if !h_next.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFiniteActivation { layer: "encoder" });
            }
            cache.inputs.push(x);
            cache.z.push(z);
            cache.r.push(r);
            cache.n.push(n);
            cache.un_h.push(un_h);
            cache.hidden.push(h_next);
        }

        let h_last = cache.hidden.last().expect("non-empty");
        let mut dec = affine(&p[l.w1.clone()], h_last, &p[l.b1.clone()]);
        dec.iter_mut().for_each(|v| *v = v.tanh());
        if !dec.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteActivation { layer: "decoder" });
        }
        let out = affine(&p[l.w2.clone()], &dec, &p[l.b2.clone()]);
        if !out.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteActivation { layer: "output" });
        }
        cache.dec_hidden = dec;
        Ok((out, cache))
    }

    /// Mean NLL over `batch` and its exact gradient with respect to the
    /// parameters. Per-sample loss is the step-averaged two-axis NLL.
    pub fn nll_gradient(&self, batch: &[super::TrainingSample]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        let mut grad = vec![0.0; self.params.len()];
        let mut total = 0.0;
        let horizon = self.architecture.horizon;
        let scale = 1.0 / (batch.len() * horizon) as f64;
        for sample in batch {
            let (raw, cache) = self.forward_cached(&sample.history)?;
            let origin = sample.history.last_position();
            let mut d_out = vec![0.0; raw.len()];
            for k in 0..horizon {
                let o = &raw[OUTPUTS_PER_STEP * k..OUTPUTS_PER_STEP * (k + 1)];
                for axis in 0..2 {
                    let mu = o[axis] + origin[axis];
                    let s = o[2 + axis];
                    let var = variance_transform(s);
                    let resid = sample.future[k][axis] - mu;
                    total += nll_term(var, resid);
                    d_out[OUTPUTS_PER_STEP * k + axis] = -resid / var * scale;
                    let d_var = 0.5 / var - resid * resid / (2.0 * var * var);
                    d_out[OUTPUTS_PER_STEP * k + 2 + axis] = d_var * sigmoid(s) * scale;
                }
            }
            self.backward(&cache, &d_out, &mut grad);
        }
        if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { index });
        }
        Ok((total * scale, grad))
    }

    /// Mean NLL over `samples` without gradients.
    pub fn mean_nll(&self, samples: &[super::TrainingSample]) -> Result<f64> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("empty sample set".into()));
        }
        let mut total = 0.0;
        for sample in samples {
            let out = self.forward(&sample.history)?;
            for (k, target) in sample.future.iter().enumerate() {
                for ((v, m), t) in out.variances[k].iter().zip(&out.means[k]).zip(target) {
                    total += nll_term(*v, t - m);
                }
            }
        }
        Ok(total / (samples.len() * self.architecture.horizon) as f64)
    }

    fn backward(&self, cache: &Cache, d_out: &[f64], grad: &mut [f64]) {
        let arch = self.architecture;
        let h_dim = arch.hidden;
        let l = arch.layout();
        let p = &self.params;
        let h_last = cache.hidden.last().expect("non-empty");
        let dec = &cache.dec_hidden;

        // output head
        outer_acc(&mut grad[l.w2.clone()], d_out, dec);
        add_into(&mut grad[l.b2.clone()], d_out);
        let d_dec = matvec_t(&p[l.w2.clone()], d_out, h_dim);
        let d_pre1: Vec<f64> = (0..h_dim)
            .map(|i| d_dec[i] * (1.0 - dec[i] * dec[i]))
            .collect();
        outer_acc(&mut grad[l.w1.clone()], &d_pre1, h_last);
        add_into(&mut grad[l.b1.clone()], &d_pre1);
        let mut dh = matvec_t(&p[l.w1.clone()], &d_pre1, h_dim);

        for t in (0..cache.inputs.len()).rev() {
            let x = &cache.inputs[t];
            let h_prev = &cache.hidden[t];
            let (z, r, n, un_h) = (&cache.z[t], &cache.r[t], &cache.n[t], &cache.un_h[t]);
            let mut dh_prev: Vec<f64> = (0..h_dim).map(|i| dh[i] * z[i]).collect();
            let mut dz_pre = vec![0.0; h_dim];
            let mut dr_pre = vec![0.0; h_dim];
            let mut dn_pre = vec![0.0; h_dim];
            let mut d_un_h = vec![0.0; h_dim];
            for i in 0..h_dim {
                let dz = dh[i] * (h_prev[i] - n[i]);
                let dn = dh[i] * (1.0 - z[i]);
                dn_pre[i] = dn * (1.0 - n[i] * n[i]);
                let dr = dn_pre[i] * un_h[i];
                d_un_h[i] = dn_pre[i] * r[i];
                dz_pre[i] = dz * z[i] * (1.0 - z[i]);
                dr_pre[i] = dr * r[i] * (1.0 - r[i]);
            }
            // candidate gate
            outer_acc(&mut grad[l.n.w.clone()], &dn_pre, x);
            add_into(&mut grad[l.n.b.clone()], &dn_pre);
            outer_acc(&mut grad[l.n.u.clone()], &d_un_h, h_prev);
            add_into(&mut dh_prev, &matvec_t(&p[l.n.u.clone()], &d_un_h, h_dim));
            // update gate
            outer_acc(&mut grad[l.z.w.clone()], &dz_pre, x);
            add_into(&mut grad[l.z.b.clone()], &dz_pre);
            outer_acc(&mut grad[l.z.u.clone()], &dz_pre, h_prev);
            add_into(&mut dh_prev, &matvec_t(&p[l.z.u.clone()], &dz_pre, h_dim));
            // reset gate
            outer_acc(&mut grad[l.r.w.clone()], &dr_pre, x);
            add_into(&mut grad[l.r.b.clone()], &dr_pre);
            outer_acc(&mut grad[l.r.u.clone()], &dr_pre, h_prev);
            add_into(&mut dh_prev, &matvec_t(&p[l.r.u.clone()], &dr_pre, h_dim));
            dh = dh_prev;
        }
    }
}

/// Per-axis NLL without the additive constant.
fn nll_term(var: f64, resid: f64) -> f64 {
    0.5 * var.ln() + resid * resid / (2.0 * var)
}

struct Cache {
    inputs: Vec<[f64; INPUT_DIM]>,
    hidden: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
    n: Vec<Vec<f64>>,
    un_h: Vec<Vec<f64>>,
    dec_hidden: Vec<f64>,
}

/// W x + b with W stored row-major, rows = b.len().
fn affine(w: &[f64], x: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = b.to_vec();
    matvec_acc(w, x, &mut out);
    out
}

fn matvec_acc(w: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (row, o) in w.chunks_exact(cols).zip(out.iter_mut()) {
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// Wᵀ d, where W has `d.len()` rows and `cols` columns.
fn matvec_t(w: &[f64], d: &[f64], cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; cols];
    for (row, di) in w.chunks_exact(cols).zip(d) {
        if *di == 0.0 {
            continue;
        }
        for (o, a) in out.iter_mut().zip(row) {
            *o += a * di;
        }
    }
    out
}

/// G += d xᵀ
fn outer_acc(g: &mut [f64], d: &[f64], x: &[f64]) {
    let cols = x.len();
    for (row, di) in g.chunks_exact_mut(cols).zip(d) {
        if *di == 0.0 {
            continue;
        }
        for (gij, xj) in row.iter_mut().zip(x) {
            *gij += di * xj;
        }
    }
}

fn add_into(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}
