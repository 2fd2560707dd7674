//! Velocity network: a two-hidden-layer SiLU MLP with hand-written
//! reverse-mode gradients.
//!
//! Input row per item: the flattened `(d + 1) x l` conditioned latent, a
//! sinusoidal embedding of `t`, and a learned embedding of the class id.
//! Output row: the `d x l` velocity `w3 a2 + b3 + g x_t`, where the scalar
//! skip gain `g = wg . a2 + bg` is read off the last hidden layer. A
//! 128-wide bottleneck cannot carry the 512-dim noise from input to output
//! on its own; the gated skip lets the network express the `x_t / t`
//! part of the velocity.
//!
//! All parameters live in one flat vector. Order (and checkpoint order):
//! `w1` (`in x h1`, row-major), `b1`, `w2` (`h1 x h2`), `b2`, `w3`
//! (`h2 x out`), `b3`, class embedding table (`(classes + 1) x class_dim`,
//! the last row being the null class), `wg` (`h2`), `bg`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::sample::{Condition, VelocityField};
use super::{concat_values, Latent};
use crate::error::{Error, Result};

/// Shape of the velocity network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub channels: usize,
    pub length: usize,
    pub hidden: [usize; 2],
    pub time_dim: usize,
    pub class_dim: usize,
    pub class_count: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            channels: 8,
            length: 64,
            hidden: [128, 128],
            time_dim: 16,
            class_dim: 16,
            class_count: 4,
        }
    }
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.channels,
            self.length,
            self.hidden[0],
            self.hidden[1],
            self.time_dim,
            self.class_dim,
            self.class_count,
        ];
        if dims.contains(&0) {
            return Err(Error::InvalidConfig(format!("architecture has a zero dimension: {self:?}")));
        }
        if !self.time_dim.is_multiple_of(2) {
            return Err(Error::InvalidConfig("time embedding width must be even".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        (self.channels + 1) * self.length + self.time_dim + self.class_dim
    }

    pub fn output_dim(&self) -> usize {
        self.channels * self.length
    }

    pub fn null_class(&self) -> usize {
        self.class_count
    }

    pub fn param_count(&self) -> usize {
        self.layout().total
    }

    pub(crate) fn layout(&self) -> Layout {
        let (i, [h1, h2], o) = (self.input_dim(), self.hidden, self.output_dim());
        let w1 = 0;
        let b1 = w1 + i * h1;
        let w2 = b1 + h1;
        let b2 = w2 + h1 * h2;
        let w3 = b2 + h2;
        let b3 = w3 + h2 * o;
        let emb = b3 + o;
        let wg = emb + (self.class_count + 1) * self.class_dim;
        let bg = wg + h2;
        let total = bg + 1;
        Layout {
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
            emb,
            wg,
            bg,
            total,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Layout {
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
    pub w3: usize,
    pub b3: usize,
    pub emb: usize,
    pub wg: usize,
    pub bg: usize,
    pub total: usize,
}

/// One training example for a loss evaluation.
#[derive(Debug, Clone, Copy)]
pub struct TrainItem<'a> {
    pub x0: &'a Latent,
    pub eps: &'a Latent,
    pub t: f64,
    pub curve: Option<&'a [f64]>,
    pub class_id: Option<usize>,
}

/// Gradient of the loss, laid out exactly like [`FlowModel::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<f64>);

#[derive(Debug, Clone)]
pub struct LossOutput {
    pub loss: f64,
    pub grads: Gradients,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowModel {
    arch: Architecture,
    params: Vec<f64>,
}

struct Activations {
    batch: usize,
    x: Vec<f64>,
    z1: Vec<f64>,
    a1: Vec<f64>,
    z2: Vec<f64>,
    a2: Vec<f64>,
    y: Vec<f64>,
    classes: Vec<usize>,
}

impl FlowModel {
    /// Random initialization; weights scaled by `1/sqrt(fan_in)`.
    pub fn new(arch: Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let layout = arch.layout();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; layout.total];
        let mut fill = |range: std::ops::Range<usize>, std: f64, params: &mut Vec<f64>| {
            for p in &mut params[range] {
                let z: f64 = StandardNormal.sample(&mut rng);
                *p = z * std;
            }
        };
        let [h1, h2] = arch.hidden;
        fill(layout.w1..layout.b1, (arch.input_dim() as f64).powf(-0.5), &mut params);
        fill(layout.w2..layout.b2, (h1 as f64).powf(-0.5), &mut params);
        fill(layout.w3..layout.b3, (h2 as f64).powf(-0.5), &mut params);
        fill(layout.emb..layout.wg, 1.0, &mut params);
        Ok(Self { arch, params })
    }

    pub fn from_params(arch: Architecture, params: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if params.len() != arch.param_count() {
            return Err(Error::Shape(format!(
                "architecture needs {} parameters, got {}",
                arch.param_count(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numerical("non-finite parameter".into()));
        }
        Ok(Self { arch, params })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn class_count(&self) -> usize {
        self.arch.class_count
    }

    pub fn null_class(&self) -> usize {
        self.arch.null_class()
    }

    fn resolve_class(&self, class_id: Option<usize>) -> Result<usize> {
        match class_id {
            None => Ok(self.arch.null_class()),
            Some(c) if c < self.arch.class_count => Ok(c),
            Some(c) => Err(Error::InvalidData(format!(
                "class id {c} out of range for {} classes",
                self.arch.class_count
            ))),
        }
    }

    fn check_latent(&self, x: &Latent) -> Result<()> {
        if x.shape() != (self.arch.channels, self.arch.length) {
            return Err(Error::Shape(format!(
                "model expects {}x{} latents, got {:?}",
                self.arch.channels,
                self.arch.length,
                x.shape()
            )));
        }
        Ok(())
    }

    fn write_input_row(
        &self,
        row: &mut [f64],
        x_t: &Latent,
        t: f64,
        curve: Option<&[f64]>,
        class: usize,
    ) -> Result<()> {
        let cond = concat_values(x_t, curve)?;
        let n = cond.data().len();
        row[..n].copy_from_slice(cond.data());
        time_embedding(t, &mut row[n..n + self.arch.time_dim]);
        let e = self.arch.layout().emb + class * self.arch.class_dim;
        row[n + self.arch.time_dim..].copy_from_slice(&self.params[e..e + self.arch.class_dim]);
        Ok(())
    }

    fn forward(&self, inputs: &[(&Latent, f64, Option<&[f64]>, Option<usize>)]) -> Result<Activations> {
        let arch = &self.arch;
        let lay = arch.layout();
        let (din, [h1, h2], dout) = (arch.input_dim(), arch.hidden, arch.output_dim());
        let batch = inputs.len();
        let mut x = vec![0.0; batch * din];
        let mut classes = Vec::with_capacity(batch);
        for (b, &(x_t, t, curve, class_id)) in inputs.iter().enumerate() {
            self.check_latent(x_t)?;
            let class = self.resolve_class(class_id)?;
            self.write_input_row(&mut x[b * din..(b + 1) * din], x_t, t, curve, class)?;
            classes.push(class);
        }
        let p = &self.params;
        let z1 = affine(&x, batch, din, &p[lay.w1..lay.b1], &p[lay.b1..lay.w2], h1);
        let a1: Vec<f64> = z1.iter().map(|&z| silu(z)).collect();
        let z2 = affine(&a1, batch, h1, &p[lay.w2..lay.b2], &p[lay.b2..lay.w3], h2);
        let a2: Vec<f64> = z2.iter().map(|&z| silu(z)).collect();
        let mut y = affine(&a2, batch, h2, &p[lay.w3..lay.b3], &p[lay.b3..lay.emb], dout);
        let wg = &p[lay.wg..lay.bg];
        let gain: Vec<f64> = a2
            .chunks_exact(h2)
            .map(|a| a.iter().zip(wg).map(|(a, w)| a * w).sum::<f64>() + p[lay.bg])
            .collect();
        // x_t occupies the first d*l inputs of every row
        for b in 0..batch {
            let xt = &x[b * din..b * din + dout];
            for (v, xv) in y[b * dout..(b + 1) * dout].iter_mut().zip(xt) {
                *v += gain[b] * xv;
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("velocity network produced a non-finite value".into()));
        }
        Ok(Activations {
            batch,
            x,
            z1,
            a1,
            z2,
            a2,
            y,
            classes,
        })
    }

    /// Predicted velocity at `(x_t, t)` under `cond`.
    pub fn predict(&self, x_t: &Latent, t: f64, cond: &Condition) -> Result<Latent> {
        let acts = self.forward(&[(x_t, t, cond.curve, cond.class_id)])?;
        Latent::new(self.arch.channels, self.arch.length, acts.y)
    }

    fn targets(&self, batch: &[TrainItem]) -> Result<(Vec<Latent>, Vec<f64>)> {
        let mut xts = Vec::with_capacity(batch.len());
        let mut target = Vec::with_capacity(batch.len() * self.arch.output_dim());
        for item in batch {
            if !(0.0..=1.0).contains(&item.t) {
                return Err(Error::InvalidData(format!("t must lie in [0, 1], got {}", item.t)));
            }
            self.check_latent(item.x0)?;
            self.check_latent(item.eps)?;
            xts.push(super::interpolate_path(item.x0, item.eps, item.t)?);
            target.extend(item.eps.data().iter().zip(item.x0.data()).map(|(e, x)| e - x));
        }
        Ok((xts, target))
    }

    /// Mean over the batch of `||(eps - x0) - f(x_t)||^2`, without gradients.
    pub fn loss(&self, batch: &[TrainItem]) -> Result<f64> {
        let (xts, target) = self.targets(batch)?;
        let inputs: Vec<_> = batch
            .iter()
            .zip(&xts)
            .map(|(it, x)| (x, it.t, it.curve, it.class_id))
            .collect();
        let acts = self.forward(&inputs)?;
        Ok(squared_error(&acts.y, &target) / batch.len() as f64)
    }

    /// Batch-mean loss and its exact gradient with respect to every parameter.
    pub fn loss_and_grad(&self, batch: &[TrainItem]) -> Result<LossOutput> {
        if batch.is_empty() {
            return Err(Error::Shape("empty batch".into()));
        }
        let (xts, target) = self.targets(batch)?;
        let inputs: Vec<_> = batch
            .iter()
            .zip(&xts)
            .map(|(it, x)| (x, it.t, it.curve, it.class_id))
            .collect();
        let acts = self.forward(&inputs)?;
        let n = acts.batch;
        let loss = squared_error(&acts.y, &target) / n as f64;
        if !loss.is_finite() {
            return Err(Error::Numerical("non-finite loss".into()));
        }
        let grads = self.backward(&acts, &target);
        Ok(LossOutput { loss, grads })
    }

    fn backward(&self, acts: &Activations, target: &[f64]) -> Gradients {
        let arch = &self.arch;
        let lay = arch.layout();
        let (din, [h1, h2], dout) = (arch.input_dim(), arch.hidden, arch.output_dim());
        let n = acts.batch;
        let p = &self.params;
        let mut g = vec![0.0; lay.total];
        let scale = 2.0 / n as f64;

        let dy: Vec<f64> = acts.y.iter().zip(target).map(|(y, t)| scale * (y - t)).collect();
        // layer 3
        gemm_tn(&acts.a2, &dy, n, h2, dout, &mut g[lay.w3..lay.b3]);
        col_sum(&dy, n, dout, &mut g[lay.b3..lay.emb]);
        // skip gain
        let dgain: Vec<f64> = (0..n)
            .map(|b| {
                let xt = &acts.x[b * din..b * din + dout];
                dy[b * dout..(b + 1) * dout].iter().zip(xt).map(|(d, x)| d * x).sum()
            })
            .collect();
        for (b, &dg) in dgain.iter().enumerate() {
            for (gw, a) in g[lay.wg..lay.bg].iter_mut().zip(&acts.a2[b * h2..(b + 1) * h2]) {
                *gw += dg * a;
            }
            g[lay.bg] += dg;
        }
        let mut dz2 = gemm_nt(&dy, &p[lay.w3..lay.b3], n, dout, h2);
        let wg = &p[lay.wg..lay.bg];
        for (b, &dg) in dgain.iter().enumerate() {
            for (d, w) in dz2[b * h2..(b + 1) * h2].iter_mut().zip(wg) {
                *d += dg * w;
            }
        }
        for (d, &z) in dz2.iter_mut().zip(&acts.z2) {
            *d *= silu_grad(z);
        }
        // layer 2
        gemm_tn(&acts.a1, &dz2, n, h1, h2, &mut g[lay.w2..lay.b2]);
        col_sum(&dz2, n, h2, &mut g[lay.b2..lay.w3]);
        let mut dz1 = gemm_nt(&dz2, &p[lay.w2..lay.b2], n, h2, h1);
        for (d, &z) in dz1.iter_mut().zip(&acts.z1) {
            *d *= silu_grad(z);
        }
        // layer 1
        gemm_tn(&acts.x, &dz1, n, din, h1, &mut g[lay.w1..lay.b1]);
        col_sum(&dz1, n, h1, &mut g[lay.b1..lay.w2]);
        // class embeddings are the last `class_dim` inputs
        let cd = arch.class_dim;
        let emb_rows = &p[lay.w1 + (din - cd) * h1..lay.b1];
        let dx_emb = gemm_nt(&dz1, emb_rows, n, h1, cd);
        for (b, &class) in acts.classes.iter().enumerate() {
            let dst = lay.emb + class * cd;
            for k in 0..cd {
                g[dst + k] += dx_emb[b * cd + k];
            }
        }
        Gradients(g)
    }
}

impl VelocityField for FlowModel {
    fn shape(&self) -> (usize, usize) {
        (self.arch.channels, self.arch.length)
    }

    fn velocity(&self, x_t: &Latent, t: f64, cond: &Condition) -> Result<Latent> {
        self.predict(x_t, t, cond)
    }
}

/// Squared-error flow-matching loss of a single example and its gradient.
pub fn flow_loss(
    model: &FlowModel,
    x0: &Latent,
    eps: &Latent,
    t: f64,
    curve: Option<&[f64]>,
    class_id: Option<usize>,
) -> Result<LossOutput> {
    model.loss_and_grad(&[TrainItem {
        x0,
        eps,
        t,
        curve,
        class_id,
    }])
}

/// `[cos(1000 t w_k), sin(1000 t w_k)]` with `w_k = 10000^(-k / half)`.
fn time_embedding(t: f64, out: &mut [f64]) {
    let half = out.len() / 2;
    for k in 0..half {
        let freq = (-(10000f64.ln()) * k as f64 / half as f64).exp();
        let arg = 1000.0 * t * freq;
        out[k] = arg.cos();
        out[half + k] = arg.sin();
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

#[inline]
fn silu_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

fn squared_error(y: &[f64], target: &[f64]) -> f64 {
    y.iter().zip(target).map(|(a, b)| (b - a) * (b - a)).sum()
}

/// `x (n x k) * w (k x m) + bias`, all row-major.
fn affine(x: &[f64], n: usize, k: usize, w: &[f64], bias: &[f64], m: usize) -> Vec<f64> {
    let mut out: Vec<f64> = (0..n).flat_map(|_| bias.iter().copied()).collect();
    // SAFETY: slice lengths match the declared shapes and strides.
    unsafe {
        matrixmultiply::dgemm(
            n, k, m, 1.0,
            x.as_ptr(), k as isize, 1,
            w.as_ptr(), m as isize, 1,
            1.0,
            out.as_mut_ptr(), m as isize, 1,
        );
    }
    out
}

/// `out (k x m) = a^T * b` for row-major `a (n x k)` and `b (n x m)`.
fn gemm_tn(a: &[f64], b: &[f64], n: usize, k: usize, m: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), n * k);
    debug_assert_eq!(b.len(), n * m);
    debug_assert_eq!(out.len(), k * m);
    // SAFETY: as above; `a` is read transposed through its strides.
    unsafe {
        matrixmultiply::dgemm(
            k, n, m, 1.0,
            a.as_ptr(), 1, k as isize,
            b.as_ptr(), m as isize, 1,
            0.0,
            out.as_mut_ptr(), m as isize, 1,
        );
    }
}

/// `a (n x m) * w^T` for row-major `w (k x m)`; result is `n x k`.
fn gemm_nt(a: &[f64], w: &[f64], n: usize, m: usize, k: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), n * m);
    debug_assert_eq!(w.len(), k * m);
    let mut out = vec![0.0; n * k];
    // SAFETY: as above; `w` is read transposed through its strides.
    unsafe {
        matrixmultiply::dgemm(
            n, m, k, 1.0,
            a.as_ptr(), m as isize, 1,
            w.as_ptr(), 1, m as isize,
            0.0,
            out.as_mut_ptr(), k as isize, 1,
        );
    }
    out
}

fn col_sum(a: &[f64], n: usize, m: usize, out: &mut [f64]) {
    for row in a.chunks_exact(m).take(n) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
}
