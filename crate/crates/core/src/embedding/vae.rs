use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::encoder_input;
use crate::design_space::{AttributeKind, AttributeSchema, RowScope, SerializedGenome};
use crate::scalar::{squared_distance, Scalar};
use crate::seed::{stream, Rng};

/// Samples per parallel gradient shard. Shards are summed in index order so
/// the result does not depend on the thread count.
const SHARD: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VaeConfig {
    #[serde(default = "d_latent")]
    pub latent_dim: usize,
    #[serde(default = "d_hidden")]
    pub hidden_width: usize,
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    #[serde(default = "d_lr")]
    pub learning_rate: f64,
    #[serde(default)]
    pub momentum: f64,
    #[serde(default = "d_beta_min")]
    pub beta_min: f64,
    #[serde(default = "d_beta_max")]
    pub beta_max: f64,
    #[serde(default)]
    pub seed: u64,
}

fn d_latent() -> usize {
    32
}
fn d_hidden() -> usize {
    64
}
fn d_epochs() -> usize {
    20
}
fn d_batch() -> usize {
    128
}
fn d_lr() -> f64 {
    0.02
}
fn d_beta_min() -> f64 {
    1e-5
}
fn d_beta_max() -> f64 {
    1e-2
}

impl Default for VaeConfig {
    fn default() -> Self {
        Self {
            latent_dim: d_latent(),
            hidden_width: d_hidden(),
            epochs: d_epochs(),
            batch_size: d_batch(),
            learning_rate: d_lr(),
            momentum: 0.0,
            beta_min: d_beta_min(),
            beta_max: d_beta_max(),
            seed: 0,
        }
    }
}

impl VaeConfig {
    pub fn validate(&self, columns: usize) -> Vec<String> {
        let mut v = Vec::new();
        if self.latent_dim == 0 || self.latent_dim >= columns {
            v.push(format!(
                "vae.latent_dim must be in 1..{columns}, got {}",
                self.latent_dim
            ));
        }
        if self.hidden_width == 0 {
            v.push("vae.hidden_width must be positive".into());
        }
        if self.epochs == 0 {
            v.push("vae.epochs must be positive".into());
        }
        if self.batch_size == 0 {
            v.push("vae.batch_size must be positive".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            v.push("vae.learning_rate must be finite and non-negative".into());
        }
        if !(0.0..1.0).contains(&self.momentum) {
            v.push("vae.momentum must be in [0, 1)".into());
        }
        if !(self.beta_min > 0.0 && self.beta_min <= self.beta_max && self.beta_max.is_finite()) {
            v.push("vae requires 0 < beta_min <= beta_max".into());
        }
        v
    }
}

/// KL weight at `epoch`: geometric interpolation from `beta_max` at epoch 0
/// down to `beta_min` at the last epoch.
pub fn beta_schedule(epoch: usize, config: &VaeConfig) -> f64 {
    let last = config.epochs.saturating_sub(1);
    if epoch == 0 || last == 0 {
        return config.beta_max;
    }
    if epoch >= last {
        return config.beta_min;
    }
    let frac = epoch as f64 / last as f64;
    config.beta_max * (config.beta_min / config.beta_max).powf(frac)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VaeError {
    #[error("dataset has {len} designs, fewer than the batch size {batch}")]
    DatasetTooSmall { len: usize, batch: usize },
    #[error("loss became non-finite in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("input has shape {rows}x{cols}, model expects {want_rows}x{want_cols}")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        want_rows: usize,
        want_cols: usize,
    },
    #[error("empty batch")]
    EmptyBatch,
}

/// One decoder output block: a continuous value, or `cardinality` logits.
#[derive(Debug, Clone, Copy, PartialEq)]
struct OutputSlot {
    row: usize,
    col: usize,
    offset: usize,
    cardinality: Option<usize>,
}

/// Decoder output layout. Each row only gets outputs for the attributes its
/// row type can carry.
#[derive(Debug, Clone, PartialEq)]
struct OutputLayout {
    slots: Vec<OutputSlot>,
    width: usize,
}

impl OutputLayout {
    fn new(schema: &AttributeSchema, rows: usize) -> Self {
        let mut slots = Vec::new();
        let mut offset = 0;
        for row in 0..rows {
            let scope = if row == 0 {
                RowScope::Head
            } else {
                RowScope::Limb
            };
            for (col, a) in schema.attributes().iter().enumerate() {
                if a.scope != scope {
                    continue;
                }
                let cardinality = match a.kind {
                    AttributeKind::Continuous { .. } => None,
                    AttributeKind::Categorical { cardinality } => Some(cardinality),
                };
                slots.push(OutputSlot {
                    row,
                    col,
                    offset,
                    cardinality,
                });
                offset += cardinality.unwrap_or(1);
            }
        }
        Self {
            slots,
            width: offset,
        }
    }
}

/// Reconstruction targets of one row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RowTargets<F> {
    /// `(output offset, target value)` for each masked continuous cell.
    pub continuous: Vec<(usize, F)>,
    /// `(output offset, cardinality, target class)` for each masked categorical cell.
    pub categorical: Vec<(usize, usize, usize)>,
}

/// A serialized genome prepared for the network: encoder input plus the
/// masked reconstruction targets of every row.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared<F> {
    pub input: Vec<F>,
    pub rows: Vec<RowTargets<F>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub continuous: f64,
    pub categorical: f64,
    pub recon: f64,
    pub kl: f64,
    pub total: f64,
    /// Row terms skipped because their mask sum was zero.
    pub empty_terms: usize,
}

/// Masked reconstruction loss of one sample given decoder outputs: per row,
/// mean squared error over masked continuous cells plus mean cross-entropy
/// over masked categorical cells, summed over rows. Also accumulates
/// `d loss / d output` scaled by `scale` into `grad` when given.
pub fn masked_recon_loss<F: Scalar>(
    output: &[F],
    rows: &[RowTargets<F>],
    mut grad: Option<(&mut [F], F)>,
) -> (F, F, usize) {
    let mut cont_total = F::zero();
    let mut cat_total = F::zero();
    let mut empty = 0;
    let two = F::of(2.0);
    for row in rows {
        if row.continuous.is_empty() {
            empty += 1;
        } else {
            let n = F::of_usize(row.continuous.len());
            let mut sum = F::zero();
            for &(o, y) in &row.continuous {
                let d = output[o] - y;
                sum = sum + d * d;
                if let Some((g, scale)) = grad.as_mut() {
                    g[o] = g[o] + *scale * two * d / n;
                }
            }
            cont_total = cont_total + sum / n;
        }
        if row.categorical.is_empty() {
            empty += 1;
        } else {
            let n = F::of_usize(row.categorical.len());
            let mut sum = F::zero();
            for &(o, card, class) in &row.categorical {
                let logits = &output[o..o + card];
                let m = logits.iter().fold(F::neg_infinity(), |a, &b| a.max(b));
                let z: F = logits.iter().map(|&l| (l - m).exp()).sum();
                let log_z = m + z.ln();
                sum = sum + (log_z - logits[class]);
                if let Some((g, scale)) = grad.as_mut() {
                    for k in 0..card {
                        let p = (logits[k] - log_z).exp();
                        let t = if k == class { F::one() } else { F::zero() };
                        g[o + k] = g[o + k] + *scale * (p - t) / n;
                    }
                }
            }
            cat_total = cat_total + sum / n;
        }
    }
    (cont_total, cat_total, empty)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VaeDims {
    pub input: usize,
    pub hidden: usize,
    pub latent: usize,
    pub output: usize,
}

#[derive(Debug, Clone, Copy)]
struct Offsets {
    w1: usize,
    b1: usize,
    wm: usize,
    bm: usize,
    wv: usize,
    bv: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
    end: usize,
}

impl VaeDims {
    fn offsets(&self) -> Offsets {
        let (i, h, l, o) = (self.input, self.hidden, self.latent, self.output);
        let w1 = 0;
        let b1 = w1 + h * i;
        let wm = b1 + h;
        let bm = wm + l * h;
        let wv = bm + l;
        let bv = wv + l * h;
        let w2 = bv + l;
        let b2 = w2 + h * l;
        let w3 = b2 + h;
        let b3 = w3 + o * h;
        Offsets {
            w1,
            b1,
            wm,
            bm,
            wv,
            bv,
            w2,
            b2,
            w3,
            b3,
            end: b3 + o,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.offsets().end
    }
}

/// Flat parameter vector of the encoder (input → tanh hidden → mean and
/// log-variance) and decoder (latent → tanh hidden → outputs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct VaeParams<F> {
    pub dims: VaeDims,
    pub data: Vec<F>,
}

struct Forward<F> {
    h1: Vec<F>,
    mu: Vec<F>,
    logvar: Vec<F>,
    z: Vec<F>,
    h2: Vec<F>,
    out: Vec<F>,
}

#[inline]
fn affine<F: Scalar>(w: &[F], b: &[F], x: &[F], out: &mut Vec<F>) {
    out.clear();
    let n_in = x.len();
    for (r, &bias) in b.iter().enumerate() {
        let row = &w[r * n_in..(r + 1) * n_in];
        let mut acc = bias;
        for (&wi, &xi) in row.iter().zip(x) {
            acc = acc + wi * xi;
        }
        out.push(acc);
    }
}

impl<F: Scalar> VaeParams<F> {
    pub fn init(dims: VaeDims, rng: &mut Rng) -> Self {
        let off = dims.offsets();
        let mut data = vec![F::zero(); off.end];
        let mut fill = |start: usize, fan_out: usize, fan_in: usize, scale: f64| {
            let a = scale * (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in &mut data[start..start + fan_out * fan_in] {
                *w = F::of(rng.random_range(-a..a));
            }
        };
        fill(off.w1, dims.hidden, dims.input, 1.0);
        fill(off.wm, dims.latent, dims.hidden, 1.0);
        fill(off.wv, dims.latent, dims.hidden, 0.1);
        fill(off.w2, dims.hidden, dims.latent, 1.0);
        fill(off.w3, dims.output, dims.hidden, 1.0);
        Self { dims, data }
    }

    fn forward(&self, x: &[F], eps: Option<&[F]>) -> Forward<F> {
        let d = self.dims;
        let o = d.offsets();
        let p = &self.data;
        let mut h1 = Vec::with_capacity(d.hidden);
        affine(&p[o.w1..o.b1], &p[o.b1..o.wm], x, &mut h1);
        h1.iter_mut().for_each(|v| *v = v.tanh());
        let mut mu = Vec::with_capacity(d.latent);
        affine(&p[o.wm..o.bm], &p[o.bm..o.wv], &h1, &mut mu);
        let mut logvar = Vec::with_capacity(d.latent);
        affine(&p[o.wv..o.bv], &p[o.bv..o.w2], &h1, &mut logvar);
        let z: Vec<F> = match eps {
            Some(e) => mu
                .iter()
                .zip(&logvar)
                .zip(e)
                .map(|((&m, &lv), &e)| m + (lv * F::of(0.5)).exp() * e)
                .collect(),
            None => mu.clone(),
        };
        let mut h2 = Vec::with_capacity(d.hidden);
        affine(&p[o.w2..o.b2], &p[o.b2..o.w3], &z, &mut h2);
        h2.iter_mut().for_each(|v| *v = v.tanh());
        let mut out = Vec::with_capacity(d.output);
        affine(&p[o.w3..o.b3], &p[o.b3..o.end], &h2, &mut out);
        Forward {
            h1,
            mu,
            logvar,
            z,
            h2,
            out,
        }
    }

    /// Posterior mean of the latent code.
    pub fn encode_input(&self, x: &[F]) -> Vec<F> {
        let d = self.dims;
        let o = d.offsets();
        let p = &self.data;
        let mut h1 = Vec::with_capacity(d.hidden);
        affine(&p[o.w1..o.b1], &p[o.b1..o.wm], x, &mut h1);
        h1.iter_mut().for_each(|v| *v = v.tanh());
        let mut mu = Vec::with_capacity(d.latent);
        affine(&p[o.wm..o.bm], &p[o.bm..o.wv], &h1, &mut mu);
        mu
    }

    /// Decoder outputs for the posterior mean (no sampling).
    pub fn reconstruct_input(&self, x: &[F]) -> Vec<F> {
        self.forward(x, None).out
    }

    fn sample_terms(&self, s: &Prepared<F>, eps: Option<&[F]>) -> (F, F, F, usize) {
        let f = self.forward(&s.input, eps);
        let (c, k, empty) = masked_recon_loss(&f.out, &s.rows, None);
        (c, k, kl(&f.mu, &f.logvar), empty)
    }

    /// Loss of one sample and its gradient accumulated (scaled) into `grad`.
    fn backward(&self, s: &Prepared<F>, eps: &[F], beta: F, scale: F, grad: &mut [F]) -> (F, F, F) {
        let d = self.dims;
        let o = d.offsets();
        let p = &self.data;
        let f = self.forward(&s.input, Some(eps));
        let mut dout = vec![F::zero(); d.output];
        let (c, k, _) = masked_recon_loss(&f.out, &s.rows, Some((&mut dout, scale)));
        let kl_value = kl(&f.mu, &f.logvar);

        // output layer
        let mut dh2 = vec![F::zero(); d.hidden];
        for (r, &g) in dout.iter().enumerate() {
            if g == F::zero() {
                continue;
            }
            grad[o.b3 + r] = grad[o.b3 + r] + g;
            let w_row = o.w3 + r * d.hidden;
            for j in 0..d.hidden {
                grad[w_row + j] = grad[w_row + j] + g * f.h2[j];
                dh2[j] = dh2[j] + g * p[w_row + j];
            }
        }
        let da2: Vec<F> = dh2
            .iter()
            .zip(&f.h2)
            .map(|(&g, &h)| g * (F::one() - h * h))
            .collect();
        let mut dz = vec![F::zero(); d.latent];
        for (r, &g) in da2.iter().enumerate() {
            grad[o.b2 + r] = grad[o.b2 + r] + g;
            let w_row = o.w2 + r * d.latent;
            for j in 0..d.latent {
                grad[w_row + j] = grad[w_row + j] + g * f.z[j];
                dz[j] = dz[j] + g * p[w_row + j];
            }
        }
        // reparameterization and KL
        let half = F::of(0.5);
        let bs = beta * scale;
        let mut dh1 = vec![F::zero(); d.hidden];
        for l in 0..d.latent {
            let sd = (f.logvar[l] * half).exp();
            let dmu = dz[l] + bs * f.mu[l];
            let dlv = dz[l] * eps[l] * half * sd + bs * half * (sd * sd - F::one());
            grad[o.bm + l] = grad[o.bm + l] + dmu;
            grad[o.bv + l] = grad[o.bv + l] + dlv;
            let m_row = o.wm + l * d.hidden;
            let v_row = o.wv + l * d.hidden;
            for j in 0..d.hidden {
                grad[m_row + j] = grad[m_row + j] + dmu * f.h1[j];
                grad[v_row + j] = grad[v_row + j] + dlv * f.h1[j];
                dh1[j] = dh1[j] + dmu * p[m_row + j] + dlv * p[v_row + j];
            }
        }
        for j in 0..d.hidden {
            let g = dh1[j] * (F::one() - f.h1[j] * f.h1[j]);
            grad[o.b1 + j] = grad[o.b1 + j] + g;
            let w_row = o.w1 + j * d.input;
            for (i, &x) in s.input.iter().enumerate() {
                if x != F::zero() {
                    grad[w_row + i] = grad[w_row + i] + g * x;
                }
            }
        }
        (c, k, kl_value)
    }

    /// Mean over the batch of `recon + beta · KL` with fixed reparameterization
    /// noise `eps` (`batch.len() × latent`, row-major), and its gradient.
    pub fn loss_and_gradient(
        &self,
        batch: &[&Prepared<F>],
        eps: &[F],
        beta: F,
    ) -> (LossBreakdown, Vec<F>) {
        let n = batch.len();
        let h = self.dims.latent;
        let scale = F::one() / F::of_usize(n);
        let shards: Vec<(Vec<F>, F, F, F)> = batch
            .par_chunks(SHARD)
            .enumerate()
            .map(|(ci, chunk)| {
                let mut g = vec![F::zero(); self.data.len()];
                let (mut c, mut k, mut kl) = (F::zero(), F::zero(), F::zero());
                for (j, s) in chunk.iter().enumerate() {
                    let idx = ci * SHARD + j;
                    let (sc, sk, skl) =
                        self.backward(s, &eps[idx * h..(idx + 1) * h], beta, scale, &mut g);
                    c = c + sc;
                    k = k + sk;
                    kl = kl + skl;
                }
                (g, c, k, kl)
            })
            .collect();
        let mut grad = vec![F::zero(); self.data.len()];
        let (mut c, mut k, mut kl) = (F::zero(), F::zero(), F::zero());
        for (g, sc, sk, skl) in shards {
            for (a, b) in grad.iter_mut().zip(g) {
                *a = *a + b;
            }
            c = c + sc;
            k = k + sk;
            kl = kl + skl;
        }
        let breakdown = breakdown(c * scale, k * scale, kl * scale, beta, 0);
        (breakdown, grad)
    }

    /// Loss with fixed noise, no gradient. Used by the finite-difference check.
    pub fn loss_with_noise(&self, batch: &[&Prepared<F>], eps: &[F], beta: F) -> F {
        let h = self.dims.latent;
        let n = F::of_usize(batch.len());
        let mut total = F::zero();
        for (i, s) in batch.iter().enumerate() {
            let (c, k, kl, _) = self.sample_terms(s, Some(&eps[i * h..(i + 1) * h]));
            total = total + c + k + beta * kl;
        }
        total / n
    }

    /// Deterministic loss (z = posterior mean) averaged over `batch`.
    pub fn evaluate(&self, batch: &[Prepared<F>], beta: F) -> Result<LossBreakdown, VaeError> {
        if batch.is_empty() {
            return Err(VaeError::EmptyBatch);
        }
        let parts: Vec<(F, F, F, usize)> = batch
            .par_iter()
            .map(|s| self.sample_terms(s, None))
            .collect();
        let n = F::of_usize(batch.len());
        let (mut c, mut k, mut kl, mut empty) = (F::zero(), F::zero(), F::zero(), 0);
        for (sc, sk, skl, e) in parts {
            c = c + sc;
            k = k + sk;
            kl = kl + skl;
            empty += e;
        }
        Ok(breakdown(c / n, k / n, kl / n, beta, empty))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

fn breakdown<F: Scalar>(c: F, k: F, kl: F, beta: F, empty_terms: usize) -> LossBreakdown {
    let recon = c + k;
    LossBreakdown {
        continuous: c.to_f64_lossy(),
        categorical: k.to_f64_lossy(),
        recon: recon.to_f64_lossy(),
        kl: kl.to_f64_lossy(),
        total: (recon + beta * kl).to_f64_lossy(),
        empty_terms,
    }
}

/// KL divergence of N(mu, exp(logvar)) from the standard normal.
pub fn kl<F: Scalar>(mu: &[F], logvar: &[F]) -> F {
    let half = F::of(0.5);
    mu.iter()
        .zip(logvar)
        .map(|(&m, &lv)| half * (m * m + lv.exp() - F::one() - lv))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub beta: f64,
    pub recon: f64,
    pub kl: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    /// Loss of the initial parameters, evaluated with the epoch-0 weight.
    pub initial: Option<EpochRecord>,
    pub epochs: Vec<EpochRecord>,
}

/// A trained embedding: the network plus the matrix layout it reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct VaeModel<F> {
    pub format_version: u32,
    pub config: VaeConfig,
    pub schema: AttributeSchema,
    pub rows: usize,
    pub params: VaeParams<F>,
    pub history: TrainingHistory,
}

pub const CHECKPOINT_VERSION: u32 = 1;

impl<F: Scalar> VaeModel<F> {
    /// An untrained model with seeded initial weights.
    pub fn untrained(schema: &AttributeSchema, rows: usize, config: &VaeConfig) -> Self {
        let layout = OutputLayout::new(schema, rows);
        let dims = VaeDims {
            input: rows * schema.total_columns() + rows,
            hidden: config.hidden_width,
            latent: config.latent_dim,
            output: layout.width,
        };
        let mut rng = stream(config.seed, "vae-init", 0);
        Self {
            format_version: CHECKPOINT_VERSION,
            config: config.clone(),
            schema: schema.clone(),
            rows,
            params: VaeParams::init(dims, &mut rng),
            history: TrainingHistory::default(),
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.params.dims.latent
    }

    fn check_shape(&self, s: &SerializedGenome) -> Result<(), VaeError> {
        if s.rows != self.rows || s.cols != self.schema.total_columns() {
            return Err(VaeError::ShapeMismatch {
                rows: s.rows,
                cols: s.cols,
                want_rows: self.rows,
                want_cols: self.schema.total_columns(),
            });
        }
        Ok(())
    }

    pub fn prepare(&self, s: &SerializedGenome) -> Result<Prepared<F>, VaeError> {
        self.check_shape(s)?;
        let layout = OutputLayout::new(&self.schema, self.rows);
        Ok(prepare_with(&layout, &self.schema, s))
    }

    pub fn prepare_all(&self, data: &[SerializedGenome]) -> Result<Vec<Prepared<F>>, VaeError> {
        let layout = OutputLayout::new(&self.schema, self.rows);
        data.iter()
            .map(|s| {
                self.check_shape(s)?;
                Ok(prepare_with(&layout, &self.schema, s))
            })
            .collect()
    }

    /// Posterior mean code. Unmasked (padding) cells never reach the encoder.
    pub fn encode(&self, s: &SerializedGenome) -> Result<Vec<F>, VaeError> {
        self.check_shape(s)?;
        Ok(self.params.encode_input(&encoder_input(s, &self.schema)))
    }

    /// Deterministic masked reconstruction loss (and KL) over a batch.
    pub fn recon_loss(&self, batch: &[SerializedGenome]) -> Result<LossBreakdown, VaeError> {
        let prepared = self.prepare_all(batch)?;
        self.params.evaluate(&prepared, F::zero())
    }

    /// Train on `dataset` with minibatch gradient descent.
    pub fn train(&mut self, dataset: &[SerializedGenome]) -> Result<(), VaeError> {
        let cfg = self.config.clone();
        if dataset.len() < cfg.batch_size {
            return Err(VaeError::DatasetTooSmall {
                len: dataset.len(),
                batch: cfg.batch_size,
            });
        }
        let prepared = self.prepare_all(dataset)?;
        let mut rng = stream(cfg.seed, "vae-train", 0);
        let lr = F::of(cfg.learning_rate);
        let momentum = F::of(cfg.momentum);
        let mut velocity = vec![F::zero(); self.params.data.len()];
        let mut order: Vec<usize> = (0..prepared.len()).collect();
        let h = self.params.dims.latent;

        let b0 = beta_schedule(0, &cfg);
        let init = self.params.evaluate(&prepared, F::of(b0))?;
        self.history.initial = Some(EpochRecord {
            epoch: 0,
            beta: b0,
            recon: init.recon,
            kl: init.kl,
            total: init.total,
        });
        self.history.epochs.clear();

        for epoch in 0..cfg.epochs {
            let beta = beta_schedule(epoch, &cfg);
            let beta_f = F::of(beta);
            order.shuffle(&mut rng);
            for chunk in order.chunks(cfg.batch_size) {
                let batch: Vec<&Prepared<F>> = chunk.iter().map(|&i| &prepared[i]).collect();
                let eps: Vec<F> = (0..batch.len() * h)
                    .map(|_| F::of(rng.sample::<f64, _>(StandardNormal)))
                    .collect();
                let (loss, grad) = self.params.loss_and_gradient(&batch, &eps, beta_f);
                if !loss.total.is_finite() {
                    return Err(VaeError::NonFiniteLoss { epoch });
                }
                for ((p, v), g) in self.params.data.iter_mut().zip(&mut velocity).zip(&grad) {
                    *v = momentum * *v - lr * *g;
                    *p = *p + *v;
                }
            }
            let eval = self.params.evaluate(&prepared, beta_f)?;
            if !eval.total.is_finite() || !self.params.all_finite() {
                return Err(VaeError::NonFiniteLoss { epoch });
            }
            log::debug!(
                "vae epoch {epoch}: recon {:.5} kl {:.5} beta {beta:.2e}",
                eval.recon,
                eval.kl
            );
            self.history.epochs.push(EpochRecord {
                epoch,
                beta,
                recon: eval.recon,
                kl: eval.kl,
                total: eval.total,
            });
        }
        Ok(())
    }
}

fn prepare_with<F: Scalar>(
    layout: &OutputLayout,
    schema: &AttributeSchema,
    s: &SerializedGenome,
) -> Prepared<F> {
    let mut rows = vec![RowTargets::default(); s.rows];
    for slot in &layout.slots {
        let i = slot.row * s.cols + slot.col;
        let target = &mut rows[slot.row];
        match slot.cardinality {
            None if s.mask_cont[i] != 0 => {
                target.continuous.push((slot.offset, F::of(s.matrix[i])));
            }
            Some(card) if s.mask_cat[i] != 0 => {
                target
                    .categorical
                    .push((slot.offset, card, s.matrix[i] as usize));
            }
            _ => {}
        }
    }
    Prepared {
        input: encoder_input(s, schema),
        rows,
    }
}

/// Train a fresh model: the `train_vae` entry point.
pub fn train_vae<F: Scalar>(
    dataset: &[SerializedGenome],
    schema: &AttributeSchema,
    config: &VaeConfig,
) -> Result<VaeModel<F>, VaeError> {
    let rows = dataset.first().map(|s| s.rows).unwrap_or(1);
    let mut model = VaeModel::untrained(schema, rows, config);
    model.train(dataset)?;
    Ok(model)
}

/// Mean pairwise squared distance between codes, a cheap spread diagnostic.
pub fn code_spread<F: Scalar>(codes: &[Vec<F>]) -> F {
    let n = codes.len();
    if n < 2 {
        return F::zero();
    }
    let mut sum = F::zero();
    for i in 0..n {
        for j in i + 1..n {
            sum = sum + squared_distance(&codes[i], &codes[j]);
        }
    }
    sum / F::of_usize(n * (n - 1) / 2)
}
