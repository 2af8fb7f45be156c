//! Multichannel 1-D convolutional text classifier, trained from scratch.
//!
//! Each channel owns an embedding table and a convolution of one kernel size:
//!
//! ```text
//! indices -> embed (E) -> conv k (F maps, valid) -> ReLU -> maxpool 2/2 -> flatten
//! concat(channels) -> dense (H, ReLU) -> dense (1) -> sigmoid
//! ```
//!
//! Embedding row 0 is padding and stays zero; row `V + 1` is the shared
//! out-of-vocabulary token. The loss is mean binary cross-entropy, optimized
//! with Adam. Per-sample gradients may be computed in parallel and are always
//! summed in sample order, so training is bit-identical across execution
//! modes.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bow::Vocabulary;
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::persist::Persist;

pub const PAD: u32 = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnConfig {
    pub seq_len: usize,
    pub embed_dim: usize,
    pub channels: Vec<usize>,
    pub filters: usize,
    pub dense_units: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            seq_len: 300,
            embed_dim: 100,
            channels: vec![1, 2, 3, 4],
            filters: 32,
            dense_units: 10,
            epochs: 7,
            batch_size: 16,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

impl CnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() || self.channels.iter().any(|k| !(1..=4).contains(k)) {
            return Err(Error::invalid("CNN channels must be a non-empty subset of {1,2,3,4}"));
        }
        let mut sorted = self.channels.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.channels.len() {
            return Err(Error::invalid("duplicate CNN channel kernel size"));
        }
        let kmax = *sorted.last().unwrap();
        if self.seq_len < kmax + 1 {
            return Err(Error::invalid(format!(
                "seq_len {} too short for kernel size {kmax} plus pooling",
                self.seq_len
            )));
        }
        if self.filters == 0 || self.embed_dim == 0 || self.dense_units == 0 {
            return Err(Error::invalid("filters, embed_dim and dense_units must be positive"));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::invalid("epochs and batch_size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        Ok(())
    }

    pub fn conv_width(&self, k: usize) -> usize {
        self.seq_len + 1 - k
    }

    pub fn pooled_width(&self, k: usize) -> usize {
        self.conv_width(k) / 2
    }

    /// Width of the concatenated flatten layer.
    pub fn flat_width(&self) -> usize {
        self.channels.iter().map(|&k| self.pooled_width(k) * self.filters).sum()
    }
}

/// Token indices for each document: 1-based vocabulary positions, `V + 1`
/// for unknown tokens, right-padded with 0 or truncated to `seq_len`.
pub fn encode_sequences<T: AsRef<[String]>>(docs: &[T], vocab: &Vocabulary, seq_len: usize) -> Vec<Vec<u32>> {
    let oov = vocab.len() as u32 + 1;
    docs.iter()
        .map(|d| {
            let mut s: Vec<u32> = d
                .as_ref()
                .iter()
                .take(seq_len)
                .map(|t| vocab.index_of(t).map_or(oov, |i| i as u32 + 1))
                .collect();
            s.resize(seq_len, PAD);
            s
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub kernel: usize,
    /// `(V + 2) x E`, row-major.
    pub embedding: Vec<f64>,
    /// `F x k x E`: filter `f` is the contiguous block `[f*k*E, (f+1)*k*E)`.
    pub conv_w: Vec<f64>,
    pub conv_b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnModel {
    pub config: CnnConfig,
    pub vocab_size: usize,
    pub channels: Vec<Channel>,
    /// `H x D`, row-major.
    pub dense_w: Vec<f64>,
    pub dense_b: Vec<f64>,
    pub out_w: Vec<f64>,
    pub out_b: f64,
    /// Mean training loss per epoch.
    pub epoch_losses: Vec<f64>,
}

impl Persist for CnnModel {
    const KIND: &'static str = "cnn";
}

fn glorot(rng: &mut ChaCha8Rng, n: usize, fan_in: usize, fan_out: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| rng.gen_range(-limit..limit)).collect()
}

impl CnnModel {
    /// Random initialization: uniform(+-0.05) embeddings (pad row zero),
    /// Glorot-uniform weights, zero biases.
    pub fn init(config: &CnnConfig, vocab_size: usize) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (e, f, h) = (config.embed_dim, config.filters, config.dense_units);
        let rows = vocab_size + 2;
        let channels = config
            .channels
            .iter()
            .map(|&k| {
                let mut embedding: Vec<f64> = (0..rows * e).map(|_| rng.gen_range(-0.05..0.05)).collect();
                embedding[..e].iter_mut().for_each(|x| *x = 0.0);
                Channel {
                    kernel: k,
                    embedding,
                    conv_w: glorot(&mut rng, f * k * e, k * e, k * f),
                    conv_b: vec![0.0; f],
                }
            })
            .collect();
        let d = config.flat_width();
        Ok(CnnModel {
            config: config.clone(),
            vocab_size,
            channels,
            dense_w: glorot(&mut rng, h * d, d, h),
            dense_b: vec![0.0; h],
            out_w: glorot(&mut rng, h, h, 1),
            out_b: 0.0,
            epoch_losses: Vec::new(),
        })
    }

    fn check(&self, seqs: &[Vec<u32>]) -> Result<()> {
        let max = self.vocab_size as u32 + 1;
        for (i, s) in seqs.iter().enumerate() {
            if s.len() != self.config.seq_len {
                return Err(Error::invalid(format!(
                    "sequence {i} has length {}, model expects {}",
                    s.len(),
                    self.config.seq_len
                )));
            }
            if let Some(&bad) = s.iter().find(|&&t| t > max) {
                return Err(Error::invalid(format!(
                    "sequence {i} has index {bad}, embedding has {} rows",
                    max + 1
                )));
            }
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.channels
            .iter()
            .map(|c| c.embedding.len() + c.conv_w.len() + c.conv_b.len())
            .sum::<usize>()
            + self.dense_w.len()
            + self.dense_b.len()
            + self.out_w.len()
            + 1
    }
}

struct ChannelCache {
    /// Pre-activations, `W x F`.
    z: Vec<f64>,
    /// Winning conv position per pooled cell, `P x F`.
    arg: Vec<u32>,
    /// Embedded input, `L x E` (rows past `n_tok` are zero).
    x: Vec<f64>,
}

struct SampleCache {
    n_tok: usize,
    channels: Vec<ChannelCache>,
    flat: Vec<f64>,
    hidden_pre: Vec<f64>,
    logit: f64,
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy from a logit, stable for large `|z|`.
fn bce_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - y * z + (-z.abs()).exp().ln_1p()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn forward_one(m: &CnnModel, seq: &[u32]) -> SampleCache {
    let cfg = &m.config;
    let (l, e, nf) = (cfg.seq_len, cfg.embed_dim, cfg.filters);
    let n_tok = seq.iter().rposition(|&t| t != PAD).map_or(0, |p| p + 1);
    let mut flat = Vec::with_capacity(cfg.flat_width());
    let mut channels = Vec::with_capacity(m.channels.len());
    for ch in &m.channels {
        let k = ch.kernel;
        let w = cfg.conv_width(k);
        let p = w / 2;
        let mut x = vec![0.0; l * e];
        for t in 0..n_tok {
            let r = seq[t] as usize;
            x[t * e..(t + 1) * e].copy_from_slice(&ch.embedding[r * e..(r + 1) * e]);
        }
        let mut z = vec![0.0; w * nf];
        for u in 0..w {
            let zu = &mut z[u * nf..(u + 1) * nf];
            if u < n_tok {
                let win = &x[u * e..(u + k) * e];
                for f in 0..nf {
                    zu[f] = ch.conv_b[f] + dot(&ch.conv_w[f * k * e..(f + 1) * k * e], win);
                }
            } else {
                zu.copy_from_slice(&ch.conv_b);
            }
        }
        let mut arg = vec![0u32; p * nf];
        for q in 0..p {
            for f in 0..nf {
                let (u1, u2) = (2 * q, 2 * q + 1);
                let (a1, a2) = (relu(z[u1 * nf + f]), relu(z[u2 * nf + f]));
                let (u, a) = if a2 > a1 { (u2, a2) } else { (u1, a1) };
                arg[q * nf + f] = u as u32;
                flat.push(a);
            }
        }
        channels.push(ChannelCache { z, arg, x });
    }
    let d = flat.len();
    let hidden_pre: Vec<f64> = (0..cfg.dense_units)
        .map(|h| m.dense_b[h] + dot(&m.dense_w[h * d..(h + 1) * d], &flat))
        .collect();
    let logit = m.out_b + hidden_pre.iter().zip(&m.out_w).map(|(&a, &w)| relu(a) * w).sum::<f64>();
    SampleCache { n_tok, channels, flat, hidden_pre, logit }
}

/// Probabilities for a batch of index rows.
pub fn forward(model: &CnnModel, seqs: &[Vec<u32>]) -> Result<Vec<f64>> {
    forward_with(model, seqs, Execution::default())
}

pub fn forward_with(model: &CnnModel, seqs: &[Vec<u32>], exec: Execution) -> Result<Vec<f64>> {
    model.check(seqs)?;
    Ok(par::map(seqs, exec, |s| sigmoid(forward_one(model, s).logit)))
}

pub fn predict_cnn(model: &CnnModel, seqs: &[Vec<u32>]) -> Result<Vec<u8>> {
    Ok(forward(model, seqs)?.into_iter().map(|p| (p > 0.5) as u8).collect())
}

/// Mean binary cross-entropy over the batch.
pub fn loss(model: &CnnModel, seqs: &[Vec<u32>], labels: &[u8]) -> Result<f64> {
    model.check(seqs)?;
    if seqs.len() != labels.len() || seqs.is_empty() {
        return Err(Error::invalid("batch and labels must be non-empty and equal length"));
    }
    let total: f64 = seqs
        .iter()
        .zip(labels)
        .map(|(s, &y)| bce_logit(forward_one(model, s).logit, y as f64))
        .sum();
    Ok(total / seqs.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelGrad {
    /// Sparse embedding rows, sorted by row; never contains the pad row.
    pub embedding: BTreeMap<u32, Vec<f64>>,
    pub conv_w: Vec<f64>,
    pub conv_b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub channels: Vec<ChannelGrad>,
    pub dense_w: Vec<f64>,
    pub dense_b: Vec<f64>,
    pub out_w: Vec<f64>,
    pub out_b: f64,
}

impl Gradients {
    fn zeros(m: &CnnModel) -> Self {
        Gradients {
            channels: m
                .channels
                .iter()
                .map(|c| ChannelGrad {
                    embedding: BTreeMap::new(),
                    conv_w: vec![0.0; c.conv_w.len()],
                    conv_b: vec![0.0; c.conv_b.len()],
                })
                .collect(),
            dense_w: vec![0.0; m.dense_w.len()],
            dense_b: vec![0.0; m.dense_b.len()],
            out_w: vec![0.0; m.out_w.len()],
            out_b: 0.0,
        }
    }

    fn add(&mut self, o: &Gradients) {
        fn acc(a: &mut [f64], b: &[f64]) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.channels.iter_mut().zip(&o.channels) {
            for (r, g) in &b.embedding {
                match a.embedding.get_mut(r) {
                    Some(v) => acc(v, g),
                    None => {
                        a.embedding.insert(*r, g.clone());
                    }
                }
            }
            acc(&mut a.conv_w, &b.conv_w);
            acc(&mut a.conv_b, &b.conv_b);
        }
        acc(&mut self.dense_w, &o.dense_w);
        acc(&mut self.dense_b, &o.dense_b);
        acc(&mut self.out_w, &o.out_w);
        self.out_b += o.out_b;
    }

    /// Gradient of embedding row `row` in channel `c` (zero when untouched).
    pub fn embedding_row(&self, c: usize, row: u32, dim: usize) -> Vec<f64> {
        self.channels[c].embedding.get(&row).cloned().unwrap_or_else(|| vec![0.0; dim])
    }
}

/// Gradient of one sample's loss scaled by `scale`; also returns its loss.
fn backward_one(m: &CnnModel, seq: &[u32], y: f64, scale: f64) -> (Gradients, f64) {
    let cfg = &m.config;
    let (e, nf, nh) = (cfg.embed_dim, cfg.filters, cfg.dense_units);
    let c = forward_one(m, seq);
    let mut g = Gradients::zeros(m);
    let d = c.flat.len();
    let dlogit = (sigmoid(c.logit) - y) * scale;

    g.out_b = dlogit;
    let mut dflat = vec![0.0; d];
    for h in 0..nh {
        let a = relu(c.hidden_pre[h]);
        g.out_w[h] = dlogit * a;
        if c.hidden_pre[h] <= 0.0 {
            continue;
        }
        let da = dlogit * m.out_w[h];
        g.dense_b[h] = da;
        let row = &m.dense_w[h * d..(h + 1) * d];
        let grow = &mut g.dense_w[h * d..(h + 1) * d];
        for j in 0..d {
            grow[j] = da * c.flat[j];
            dflat[j] += da * row[j];
        }
    }

    let mut off = 0;
    for (ci, (ch, cc)) in m.channels.iter().zip(&c.channels).enumerate() {
        let k = ch.kernel;
        let w = cfg.conv_width(k);
        let p = w / 2;
        let mut dz = vec![0.0; w * nf];
        for q in 0..p {
            for f in 0..nf {
                let u = cc.arg[q * nf + f] as usize;
                if cc.z[u * nf + f] > 0.0 {
                    dz[u * nf + f] += dflat[off + q * nf + f];
                }
            }
        }
        off += p * nf;
        let gc = &mut g.channels[ci];
        let mut dx = vec![0.0; (c.n_tok + k) * e];
        for u in 0..w {
            for f in 0..nf {
                let dzu = dz[u * nf + f];
                if dzu == 0.0 {
                    continue;
                }
                gc.conv_b[f] += dzu;
                if u >= c.n_tok {
                    continue;
                }
                let wf = &ch.conv_w[f * k * e..(f + 1) * k * e];
                let gwf = &mut gc.conv_w[f * k * e..(f + 1) * k * e];
                let win = &cc.x[u * e..(u + k) * e];
                let dwin = &mut dx[u * e..(u + k) * e];
                for j in 0..k * e {
                    gwf[j] += dzu * win[j];
                    dwin[j] += dzu * wf[j];
                }
            }
        }
        for t in 0..c.n_tok {
            let r = seq[t];
            if r == PAD {
                continue;
            }
            let src = &dx[t * e..(t + 1) * e];
            let dst = gc.embedding.entry(r).or_insert_with(|| vec![0.0; e]);
            dst.iter_mut().zip(src).for_each(|(a, b)| *a += b);
        }
    }
    (g, bce_logit(c.logit, y))
}

/// Exact gradients of the mean binary cross-entropy over the batch.
pub fn backward(model: &CnnModel, seqs: &[Vec<u32>], labels: &[u8]) -> Result<Gradients> {
    Ok(backward_with(model, seqs, labels, Execution::default())?.0)
}

/// Gradients plus the batch's mean loss.
pub fn backward_with(
    model: &CnnModel,
    seqs: &[Vec<u32>],
    labels: &[u8],
    exec: Execution,
) -> Result<(Gradients, f64)> {
    model.check(seqs)?;
    if seqs.len() != labels.len() || seqs.is_empty() {
        return Err(Error::invalid("batch and labels must be non-empty and equal length"));
    }
    let scale = 1.0 / seqs.len() as f64;
    let per = par::map_range(seqs.len(), exec, |i| backward_one(model, &seqs[i], labels[i] as f64, scale));
    let mut total = Gradients::zeros(model);
    let mut loss = 0.0;
    for (g, l) in &per {
        total.add(g);
        loss += l;
    }
    Ok((total, loss * scale))
}

struct Adam {
    lr: f64,
    b1: f64,
    b2: f64,
    eps: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    touched: Vec<Vec<bool>>,
}

impl Adam {
    fn new(model: &CnnModel, lr: f64) -> Self {
        let mut m = Vec::new();
        let mut touched = Vec::new();
        for c in &model.channels {
            m.push(vec![0.0; c.embedding.len()]);
            touched.push(vec![false; c.embedding.len() / model.config.embed_dim]);
            m.push(vec![0.0; c.conv_w.len()]);
            m.push(vec![0.0; c.conv_b.len()]);
        }
        m.push(vec![0.0; model.dense_w.len()]);
        m.push(vec![0.0; model.dense_b.len()]);
        m.push(vec![0.0; model.out_w.len()]);
        m.push(vec![0.0; 1]);
        let v = m.clone();
        Adam { lr, b1: 0.9, b2: 0.999, eps: 1e-7, t: 0, m, v, touched }
    }

    fn update(&mut self, p: &mut [f64], g: &[f64], slot: usize, lr_t: f64) {
        let (m, v) = (&mut self.m[slot], &mut self.v[slot]);
        for i in 0..p.len() {
            m[i] = self.b1 * m[i] + (1.0 - self.b1) * g[i];
            v[i] = self.b2 * v[i] + (1.0 - self.b2) * g[i] * g[i];
            p[i] -= lr_t * m[i] / (v[i].sqrt() + self.eps);
        }
    }

    fn step(&mut self, model: &mut CnnModel, g: &Gradients) {
        self.t += 1;
        let lr_t = self.lr * (1.0 - self.b2.powi(self.t)).sqrt() / (1.0 - self.b1.powi(self.t));
        let e = model.config.embed_dim;
        let zero = vec![0.0; e];
        let mut slot = 0;
        for (ci, (ch, gc)) in model.channels.iter_mut().zip(&g.channels).enumerate() {
            // rows never touched have zero moments, so their update is zero
            for (&r, _) in &gc.embedding {
                self.touched[ci][r as usize] = true;
            }
            let n_rows = ch.embedding.len() / e;
            for r in 1..n_rows {
                if !self.touched[ci][r] {
                    continue;
                }
                let grow = gc.embedding.get(&(r as u32)).unwrap_or(&zero);
                let (m, v) = (&mut self.m[slot][r * e..(r + 1) * e], &mut self.v[slot][r * e..(r + 1) * e]);
                let prow = &mut ch.embedding[r * e..(r + 1) * e];
                for j in 0..e {
                    m[j] = self.b1 * m[j] + (1.0 - self.b1) * grow[j];
                    v[j] = self.b2 * v[j] + (1.0 - self.b2) * grow[j] * grow[j];
                    prow[j] -= lr_t * m[j] / (v[j].sqrt() + self.eps);
                }
            }
            self.update(&mut ch.conv_w, &gc.conv_w, slot + 1, lr_t);
            self.update(&mut ch.conv_b, &gc.conv_b, slot + 2, lr_t);
            slot += 3;
        }
        self.update(&mut model.dense_w, &g.dense_w, slot, lr_t);
        self.update(&mut model.dense_b, &g.dense_b, slot + 1, lr_t);
        self.update(&mut model.out_w, &g.out_w, slot + 2, lr_t);
        let mut ob = [model.out_b];
        self.update(&mut ob, &[g.out_b], slot + 3, lr_t);
        model.out_b = ob[0];
    }
}

pub fn train_cnn(config: &CnnConfig, seqs: &[Vec<u32>], labels: &[u8], vocab_size: usize) -> Result<CnnModel> {
    train_cnn_with(config, seqs, labels, vocab_size, Execution::default())
}

/// Mini-batch Adam on shuffled batches; the shuffle order and the initial
/// weights both derive from `config.seed`.
pub fn train_cnn_with(
    config: &CnnConfig,
    seqs: &[Vec<u32>],
    labels: &[u8],
    vocab_size: usize,
    exec: Execution,
) -> Result<CnnModel> {
    if seqs.len() != labels.len() {
        return Err(Error::invalid(format!("{} sequences but {} labels", seqs.len(), labels.len())));
    }
    if seqs.is_empty() {
        return Err(Error::Empty("no training sequences".into()));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::invalid("labels must be 0 or 1"));
    }
    let mut model = CnnModel::init(config, vocab_size)?;
    model.check(seqs)?;
    let mut adam = Adam::new(&model, config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_5eed);
    let mut order: Vec<usize> = (0..seqs.len()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let bx: Vec<Vec<u32>> = chunk.iter().map(|&i| seqs[i].clone()).collect();
            let by: Vec<u8> = chunk.iter().map(|&i| labels[i]).collect();
            let (g, l) = backward_with(&model, &bx, &by, exec)?;
            if !l.is_finite() {
                return Err(Error::Diverged(format!("non-finite loss at epoch {} batch {}", epoch + 1, b + 1)));
            }
            epoch_loss += l * chunk.len() as f64;
            adam.step(&mut model, &g);
        }
        let mean = epoch_loss / seqs.len() as f64;
        log::debug!("cnn epoch {}: loss {mean:.5}", epoch + 1);
        model.epoch_losses.push(mean);
    }
    Ok(model)
}
