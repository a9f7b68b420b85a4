//! A small tanh MLP: encoder to a 32-wide bottleneck, a decoder used for
//! denoising pretraining, and a classification head over template ids.
//!
//! Head logits are masked to the templates of the sample's topology tag;
//! the softmax and cross-entropy run over that subset only.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::LabeledUnitary;
use crate::error::{Error, Result};
use crate::templates::TemplateCatalog;

pub const HIDDEN: usize = 64;
pub const BOTTLENECK: usize = 32;
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub noise_std: f64,
    pub rng_seed: u64,
    pub holdout_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 64,
            learning_rate: 0.05,
            noise_std: 0.05,
            rng_seed: 7,
            holdout_fraction: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument("epochs and batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument("learning_rate must be positive".into()));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidArgument("noise_std must be non-negative".into()));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(Error::InvalidArgument("holdout_fraction must be in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Dense layer, weights row-major `outputs × inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn new(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        Self {
            inputs,
            outputs,
            weights: (0..inputs * outputs).map(|_| rng.random_range(-limit..limit)).collect(),
            biases: vec![0.0; outputs],
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            inputs: self.inputs,
            outputs: self.outputs,
            weights: vec![0.0; self.weights.len()],
            biases: vec![0.0; self.biases.len()],
        }
    }

    fn row(&self, r: usize, x: &[f64]) -> f64 {
        let w = &self.weights[r * self.inputs..(r + 1) * self.inputs];
        self.biases[r] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.outputs).map(|r| self.row(r, x)).collect()
    }

    fn forward_tanh(&self, x: &[f64]) -> Vec<f64> {
        (0..self.outputs).map(|r| self.row(r, x).tanh()).collect()
    }

    /// Accumulate gradients for output rows `rows` with upstream `delta`
    /// (indexed like `rows`), adding `Wᵀ δ` into `dx` when given.
    fn backward(&self, x: &[f64], rows: impl Iterator<Item = (usize, f64)>, grad: &mut Layer, dx: Option<&mut [f64]>) {
        let n = self.inputs;
        let mut dx = dx;
        for (r, d) in rows {
            if d == 0.0 {
                continue;
            }
            grad.biases[r] += d;
            let gw = &mut grad.weights[r * n..(r + 1) * n];
            for (g, xi) in gw.iter_mut().zip(x) {
                *g += d * xi;
            }
            if let Some(dx) = dx.as_deref_mut() {
                let w = &self.weights[r * n..(r + 1) * n];
                for (o, wi) in dx.iter_mut().zip(w) {
                    *o += d * wi;
                }
            }
        }
    }

    fn step(&mut self, grad: &Layer, scale: f64) {
        for (w, g) in self.weights.iter_mut().zip(&grad.weights) {
            *w -= scale * g;
        }
        for (b, g) in self.biases.iter_mut().zip(&grad.biases) {
            *b -= scale * g;
        }
    }
}

fn dtanh(y: f64) -> f64 {
    1.0 - y * y
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Reconstruction,
    Classification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
}

impl TrainReport {
    /// Mean loss of the last quarter of epochs is at most that of the first quarter.
    pub fn decreasing_on_average(&self) -> bool {
        let n = self.epoch_losses.len();
        let q = (n / 4).max(1);
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        mean(&self.epoch_losses[n - q..]) <= mean(&self.epoch_losses[..q])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub version: u32,
    pub feature_dim: usize,
    pub n_tags: usize,
    pub catalog_size: usize,
    /// Template ids allowed for each topology tag.
    pub tag_members: Vec<Vec<usize>>,
    pub encoder: Vec<Layer>,
    pub decoder: Vec<Layer>,
    pub head: Vec<Layer>,
    pub trained: bool,
}

struct Encoded {
    h: Vec<f64>,
    z: Vec<f64>,
}

struct Grads {
    encoder: Vec<Layer>,
    decoder: Vec<Layer>,
    head: Vec<Layer>,
}

impl Mlp {
    pub fn new(feature_dim: usize, catalog: &TemplateCatalog, rng_seed: u64) -> Self {
        let n_tags = catalog.topologies().len();
        let tag_members = (0..n_tags).map(|t| catalog.ids_for_topology(t)).collect();
        Self::with_labels(feature_dim, catalog.len(), tag_members, rng_seed)
    }

    pub fn with_labels(feature_dim: usize, catalog_size: usize, tag_members: Vec<Vec<usize>>, rng_seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let n_tags = tag_members.len();
        let input = feature_dim + n_tags;
        Self {
            version: MODEL_VERSION,
            feature_dim,
            n_tags,
            catalog_size,
            tag_members,
            encoder: vec![Layer::new(input, HIDDEN, &mut rng), Layer::new(HIDDEN, BOTTLENECK, &mut rng)],
            decoder: vec![Layer::new(BOTTLENECK, HIDDEN, &mut rng), Layer::new(HIDDEN, input, &mut rng)],
            head: vec![Layer::new(BOTTLENECK, HIDDEN, &mut rng), Layer::new(HIDDEN, catalog_size, &mut rng)],
            trained: false,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.feature_dim + self.n_tags
    }

    /// Features followed by a one-hot topology tag (all zeros for `None`).
    pub fn input(&self, features: &[f64], tag: Option<usize>) -> Result<Vec<f64>> {
        if features.len() != self.feature_dim {
            return Err(Error::Dimension(format!(
                "model expects {} features, got {}",
                self.feature_dim,
                features.len()
            )));
        }
        let mut x = features.to_vec();
        x.resize(self.input_dim(), 0.0);
        if let Some(t) = tag {
            if t >= self.n_tags {
                return Err(Error::InvalidArgument(format!("unknown topology tag {t}")));
            }
            x[self.feature_dim + t] = 1.0;
        }
        Ok(x)
    }

    /// Template ids scored for `tag`; all ids when `None`.
    pub fn candidates(&self, tag: Option<usize>) -> Result<Vec<usize>> {
        match tag {
            None => Ok((0..self.catalog_size).collect()),
            Some(t) => self
                .tag_members
                .get(t)
                .cloned()
                .ok_or_else(|| Error::InvalidArgument(format!("unknown topology tag {t}"))),
        }
    }

    fn encode(&self, x: &[f64]) -> Encoded {
        let h = self.encoder[0].forward_tanh(x);
        let z = self.encoder[1].forward_tanh(&h);
        Encoded { h, z }
    }

    /// Latent 32-dim representation.
    pub fn embed(&self, x: &[f64]) -> Vec<f64> {
        self.encode(x).z
    }

    pub fn reconstruct(&self, x: &[f64]) -> Vec<f64> {
        let e = self.encode(x);
        let h = self.decoder[0].forward_tanh(&e.z);
        self.decoder[1].forward(&h)
    }

    fn head_logits(&self, z: &[f64], rows: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let h = self.head[0].forward_tanh(z);
        let logits = rows.iter().map(|&r| self.head[1].row(r, &h)).collect();
        (h, logits)
    }

    /// Softmax probabilities over `candidates(tag)`, in that order.
    pub fn probabilities(&self, features: &[f64], tag: Option<usize>) -> Result<Vec<(usize, f64)>> {
        let x = self.input(features, tag)?;
        let rows = self.candidates(tag)?;
        let e = self.encode(&x);
        let (_, logits) = self.head_logits(&e.z, &rows);
        Ok(rows.into_iter().zip(softmax(&logits)).collect())
    }

    fn zero_grads(&self) -> Grads {
        Grads {
            encoder: self.encoder.iter().map(Layer::zeros_like).collect(),
            decoder: self.decoder.iter().map(Layer::zeros_like).collect(),
            head: self.head.iter().map(Layer::zeros_like).collect(),
        }
    }

    fn backprop_encoder(&self, x: &[f64], e: &Encoded, dz: &[f64], g: &mut Grads) {
        let dz_pre = dz.iter().zip(&e.z).map(|(d, z)| d * dtanh(*z));
        let mut dh = vec![0.0; HIDDEN];
        self.encoder[1].backward(&e.h, dz_pre.enumerate(), &mut g.encoder[1], Some(&mut dh));
        let dh_pre = dh.iter().zip(&e.h).map(|(d, h)| d * dtanh(*h));
        self.encoder[0].backward(x, dh_pre.enumerate(), &mut g.encoder[0], None);
    }

    /// Squared-error reconstruction of `target` from `noisy`; loss is the
    /// per-element mean. Gradients are accumulated into `g`.
    fn reconstruction_pass(&self, noisy: &[f64], target: &[f64], g: Option<&mut Grads>) -> f64 {
        let e = self.encode(noisy);
        let h = self.decoder[0].forward_tanh(&e.z);
        let y = self.decoder[1].forward(&h);
        let d = target.len() as f64;
        let loss = y.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / d;
        if let Some(g) = g {
            let dy = y.iter().zip(target).map(|(a, b)| 2.0 * (a - b) / d);
            let mut dh = vec![0.0; HIDDEN];
            self.decoder[1].backward(&h, dy.enumerate(), &mut g.decoder[1], Some(&mut dh));
            let dh_pre = dh.iter().zip(&h).map(|(d, h)| d * dtanh(*h));
            let mut dz = vec![0.0; BOTTLENECK];
            self.decoder[0].backward(&e.z, dh_pre.enumerate(), &mut g.decoder[0], Some(&mut dz));
            self.backprop_encoder(noisy, &e, &dz, g);
        }
        loss
    }

    /// Masked softmax cross-entropy of `label`.
    fn classification_pass(&self, x: &[f64], rows: &[usize], label: usize, g: Option<&mut Grads>) -> Result<f64> {
        let pos = rows
            .iter()
            .position(|&r| r == label)
            .ok_or_else(|| Error::InvalidArgument(format!("label {label} is not allowed by the sample's topology")))?;
        let e = self.encode(x);
        let (h, logits) = self.head_logits(&e.z, rows);
        let p = softmax(&logits);
        let loss = -p[pos].max(f64::MIN_POSITIVE).ln();
        if let Some(g) = g {
            let dl = p.iter().enumerate().map(|(i, &pi)| (rows[i], if i == pos { pi - 1.0 } else { pi }));
            let mut dh = vec![0.0; HIDDEN];
            self.head[1].backward(&h, dl, &mut g.head[1], Some(&mut dh));
            let dh_pre = dh.iter().zip(&h).map(|(d, h)| d * dtanh(*h));
            let mut dz = vec![0.0; BOTTLENECK];
            self.head[0].backward(&e.z, dh_pre.enumerate(), &mut g.head[0], Some(&mut dz));
            self.backprop_encoder(x, &e, &dz, g);
        }
        Ok(loss)
    }

    fn apply(&mut self, g: &Grads, scale: f64) {
        for (l, gl) in self.encoder.iter_mut().zip(&g.encoder) {
            l.step(gl, scale);
        }
        for (l, gl) in self.decoder.iter_mut().zip(&g.decoder) {
            l.step(gl, scale);
        }
        for (l, gl) in self.head.iter_mut().zip(&g.head) {
            l.step(gl, scale);
        }
    }

    fn inputs(&self, data: &[LabeledUnitary]) -> Result<Vec<Vec<f64>>> {
        data.iter().map(|s| self.input(&s.features, Some(s.topology_tag))).collect()
    }

    fn run_epochs(
        &mut self,
        n: usize,
        cfg: &TrainConfig,
        rng: &mut ChaCha8Rng,
        mut sample_loss: impl FnMut(&Mlp, usize, &mut ChaCha8Rng, &mut Grads) -> Result<f64>,
    ) -> Result<TrainReport> {
        let mut order: Vec<usize> = (0..n).collect();
        let mut epoch_losses = Vec::with_capacity(cfg.epochs);
        for _ in 0..cfg.epochs {
            order.shuffle(rng);
            let mut total = 0.0;
            for batch in order.chunks(cfg.batch_size) {
                let mut g = self.zero_grads();
                for &i in batch {
                    total += sample_loss(self, i, rng, &mut g)?;
                }
                self.apply(&g, cfg.learning_rate / batch.len() as f64);
            }
            let mean = total / n as f64;
            if !mean.is_finite() {
                return Err(Error::Numerical("training loss became non-finite".into()));
            }
            epoch_losses.push(mean);
        }
        Ok(TrainReport { epoch_losses })
    }

    /// Denoising autoencoder pretraining of encoder and decoder.
    pub fn pretrain_denoise(&mut self, data: &[LabeledUnitary], cfg: &TrainConfig) -> Result<TrainReport> {
        cfg.validate()?;
        if data.is_empty() {
            return Err(Error::InvalidArgument("no training data".into()));
        }
        let inputs = self.inputs(data)?;
        let noise = Normal::new(0.0, cfg.noise_std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let fd = self.feature_dim;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        self.run_epochs(data.len(), cfg, &mut rng, |m, i, rng, g| {
            let clean = &inputs[i];
            let mut noisy = clean.clone();
            for v in &mut noisy[..fd] {
                *v += noise.sample(rng);
            }
            Ok(m.reconstruction_pass(&noisy, clean, Some(g)))
        })
    }

    /// Cross-entropy training of encoder and head on template labels.
    pub fn finetune(&mut self, data: &[LabeledUnitary], cfg: &TrainConfig) -> Result<TrainReport> {
        cfg.validate()?;
        if data.is_empty() {
            return Err(Error::InvalidArgument("no training data".into()));
        }
        let inputs = self.inputs(data)?;
        let rows: Vec<Vec<usize>> = data
            .iter()
            .map(|s| self.candidates(Some(s.topology_tag)))
            .collect::<Result<_>>()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed.wrapping_add(1));
        let report = self.run_epochs(data.len(), cfg, &mut rng, |m, i, _, g| {
            m.classification_pass(&inputs[i], &rows[i], data[i].template_id, Some(g))
        })?;
        self.trained = true;
        Ok(report)
    }

    /// Mean loss over `data` without noise.
    pub fn loss(&self, data: &[LabeledUnitary], objective: Objective) -> Result<f64> {
        let mut total = 0.0;
        for s in data {
            let x = self.input(&s.features, Some(s.topology_tag))?;
            total += match objective {
                Objective::Reconstruction => self.reconstruction_pass(&x, &x, None),
                Objective::Classification => {
                    let rows = self.candidates(Some(s.topology_tag))?;
                    self.classification_pass(&x, &rows, s.template_id, None)?
                }
            };
        }
        Ok(total / data.len() as f64)
    }

    /// Largest relative disagreement between backprop gradients and central
    /// differences, over `probes` random parameters of every layer involved
    /// in `objective`.
    pub fn gradient_check(&self, data: &[LabeledUnitary], objective: Objective, probes: usize, seed: u64) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::InvalidArgument("no data".into()));
        }
        let mut g = self.zero_grads();
        for s in data {
            let x = self.input(&s.features, Some(s.topology_tag))?;
            match objective {
                Objective::Reconstruction => {
                    self.reconstruction_pass(&x, &x, Some(&mut g));
                }
                Objective::Classification => {
                    let rows = self.candidates(Some(s.topology_tag))?;
                    self.classification_pass(&x, &rows, s.template_id, Some(&mut g))?;
                }
            }
        }
        let n = data.len() as f64;
        let groups: [(usize, &[Layer]); 2] = match objective {
            Objective::Reconstruction => [(0, &g.encoder), (1, &g.decoder)],
            Objective::Classification => [(0, &g.encoder), (2, &g.head)],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for (group, layers) in groups {
            for (li, gl) in layers.iter().enumerate() {
                let total = gl.weights.len() + gl.biases.len();
                for _ in 0..probes {
                    let k = rng.random_range(0..total);
                    let analytic = if k < gl.weights.len() { gl.weights[k] } else { gl.biases[k - gl.weights.len()] } / n;
                    let perturbed = |delta: f64| -> Result<f64> {
                        let mut m = self.clone();
                        let layer = match group {
                            0 => &mut m.encoder[li],
                            1 => &mut m.decoder[li],
                            _ => &mut m.head[li],
                        };
                        if k < layer.weights.len() {
                            layer.weights[k] += delta;
                        } else {
                            layer.biases[k - layer.weights.len()] += delta;
                        }
                        m.loss(data, objective)
                    };
                    let numeric = (perturbed(h)? - perturbed(-h)?) / (2.0 * h);
                    let scale = analytic.abs().max(numeric.abs()).max(1e-6);
                    worst = worst.max((analytic - numeric).abs() / scale);
                }
            }
        }
        Ok(worst)
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
