//! Alternating adversarial optimization, learning-rate schedule, and
//! checkpoint persistence with exact resumption.

mod adam;
pub mod checkpoint;
mod step;

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adam::{adam_update, grad_norm_sq, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use step::{mix, train_step, Batch, Optimizers};

use crate::error::{Error, Result};
use crate::geometry::{self, PointCloud};
use crate::losses::{AdversarialForm, LossReport, LossWeights};
use crate::model::StyleTransferModel;
use crate::nets::Domain;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lr_decay_epochs: Vec<usize>,
    pub lr_decay_factor: f64,
    pub weights: LossWeights,
    pub adversarial_form: AdversarialForm,
    pub seed: u64,
    /// Global-norm gradient clip per parameter group; off by default.
    pub grad_clip: Option<f64>,
    /// Epochs trained on reconstruction alone before the other terms start.
    pub warmup_epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 180,
            batch_size: 16,
            lr: 1e-3,
            lr_decay_epochs: vec![120, 140, 145],
            lr_decay_factor: 0.1,
            weights: LossWeights::default(),
            adversarial_form: AdversarialForm::LeastSquares,
            seed: 0,
            grad_clip: None,
            warmup_epochs: 0,
        }
    }
}

impl TrainConfig {
    /// The same schedule shape compressed into 45 epochs; the first decay
    /// falls at epoch 30.
    pub fn desk() -> Self {
        Self { epochs: 45, lr_decay_epochs: vec![30, 35, 36], ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor.is_finite()) {
            return bad("lr_decay_factor must be positive".into());
        }
        if self.lr_decay_epochs.windows(2).any(|w| w[0] >= w[1]) {
            return bad("lr_decay_epochs must be strictly increasing".into());
        }
        if self.lr_decay_epochs.last().is_some_and(|&e| e >= self.epochs) {
            return bad("lr_decay_epochs must lie below epochs".into());
        }
        if self.seed > i64::MAX as u64 {
            return bad("seed must fit in a signed 64-bit integer".into());
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return bad("grad_clip must be positive".into());
            }
        }
        self.weights.validate()
    }

    /// Weights in force during `epoch`, honoring the warm-up.
    pub fn weights_at(&self, epoch: usize) -> LossWeights {
        if epoch < self.warmup_epochs {
            LossWeights { adv: 0.0, cycle: 0.0, latent_content: 0.0, latent_style: 0.0, ..self.weights }
        } else {
            self.weights
        }
    }
}

/// `lr · factor^(number of decay epochs ≤ epoch)`.
pub fn lr_schedule(epoch: usize, config: &TrainConfig) -> f64 {
    let k = config.lr_decay_epochs.iter().filter(|&&e| e <= epoch).count();
    config.lr * config.lr_decay_factor.powi(k as i32)
}

/// Position in the schedule; enough, with the seed, to reproduce every
/// remaining random draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Progress {
    pub epoch: usize,
    /// Step within the epoch.
    pub step: usize,
    pub global_step: u64,
}

/// Model, optimizer and schedule position.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub model: StyleTransferModel<f32>,
    pub config: TrainConfig,
    pub optimizers: Optimizers,
    pub progress: Progress,
}

/// Per-epoch permutation of one domain's training indices.
fn epoch_order(seed: u64, epoch: usize, domain: Domain, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(mix(seed, epoch as u64), 0xD0 + domain.tag() as u64));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    idx
}

impl Trainer {
    pub fn new(model: StyleTransferModel<f32>, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let optimizers = Optimizers::new(&model);
        Ok(Self { model, config, optimizers, progress: Progress::default() })
    }

    pub fn batch_size(&self, data: [&[PointCloud]; 2]) -> usize {
        self.config.batch_size.min(data[0].len()).min(data[1].len())
    }

    pub fn steps_per_epoch(&self, data: [&[PointCloud]; 2]) -> usize {
        let b = self.batch_size(data);
        if b == 0 {
            0
        } else {
            data[0].len().min(data[1].len()) / b
        }
    }

    pub fn finished(&self) -> bool {
        self.progress.epoch >= self.config.epochs
    }

    /// Runs the next scheduled step and advances the position.
    pub fn step(&mut self, data: [&[PointCloud]; 2]) -> Result<LossReport> {
        let b = self.batch_size(data);
        if b == 0 {
            return Err(Error::EmptyBatch);
        }
        let Progress { epoch, step, global_step } = self.progress;
        let pick = |d: Domain| -> Vec<&PointCloud> {
            let order = epoch_order(self.config.seed, epoch, d, data[d.index()].len());
            order[step * b..(step + 1) * b].iter().map(|&i| &data[d.index()][i]).collect()
        };
        let batch = Batch::new(&pick(Domain::One), &pick(Domain::Two))?;
        let weights = self.config.weights_at(epoch);
        let lr = lr_schedule(epoch, &self.config);
        let seed = mix(self.config.seed, global_step);
        let report = train_step(&mut self.model, &mut self.optimizers, &batch, &self.config, &weights, lr, seed)?;
        self.progress.global_step += 1;
        self.progress.step += 1;
        if self.progress.step >= self.steps_per_epoch(data) {
            self.progress.step = 0;
            self.progress.epoch += 1;
        }
        Ok(report)
    }

    /// Finishes the current epoch, logging one CSV row per step.
    pub fn run_epoch(&mut self, data: [&[PointCloud]; 2], mut log: Option<&mut TrainLog>) -> Result<Vec<LossReport>> {
        let epoch = self.progress.epoch;
        let mut reports = Vec::new();
        while self.progress.epoch == epoch && !self.finished() {
            let (e, s) = (self.progress.epoch, self.progress.step);
            let report = self.step(data)?;
            if let Some(log) = log.as_deref_mut() {
                log.row(e, s, &report, lr_schedule(e, &self.config))?;
            }
            reports.push(report);
        }
        if let Some(name) = self.model.store.first_non_finite() {
            return Err(Error::Divergence(format!("parameter {name} is not finite")));
        }
        Ok(reports)
    }
}

/// CSV training log: `epoch,step,<loss columns>,lr`.
pub struct TrainLog {
    out: Box<dyn Write>,
    multimodal: bool,
}

impl TrainLog {
    pub fn new(mut out: Box<dyn Write>, multimodal: bool) -> Result<Self> {
        let mut header = vec!["epoch", "step"];
        header.extend(LossReport::columns(multimodal));
        header.push("lr");
        writeln!(out, "{}", header.join(",")).map_err(|e| Error::io("training log", e))?;
        Ok(Self { out, multimodal })
    }

    /// Appends to an existing log without repeating the header.
    pub fn continuing(out: Box<dyn Write>, multimodal: bool) -> Self {
        Self { out, multimodal }
    }

    pub fn row(&mut self, epoch: usize, step: usize, report: &LossReport, lr: f64) -> Result<()> {
        let mut fields = vec![epoch.to_string(), step.to_string()];
        fields.extend(report.csv_fields(self.multimodal));
        fields.push(format!("{lr:e}"));
        writeln!(self.out, "{}", fields.join(",")).map_err(|e| Error::io("training log", e))?;
        self.out.flush().map_err(|e| Error::io("training log", e))
    }
}

/// Mean Chamfer between each cloud and its reconstruction `H_d(E^c(x), E^s_d(x))`.
pub fn reconstruction_chamfer(model: &StyleTransferModel<f32>, clouds: &[PointCloud], domain: Domain) -> Result<f64> {
    if clouds.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut total = 0.0;
    for chunk in clouds.chunks(32) {
        let refs: Vec<&PointCloud> = chunk.iter().collect();
        let codes = model.encode_batch(&refs, domain)?;
        let pairs: Vec<_> = codes.iter().map(|(c, s)| (c, s)).collect();
        for (x, rec) in chunk.iter().zip(model.decode_batch(&pairs)?) {
            total += geometry::chamfer(x, &rec);
        }
    }
    Ok(total / clouds.len() as f64)
}
