//! Frozen per-point feature network used by the perceptual metrics.
//!
//! Fitted as a two-way family classifier; the classifier head is dropped
//! once held-out accuracy clears the floor.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Mat;
use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::nets::{Domain, Forward, Group, Linear, ParameterStore, PointEncoder};
use crate::training::checkpoint::{read_params, write_params, Reader, Writer};
use crate::training::{adam_update, mix, AdamState};

pub const EXTRACTOR_MAGIC: &[u8; 4] = b"3DSF";
pub const EXTRACTOR_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractorConfig {
    /// Hidden per-point widths; the last tap has `out_dim` channels.
    pub widths: Vec<usize>,
    pub out_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub accuracy_floor: f64,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        Self { widths: vec![64, 128], out_dim: 256, epochs: 10, batch_size: 16, lr: 1e-3, seed: 0, accuracy_floor: 0.9 }
    }
}

impl ExtractorConfig {
    pub fn desk() -> Self {
        Self { widths: vec![32, 64], out_dim: 64, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.contains(&0) || self.out_dim == 0 {
            return Err(Error::Config("extractor widths must be positive".into()));
        }
        if self.epochs == 0 || self.batch_size < 2 {
            return Err(Error::Config("extractor needs epochs ≥ 1 and batch_size ≥ 2".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("extractor lr must be positive, got {}", self.lr)));
        }
        if self.seed > i64::MAX as u64 {
            return Err(Error::Config("extractor seed must fit in a signed 64-bit integer".into()));
        }
        if !(0.0..=1.0).contains(&self.accuracy_floor) {
            return Err(Error::Config("accuracy_floor must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// What the extractor was fitted on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractorProvenance {
    pub dataset: String,
    pub task: String,
    pub epochs: usize,
    pub val_accuracy: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExtractorSnapshot {
    config: ExtractorConfig,
    provenance: ExtractorProvenance,
}

/// Frozen encoder stack with one tap per shared per-point layer.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    config: ExtractorConfig,
    store: ParameterStore<f32>,
    encoder: PointEncoder,
    provenance: ExtractorProvenance,
}

fn build(config: &ExtractorConfig, seed: u64, with_head: bool) -> Result<(ParameterStore<f32>, PointEncoder, Option<Linear>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParameterStore::new();
    let encoder = PointEncoder::new(&mut store, "extractor", Group::Generator, &config.widths, config.out_dim, &mut rng)?;
    let head = if with_head {
        Some(Linear::new(&mut store, "classifier", Group::Generator, config.out_dim, 1, &mut rng)?)
    } else {
        None
    };
    Ok((store, encoder, head))
}

/// Stacks clouds into `B·n × 3`, resampling to the first cloud's count.
fn stack(clouds: &[&PointCloud], seed: u64) -> (Mat<f32>, usize) {
    let n = clouds[0].len();
    let mut data = Vec::with_capacity(clouds.len() * n * 3);
    for c in clouds {
        data.extend(c.resample(n, seed).to_mat::<f32>().data);
    }
    (Mat::from_vec(clouds.len() * n, 3, data), n)
}

fn logits(store: &ParameterStore<f32>, encoder: &PointEncoder, head: &Linear, clouds: &[&PointCloud]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(clouds.len());
    for chunk in clouds.chunks(64) {
        let mut fw = Forward::eval(store);
        let (m, n) = stack(chunk, 0);
        let x = fw.input(m);
        let code = encoder.forward(&mut fw, x, n)?;
        let z = head.forward(&mut fw, code)?;
        out.extend(fw.value(z).to_f64_vec());
    }
    Ok(out)
}

/// Fits on the dataset's training split, scores on its validation split.
pub fn fit_feature_extractor(dataset: &Dataset, config: &ExtractorConfig) -> Result<FeatureExtractor> {
    let train = [dataset.clouds(Domain::One, Split::Train), dataset.clouds(Domain::Two, Split::Train)];
    let val = [dataset.clouds(Domain::One, Split::Val), dataset.clouds(Domain::Two, Split::Val)];
    fit_on([&train[0], &train[1]], [&val[0], &val[1]], config, &dataset.provenance)
}

/// Family classification: label +1 for family 1, −1 for family 2, logistic
/// loss `softplus(−y·z)`, class-balanced batches.
pub fn fit_on(
    train: [&[PointCloud]; 2],
    val: [&[PointCloud]; 2],
    config: &ExtractorConfig,
    dataset: &str,
) -> Result<FeatureExtractor> {
    config.validate()?;
    let classes = train.iter().filter(|c| !c.is_empty()).count();
    if classes < 2 {
        return Err(Error::SingleClass(classes));
    }
    if val.iter().any(|v| v.is_empty()) {
        return Err(Error::EmptyFamily("extractor validation split".into()));
    }
    let (mut store, encoder, head) = build(config, config.seed, true)?;
    let head = head.expect("built with head");
    let mut adam = AdamState::new(&store, store.ids().collect());
    let half = (config.batch_size / 2).min(train[0].len()).min(train[1].len());
    let steps = train[0].len().min(train[1].len()) / half;
    let mut step_seed = 0u64;
    for epoch in 0..config.epochs {
        let orders: Vec<Vec<usize>> = (0..2)
            .map(|k| {
                let mut idx: Vec<usize> = (0..train[k].len()).collect();
                idx.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(mix(config.seed, epoch as u64), 0xE0 + k as u64)));
                idx
            })
            .collect();
        for s in 0..steps {
            let mut clouds: Vec<&PointCloud> = Vec::with_capacity(2 * half);
            let mut labels = Vec::with_capacity(2 * half);
            for k in 0..2 {
                for &i in &orders[k][s * half..(s + 1) * half] {
                    clouds.push(&train[k][i]);
                    labels.push(if k == 0 { 1.0f32 } else { -1.0 });
                }
            }
            let grads = {
                let mut fw = Forward::train(&store, mix(config.seed, step_seed));
                let (m, n) = stack(&clouds, 0);
                let x = fw.input(m);
                let code = encoder.forward(&mut fw, x, n)?;
                let z = head.forward(&mut fw, code)?;
                let y = fw.input(Mat::from_vec(labels.len(), 1, labels));
                let yz = fw.graph.mul(z, y);
                let neg = fw.graph.scale(yz, -1.0);
                let sp = fw.graph.softplus(neg);
                let loss = fw.graph.mean(sp);
                if !fw.graph.scalar(loss).is_finite() {
                    return Err(Error::Divergence("extractor loss is not finite".into()));
                }
                fw.graph.backward(loss)?
            };
            adam_update(&mut store, &grads, &mut adam, config.lr, 1.0)?;
            step_seed += 1;
        }
    }

    let mut correct = 0usize;
    let mut total = 0usize;
    for (k, clouds) in val.iter().enumerate() {
        let refs: Vec<&PointCloud> = clouds.iter().collect();
        for z in logits(&store, &encoder, &head, &refs)? {
            correct += usize::from((z > 0.0) == (k == 0));
            total += 1;
        }
    }
    let accuracy = correct as f64 / total as f64;
    if accuracy < config.accuracy_floor {
        return Err(Error::WeakExtractor { accuracy, floor: config.accuracy_floor });
    }

    // drop the classifier: copy the encoder's parameters into a head-free store
    let (mut frozen, frozen_encoder, _) = build(config, config.seed, false)?;
    for id in frozen.ids().collect::<Vec<_>>() {
        let src = store.id(frozen.name(id)).expect("same parameter names");
        frozen.set(id, store.get(src).clone())?;
    }
    Ok(FeatureExtractor {
        config: config.clone(),
        store: frozen,
        encoder: frozen_encoder,
        provenance: ExtractorProvenance {
            dataset: dataset.to_string(),
            task: "style-family classification".into(),
            epochs: config.epochs,
            val_accuracy: accuracy,
        },
    })
}

impl FeatureExtractor {
    pub fn config(&self) -> &ExtractorConfig {
        &self.config
    }

    pub fn provenance(&self) -> &ExtractorProvenance {
        &self.provenance
    }

    pub fn parameters(&self) -> &ParameterStore<f32> {
        &self.store
    }

    pub fn tap_count(&self) -> usize {
        self.encoder.point_layers.len()
    }

    /// Raw per-point activations of every tap, `n × C_l` each.
    pub fn activations(&self, cloud: &PointCloud) -> Result<Vec<Mat<f32>>> {
        let mut fw = Forward::eval(&self.store);
        let x = fw.input(cloud.to_mat());
        let taps = self.encoder.forward_taps(&mut fw, x, cloud.len())?;
        Ok(taps.taps.iter().map(|&t| fw.value(t).clone()).collect())
    }

    /// Activations for equally sized clouds in one pass: per cloud, per tap.
    pub(crate) fn batch_activations(&self, clouds: &[&PointCloud]) -> Result<Vec<Vec<Mat<f32>>>> {
        let n = clouds[0].len();
        if clouds.iter().any(|c| c.len() != n) {
            return clouds.iter().map(|c| self.activations(c)).collect();
        }
        let mut fw = Forward::eval(&self.store);
        let (m, _) = stack(clouds, 0);
        let x = fw.input(m);
        let taps = self.encoder.forward_taps(&mut fw, x, n)?;
        let mut out: Vec<Vec<Mat<f32>>> = vec![Vec::new(); clouds.len()];
        for &t in &taps.taps {
            let v = fw.value(t);
            for (b, slot) in out.iter_mut().enumerate() {
                slot.push(Mat::from_vec(n, v.cols, v.data[b * n * v.cols..(b + 1) * n * v.cols].to_vec()));
            }
        }
        Ok(out)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let snap = ExtractorSnapshot { config: self.config.clone(), provenance: self.provenance.clone() };
        let text = toml::to_string(&snap).map_err(|e| Error::Config(e.to_string()))?;
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(EXTRACTOR_MAGIC);
        w.u32(EXTRACTOR_VERSION);
        w.bytes(text.as_bytes());
        write_params(&mut w, &self.store);
        Ok(w.0)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        if buf.len() < 4 || &buf[..4] != EXTRACTOR_MAGIC {
            return Err(Error::NotACheckpoint);
        }
        let mut r = Reader { buf, pos: 4 };
        let version = r.u32()?;
        if version != EXTRACTOR_VERSION {
            return Err(Error::CheckpointVersion { found: version, expected: EXTRACTOR_VERSION });
        }
        let snap: ExtractorSnapshot =
            toml::from_str(&r.string()?).map_err(|e| Error::CorruptCheckpoint(format!("extractor config: {e}")))?;
        snap.config.validate()?;
        let (mut store, encoder, _) = build(&snap.config, 0, false)?;
        read_params(&mut r, &mut store)?;
        if r.pos != buf.len() {
            return Err(Error::CorruptCheckpoint(format!("{} trailing bytes", buf.len() - r.pos)));
        }
        Ok(Self { config: snap.config, store, encoder, provenance: snap.provenance })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}
