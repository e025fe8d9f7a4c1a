//! Perceptual distance between shapes, the style transfer score, and the
//! diversity score of multimodal translation.

mod extractor;

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use extractor::{
    fit_feature_extractor, fit_on, ExtractorConfig, ExtractorProvenance, FeatureExtractor, EXTRACTOR_MAGIC,
    EXTRACTOR_VERSION,
};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::model::{perturb_style, StyleTransferModel};
use crate::nets::{ContentCode, Domain, StyleCode};
use crate::training::{mix, reconstruction_chamfer};

/// Seed shared by both sides when clouds are resampled to a common count.
pub const LPIPS_RESAMPLE_SEED: u64 = 0;
const NORM_EPS: f64 = 1e-10;

/// Per tap: the mean over points of channel-normalized activations.
#[derive(Debug, Clone, PartialEq)]
pub struct CloudFeatures(Vec<Vec<f64>>);

impl CloudFeatures {
    fn from_taps(taps: &[crate::autodiff::Mat<f32>]) -> Self {
        let layers = taps
            .iter()
            .map(|a| {
                let (n, c) = a.shape();
                let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n); c];
                for r in 0..n {
                    let row = a.row(r);
                    let norm = row.iter().map(|&v| f64::from(v).powi(2)).sum::<f64>().sqrt() + NORM_EPS;
                    for (k, &v) in row.iter().enumerate() {
                        cols[k].push(f64::from(v) / norm);
                    }
                }
                // summing in sorted order makes the mean independent of point order
                cols.into_iter()
                    .map(|mut v| {
                        v.sort_by(f64::total_cmp);
                        v.iter().sum::<f64>() / n as f64
                    })
                    .collect()
            })
            .collect();
        Self(layers)
    }

    pub fn layers(&self) -> &[Vec<f64>] {
        &self.0
    }

    /// Squared L2 between per-tap means, averaged over taps.
    pub fn distance(&self, other: &CloudFeatures) -> Result<f64> {
        if self.0.len() != other.0.len() {
            return Err(Error::LengthMismatch(self.0.len(), other.0.len()));
        }
        let mut total = 0.0;
        for (a, b) in self.0.iter().zip(&other.0) {
            if a.len() != b.len() {
                return Err(Error::LengthMismatch(a.len(), b.len()));
            }
            total += a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
        }
        Ok(total / self.0.len() as f64)
    }
}

impl FeatureExtractor {
    pub fn features(&self, cloud: &PointCloud) -> Result<CloudFeatures> {
        Ok(CloudFeatures::from_taps(&self.activations(cloud)?))
    }

    /// Features of many clouds, batched where point counts agree.
    pub fn features_batch(&self, clouds: &[&PointCloud]) -> Result<Vec<CloudFeatures>> {
        let mut out = Vec::with_capacity(clouds.len());
        for chunk in clouds.chunks(64) {
            if chunk.is_empty() {
                continue;
            }
            out.extend(self.batch_activations(chunk)?.iter().map(|t| CloudFeatures::from_taps(t)));
        }
        Ok(out)
    }
}

/// Perceptual distance between two shapes under a frozen extractor.
/// Clouds of unequal size are first resampled to the smaller count.
pub fn lpips3d(f: &FeatureExtractor, x: &PointCloud, y: &PointCloud) -> Result<f64> {
    let n = x.len().min(y.len());
    let (x, y) = (x.resample(n, LPIPS_RESAMPLE_SEED), y.resample(n, LPIPS_RESAMPLE_SEED));
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let feats = f.features_batch(&[&x, &y])?;
    feats[0].distance(&feats[1])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StsBreakdown {
    pub d_source_aug: f64,
    pub d_source_rec: f64,
    pub d_aug_target: f64,
    pub d_rec_target: f64,
    pub delta_source: f64,
    pub delta_target: f64,
    pub sts: f64,
}

impl StsBreakdown {
    pub fn from_distances(d_source_aug: f64, d_source_rec: f64, d_aug_target: f64, d_rec_target: f64) -> Self {
        let delta_source = d_source_aug - d_source_rec;
        let delta_target = d_aug_target - d_rec_target;
        Self { d_source_aug, d_source_rec, d_aug_target, d_rec_target, delta_source, delta_target, sts: delta_source - delta_target }
    }
}

/// Scores one translation: positive when `augmented` moved away from
/// `source` and toward `target`, relative to the two reconstructions.
pub fn sts(
    f: &FeatureExtractor,
    source: &PointCloud,
    target: &PointCloud,
    reconstruction_src: &PointCloud,
    reconstruction_tgt: &PointCloud,
    augmented: &PointCloud,
) -> Result<StsBreakdown> {
    Ok(StsBreakdown::from_distances(
        lpips3d(f, source, augmented)?,
        lpips3d(f, source, reconstruction_src)?,
        lpips3d(f, augmented, target)?,
        lpips3d(f, reconstruction_tgt, target)?,
    ))
}

/// Mean and standard error of the per-pair scores of one direction.
#[derive(Debug, Clone, PartialEq)]
pub struct StsSummary {
    pub src: Domain,
    pub mean: f64,
    pub std_error: f64,
    pub pairs: Vec<StsBreakdown>,
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean score over both directions and its standard error.
///
/// A direction's reconstruction distances reappear in the opposite direction
/// with the other sign, so averaging the two direction means cancels them and
/// leaves only how far the translations sit from their sources versus their
/// targets.
pub fn combined_sts(sts: &[StsSummary; 2]) -> (f64, f64) {
    let mean = 0.5 * (sts[0].mean + sts[1].mean);
    let se = 0.5 * (sts[0].std_error.powi(2) + sts[1].std_error.powi(2)).sqrt();
    (mean, se)
}

fn common_count<'a>(clouds: &'a [PointCloud], n: usize) -> Vec<std::borrow::Cow<'a, PointCloud>> {
    clouds
        .iter()
        .map(|c| {
            if c.len() == n {
                std::borrow::Cow::Borrowed(c)
            } else {
                std::borrow::Cow::Owned(c.resample(n, LPIPS_RESAMPLE_SEED))
            }
        })
        .collect()
}

/// Round-robin protocol: source `i` takes its style from target
/// `(i + offset) mod |targets|`, with a seed-derived offset.
pub fn evaluate_sts(
    model: &StyleTransferModel<f32>,
    f: &FeatureExtractor,
    sources: &[PointCloud],
    src: Domain,
    targets: &[PointCloud],
    seed: u64,
) -> Result<StsSummary> {
    if sources.is_empty() || targets.is_empty() {
        return Err(Error::EmptyFamily(format!("evaluation set of family {}", if sources.is_empty() { src.tag() } else { src.other().tag() })));
    }
    let dst = src.other();
    let n = model.config.n_points;
    let sources = common_count(sources, n);
    let targets = common_count(targets, n);
    let offset = (mix(seed, 0x575) % targets.len() as u64) as usize;
    let mut pairs = Vec::with_capacity(sources.len());
    for start in (0..sources.len()).step_by(16) {
        let idx: Vec<usize> = (start..(start + 16).min(sources.len())).collect();
        let xs: Vec<&PointCloud> = idx.iter().map(|&i| sources[i].as_ref()).collect();
        let ys: Vec<&PointCloud> = idx.iter().map(|&i| targets[(i + offset) % targets.len()].as_ref()).collect();
        let cs = model.encode_batch(&xs, src)?;
        let ct = model.encode_batch(&ys, dst)?;
        let mut items: Vec<(&ContentCode, &StyleCode)> = Vec::new();
        for k in 0..idx.len() {
            items.push((&cs[k].0, &cs[k].1));
            items.push((&ct[k].0, &ct[k].1));
            items.push((&cs[k].0, &ct[k].1));
        }
        let outs = model.decode_batch(&items)?;
        let mut all: Vec<&PointCloud> = Vec::new();
        for k in 0..idx.len() {
            all.extend([xs[k], ys[k], &outs[3 * k], &outs[3 * k + 1], &outs[3 * k + 2]]);
        }
        let feats = f.features_batch(&all)?;
        for q in feats.chunks(5) {
            let (x, y, rx, ry, aug) = (&q[0], &q[1], &q[2], &q[3], &q[4]);
            pairs.push(StsBreakdown::from_distances(x.distance(aug)?, x.distance(rx)?, aug.distance(y)?, ry.distance(y)?));
        }
    }
    let scores: Vec<f64> = pairs.iter().map(|p| p.sts).collect();
    let (mean, std_error) = mean_and_se(&scores);
    Ok(StsSummary { src, mean, std_error, pairs })
}

/// Where the paired style codes of the diversity score come from.
#[derive(Debug, Clone, Copy)]
pub enum StyleSource<'a> {
    /// Independent draws from the family's standard-normal prior.
    Prior,
    /// Two perturbations `s + σ·ε` of an encoded reference style.
    Noise { sigma: f64, references: &'a [PointCloud] },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiversityConfig {
    pub n_samples: usize,
    pub pairs_per_sample: usize,
    pub seed: u64,
}

impl Default for DiversityConfig {
    fn default() -> Self {
        Self { n_samples: 100, pairs_per_sample: 19, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiversityReport {
    pub mean: f64,
    pub pairs: usize,
}

/// Mean perceptual distance between two translations of the same content
/// into `family` under independently drawn styles. `contents` are the
/// content references (shapes of the other family).
pub fn diversity(
    model: &StyleTransferModel<f32>,
    f: &FeatureExtractor,
    family: Domain,
    contents: &[PointCloud],
    source: StyleSource<'_>,
    config: &DiversityConfig,
) -> Result<DiversityReport> {
    if contents.is_empty() {
        return Err(Error::EmptyFamily(format!("content references for family {}", family.tag())));
    }
    if config.n_samples == 0 || config.pairs_per_sample == 0 {
        return Err(Error::OutOfRange("diversity needs at least one sample and one pair".into()));
    }
    match source {
        StyleSource::Prior if !model.config.multimodal => return Err(Error::NotMultimodal),
        StyleSource::Noise { references, .. } if references.is_empty() => {
            return Err(Error::EmptyFamily(format!("style references for family {}", family.tag())))
        }
        _ => {}
    }
    let mut order: Vec<usize> = (0..contents.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(config.seed, 0xD1)));
    let mut total = 0.0;
    let mut count = 0usize;
    for k in 0..config.n_samples {
        let content = model.encode_content(&contents[order[k % order.len()]])?;
        let base = match source {
            StyleSource::Prior => None,
            StyleSource::Noise { references, .. } => {
                let r = &references[(k + mix(config.seed, 0xD2) as usize % references.len()) % references.len()];
                Some(model.encode(r, family)?.1)
            }
        };
        let mut styles = Vec::with_capacity(2 * config.pairs_per_sample);
        for j in 0..2 * config.pairs_per_sample {
            let seed = mix(mix(config.seed, k as u64), j as u64);
            styles.push(match (&source, &base) {
                (StyleSource::Noise { sigma, .. }, Some(s)) => perturb_style(s, *sigma, seed)?,
                _ => model.sample_style(family, seed)?,
            });
        }
        let items: Vec<(&ContentCode, &StyleCode)> = styles.iter().map(|s| (&content, s)).collect();
        let outs = model.decode_batch(&items)?;
        let refs: Vec<&PointCloud> = outs.iter().collect();
        let feats = f.features_batch(&refs)?;
        for pair in feats.chunks(2) {
            total += pair[0].distance(&pair[1])?;
            count += 1;
        }
    }
    Ok(DiversityReport { mean: total / count as f64, pairs: count })
}

/// Everything the `evaluate` command reports.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    /// Indexed by source family: `[1→2, 2→1]`.
    pub sts: [StsSummary; 2],
    pub diversity: [Option<DiversityReport>; 2],
    pub chamfer_rec: [f64; 2],
    pub extractor: ExtractorProvenance,
}

/// Evaluates translation quality on `val`; diversity (multimodal models
/// only) draws content references from `pool`.
pub fn evaluate(
    model: &StyleTransferModel<f32>,
    f: &FeatureExtractor,
    val: [&[PointCloud]; 2],
    pool: [&[PointCloud]; 2],
    diversity_config: &DiversityConfig,
    seed: u64,
) -> Result<MetricReport> {
    let sts = [
        evaluate_sts(model, f, val[0], Domain::One, val[1], seed)?,
        evaluate_sts(model, f, val[1], Domain::Two, val[0], seed)?,
    ];
    let mut div = [None, None];
    if model.config.multimodal {
        for d in Domain::BOTH {
            div[d.index()] = Some(diversity(model, f, d, pool[d.other().index()], StyleSource::Prior, diversity_config)?);
        }
    }
    let chamfer_rec = [
        reconstruction_chamfer(model, val[0], Domain::One)?,
        reconstruction_chamfer(model, val[1], Domain::Two)?,
    ];
    Ok(MetricReport { sts, diversity: div, chamfer_rec, extractor: f.provenance().clone() })
}

impl MetricReport {
    pub const COLUMNS: [&'static str; 12] = [
        "sts_1to2",
        "sts_1to2_se",
        "sts_2to1",
        "sts_2to1_se",
        "sts_mean",
        "sts_mean_se",
        "diversity_1",
        "diversity_2",
        "chamfer_rec_1",
        "chamfer_rec_2",
        "pairs_1to2",
        "pairs_2to1",
    ];

    /// Header plus one row; absent diversity values are empty fields.
    pub fn to_csv(&self) -> String {
        let div = |d: &Option<DiversityReport>| d.map(|r| format!("{:e}", r.mean)).unwrap_or_default();
        let (mean, se) = combined_sts(&self.sts);
        let row = [
            format!("{:e}", self.sts[0].mean),
            format!("{:e}", self.sts[0].std_error),
            format!("{:e}", self.sts[1].mean),
            format!("{:e}", self.sts[1].std_error),
            format!("{mean:e}"),
            format!("{se:e}"),
            div(&self.diversity[0]),
            div(&self.diversity[1]),
            format!("{:e}", self.chamfer_rec[0]),
            format!("{:e}", self.chamfer_rec[1]),
            self.sts[0].pairs.len().to_string(),
            self.sts[1].pairs.len().to_string(),
        ];
        format!("{}\n{}\n", Self::COLUMNS.join(","), row.join(","))
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for st in &self.sts {
            let _ = writeln!(
                s,
                "STS {}→{}: {:.5} ± {:.5} (n = {})",
                st.src.tag(),
                st.src.other().tag(),
                st.mean,
                st.std_error,
                st.pairs.len()
            );
        }
        let (mean, se) = combined_sts(&self.sts);
        let _ = writeln!(s, "STS, both directions: {mean:.5} ± {se:.5}");
        for d in Domain::BOTH {
            match &self.diversity[d.index()] {
                Some(r) => {
                    let _ = writeln!(s, "diversity into family {}: {:.5} over {} pairs", d.tag(), r.mean, r.pairs);
                }
                None => {
                    let _ = writeln!(s, "diversity into family {}: n/a (model is not multimodal)", d.tag());
                }
            }
        }
        for d in Domain::BOTH {
            let _ = writeln!(s, "reconstruction Chamfer, family {}: {:.5}", d.tag(), self.chamfer_rec[d.index()]);
        }
        let e = &self.extractor;
        let _ = writeln!(s, "extractor: {} on {} ({} epochs, held-out accuracy {:.3})", e.task, e.dataset, e.epochs, e.val_accuracy);
        s
    }
}
