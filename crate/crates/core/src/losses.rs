//! Reconstruction, adversarial, cycle and latent losses, and the weighted
//! objective that combines them.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Real, Var};
use crate::error::{Error, Result};
use crate::geometry::{self, PointCloud};

/// Weights of the generator-side objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub rec: f64,
    pub adv: f64,
    pub cycle: f64,
    pub latent_content: f64,
    pub latent_style: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { rec: 1.0, adv: 0.1, cycle: 1.0, latent_content: 0.1, latent_style: 0.1 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("rec", self.rec),
            ("adv", self.adv),
            ("cycle", self.cycle),
            ("latent_content", self.latent_content),
            ("latent_style", self.latent_style),
        ] {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Config(format!("loss weight {name} must be finite and non-negative")));
            }
        }
        Ok(())
    }

    /// Reconstruction only: the adaptive-normalization autoencoder baseline.
    pub fn reconstruction_only() -> Self {
        Self { rec: 1.0, adv: 0.0, cycle: 0.0, latent_content: 0.0, latent_style: 0.0 }
    }
}

/// Form of the adversarial objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AdversarialForm {
    #[default]
    LeastSquares,
    Log,
}

/// Mean over instances of the per-instance bidirectional Chamfer distance.
/// `target` holds `B` blocks of `seg_target` rows, `generated` `B` blocks
/// of `seg_generated`.
pub fn loss_reconstruction<S: Real>(
    g: &mut Graph<S>,
    target: Var,
    generated: Var,
    seg_target: usize,
    seg_generated: usize,
) -> Var {
    let per_instance = g.chamfer(target, generated, seg_target, seg_generated);
    g.mean(per_instance)
}

/// Chamfer between points of the source shape and its cycle translation.
pub fn loss_cycle<S: Real>(
    g: &mut Graph<S>,
    source: Var,
    cycled: Var,
    seg_source: usize,
    seg_cycled: usize,
) -> Var {
    loss_reconstruction(g, source, cycled, seg_source, seg_cycled)
}

/// Value form of the reconstruction loss for a single pair.
pub fn reconstruction_value(target: &PointCloud, generated: &PointCloud) -> f64 {
    geometry::chamfer(target, generated)
}

fn non_empty<S: Real>(g: &Graph<S>, v: Var) -> Result<()> {
    if g.value(v).is_empty() {
        Err(Error::EmptyBatch)
    } else {
        Ok(())
    }
}

/// Generator side: `mean((D(fake) - 1)²)`, or `mean(-log σ(D(fake)))`.
pub fn loss_adversarial_generator<S: Real>(
    g: &mut Graph<S>,
    score_fake: Var,
    form: AdversarialForm,
) -> Result<Var> {
    non_empty(g, score_fake)?;
    Ok(match form {
        AdversarialForm::LeastSquares => {
            let d = g.add_scalar(score_fake, -1.0);
            let sq = g.square(d);
            g.mean(sq)
        }
        AdversarialForm::Log => {
            let neg = g.scale(score_fake, -1.0);
            let sp = g.softplus(neg);
            g.mean(sp)
        }
    })
}

/// Discriminator side: `mean((D(real) - 1)²) + mean(D(fake)²)`, or the
/// binary cross-entropy equivalent. Callers pass scores of detached fakes.
pub fn loss_adversarial_discriminator<S: Real>(
    g: &mut Graph<S>,
    score_real: Var,
    score_fake: Var,
    form: AdversarialForm,
) -> Result<Var> {
    non_empty(g, score_real)?;
    non_empty(g, score_fake)?;
    let (real_term, fake_term) = match form {
        AdversarialForm::LeastSquares => {
            let d = g.add_scalar(score_real, -1.0);
            let r = g.square(d);
            let f = g.square(score_fake);
            (r, f)
        }
        AdversarialForm::Log => {
            let neg = g.scale(score_real, -1.0);
            let r = g.softplus(neg);
            let f = g.softplus(score_fake);
            (r, f)
        }
    };
    let rm = g.mean(real_term);
    let fm = g.mean(fake_term);
    Ok(g.add(rm, fm))
}

/// Mean absolute difference between two code batches.
pub fn loss_latent<S: Real>(g: &mut Graph<S>, recovered: Var, reference: Var) -> Result<Var> {
    let a = g.shape(recovered);
    let b = g.shape(reference);
    if a != b {
        return Err(Error::LengthMismatch(a.0 * a.1, b.0 * b.1));
    }
    let d = g.sub(recovered, reference);
    let abs = g.abs(d);
    Ok(g.mean(abs))
}

/// Value form of the latent loss.
pub fn latent_value(recovered: &[f64], reference: &[f64]) -> Result<f64> {
    if recovered.len() != reference.len() {
        return Err(Error::LengthMismatch(recovered.len(), reference.len()));
    }
    if recovered.is_empty() {
        return Err(Error::EmptyBatch);
    }
    Ok(recovered.iter().zip(reference).map(|(a, b)| (a - b).abs()).sum::<f64>() / recovered.len() as f64)
}

/// Per-term values of one training step. Terms whose weight is zero are
/// not evaluated and stay `None`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossReport {
    pub rec: [Option<f64>; 2],
    pub adv: [Option<f64>; 2],
    pub cycle: [Option<f64>; 2],
    pub latent_content: [Option<f64>; 2],
    pub latent_style: [Option<f64>; 2],
    pub disc: [Option<f64>; 2],
    pub total_generator: f64,
    pub total_discriminator: f64,
}

fn weighted_pair(
    pair: [Option<f64>; 2],
    weight: f64,
    name: &'static str,
) -> Result<f64> {
    if weight == 0.0 {
        return Ok(0.0);
    }
    match pair {
        [Some(a), Some(b)] => Ok(weight * (a + b)),
        _ => Err(Error::MissingTerm(name)),
    }
}

/// Weighted generator total and summed discriminator total.
pub fn loss_total(report: &LossReport, weights: &LossWeights, multimodal: bool) -> Result<(f64, f64)> {
    let mut gen = weighted_pair(report.rec, weights.rec, "rec")?
        + weighted_pair(report.adv, weights.adv, "adv")?
        + weighted_pair(report.cycle, weights.cycle, "cycle")?;
    if multimodal {
        gen += weighted_pair(report.latent_content, weights.latent_content, "latent_c")?
            + weighted_pair(report.latent_style, weights.latent_style, "latent_s")?;
    }
    let disc = if weights.adv > 0.0 {
        match report.disc {
            [Some(a), Some(b)] => a + b,
            _ => return Err(Error::MissingTerm("disc")),
        }
    } else {
        report.disc.iter().flatten().sum()
    };
    Ok((gen, disc))
}

impl LossReport {
    /// CSV column names for the loss terms, in serialization order.
    pub fn columns(multimodal: bool) -> Vec<&'static str> {
        let mut cols = vec!["rec_1", "rec_2", "adv_1", "adv_2", "cycle_1", "cycle_2"];
        if multimodal {
            cols.extend(["latent_c_1", "latent_c_2", "latent_s_1", "latent_s_2"]);
        }
        cols.extend(["disc_1", "disc_2", "total_generator", "total_discriminator"]);
        cols
    }

    /// Values in [`LossReport::columns`] order; unevaluated terms are `None`.
    pub fn values(&self, multimodal: bool) -> Vec<Option<f64>> {
        let mut v: Vec<Option<f64>> = Vec::new();
        v.extend(self.rec);
        v.extend(self.adv);
        v.extend(self.cycle);
        if multimodal {
            v.extend(self.latent_content);
            v.extend(self.latent_style);
        }
        v.extend(self.disc);
        v.push(Some(self.total_generator));
        v.push(Some(self.total_discriminator));
        v
    }

    /// Comma-separated values; empty cells for unevaluated terms.
    pub fn csv_fields(&self, multimodal: bool) -> Vec<String> {
        self.values(multimodal)
            .into_iter()
            .map(|v| v.map(|x| format!("{x:e}")).unwrap_or_default())
            .collect()
    }

    /// First non-finite term, named by its CSV column.
    pub fn first_non_finite(&self, multimodal: bool) -> Option<&'static str> {
        Self::columns(multimodal)
            .into_iter()
            .zip(self.values(multimodal))
            .find(|(_, v)| v.is_some_and(|x| !x.is_finite()))
            .map(|(c, _)| c)
    }
}
