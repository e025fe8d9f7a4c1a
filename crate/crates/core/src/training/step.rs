use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::adam::{adam_update, grad_norm_sq, AdamState};
use super::TrainConfig;
use crate::autodiff::{Mat, Var};
use crate::error::{Error, Result};
use crate::losses::{
    loss_adversarial_discriminator, loss_adversarial_generator, loss_cycle, loss_latent, loss_reconstruction,
    loss_total, LossReport, LossWeights,
};
use crate::model::StyleTransferModel;
use crate::nets::adanorm::apply_stat_updates;
use crate::nets::{Domain, Forward, UvSampling};

/// SplitMix64 finalizer; derives independent stream seeds from counters.
pub fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Optimizer state of both parameter groups.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizers {
    pub generator: AdamState<f32>,
    pub discriminator: AdamState<f32>,
}

impl Optimizers {
    pub fn new(model: &StyleTransferModel<f32>) -> Self {
        Self {
            generator: AdamState::new(&model.store, model.generator_ids()),
            discriminator: AdamState::new(&model.store, model.discriminator_ids()),
        }
    }
}

/// One unpaired batch per domain: `B` clouds of `n` points each, stacked.
pub struct Batch {
    pub points: [Mat<f32>; 2],
    pub n: [usize; 2],
    pub size: usize,
}

impl Batch {
    pub fn new(x1: &[&crate::geometry::PointCloud], x2: &[&crate::geometry::PointCloud]) -> Result<Self> {
        if x1.is_empty() || x2.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if x1.len() != x2.len() {
            return Err(Error::LengthMismatch(x1.len(), x2.len()));
        }
        let stack = |xs: &[&crate::geometry::PointCloud]| -> Result<(Mat<f32>, usize)> {
            let n = xs[0].len();
            if xs.iter().any(|c| c.len() != n) {
                return Err(Error::ShapeMismatch("clouds in a batch must share a point count".into()));
            }
            let data = xs.iter().flat_map(|c| c.to_mat::<f32>().data).collect();
            Ok((Mat::from_vec(xs.len() * n, 3, data), n))
        };
        let (p1, n1) = stack(x1)?;
        let (p2, n2) = stack(x2)?;
        Ok(Self { points: [p1, p2], n: [n1, n2], size: x1.len() })
    }
}

fn prior_codes(batch: usize, dim: usize, seed: u64) -> Mat<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Mat::from_vec(batch, dim, (0..batch * dim).map(|_| rng.sample::<f64, _>(StandardNormal) as f32).collect())
}

/// Translations `x_{1→2}`, `x_{2→1}` (plus prior-styled ones in multimodal
/// mode) as plain values, for the discriminator phase.
fn sample_fakes(model: &StyleTransferModel<f32>, batch: &Batch, seed: u64) -> Result<[Mat<f32>; 2]> {
    let mut fw = Forward::train_detached(&model.store, mix(seed, 11));
    let p = [fw.input(batch.points[0].clone()), fw.input(batch.points[1].clone())];
    let c = [model.content_vars(&mut fw, p[0], batch.n[0])?, model.content_vars(&mut fw, p[1], batch.n[1])?];
    let s = [
        model.style_vars(&mut fw, Domain::One, p[0], batch.n[0])?,
        model.style_vars(&mut fw, Domain::Two, p[1], batch.n[1])?,
    ];
    let mut fakes = Vec::new();
    for dst in Domain::BOTH {
        let src = dst.other().index();
        let mut parts =
            vec![model.decode_vars(&mut fw, c[src], s[dst.index()], dst, UvSampling::Random(mix(seed, 12 + dst.index() as u64)))?];
        if model.config.multimodal {
            let prior = fw.input(prior_codes(batch.size, model.config.style_dim, mix(seed, 14 + dst.index() as u64)));
            parts.push(model.decode_vars(&mut fw, c[src], prior, dst, UvSampling::Random(mix(seed, 16 + dst.index() as u64)))?);
        }
        let all = if parts.len() == 1 { parts[0] } else { fw.graph.concat_rows(&parts) };
        fakes.push(fw.value(all).clone());
    }
    let f2 = fakes.pop().expect("two domains");
    let f1 = fakes.pop().expect("two domains");
    Ok([f1, f2])
}

fn clip_scale(norm_sq: f64, clip: Option<f64>) -> f64 {
    match clip {
        Some(c) if norm_sq.sqrt() > c => c / norm_sq.sqrt(),
        _ => 1.0,
    }
}

fn finite_or_diverge(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Divergence(format!("{name} loss is not finite")))
    }
}

/// One discriminator update followed by one generator update on the same
/// batch. `weights` may differ from the configured ones during warm-up.
pub fn train_step(
    model: &mut StyleTransferModel<f32>,
    opt: &mut Optimizers,
    batch: &Batch,
    config: &TrainConfig,
    weights: &LossWeights,
    lr: f64,
    seed: u64,
) -> Result<LossReport> {
    let multimodal = model.config.multimodal;
    let form = config.adversarial_form;
    let mut report = LossReport::default();
    let n_out = model.config.n_points;

    // discriminators, on real shapes and constant translations
    if weights.adv > 0.0 {
        let fakes = sample_fakes(model, batch, seed)?;
        let mut fw = Forward::train(&model.store, mix(seed, 21));
        let mut total = None;
        for d in Domain::BOTH {
            let real = fw.input(batch.points[d.index()].clone());
            let fake = fw.input(fakes[d.index()].clone());
            let sr = model.score_vars(&mut fw, d, real, batch.n[d.index()])?;
            let sf = model.score_vars(&mut fw, d, fake, n_out)?;
            let l = loss_adversarial_discriminator(&mut fw.graph, sr, sf, form)?;
            report.disc[d.index()] = Some(finite_or_diverge(&format!("disc_{}", d.tag()), fw.graph.scalar(l))?);
            total = Some(match total {
                None => l,
                Some(t) => fw.graph.add(t, l),
            });
        }
        let grads = fw.graph.backward(total.expect("two domains"))?;
        drop(fw);
        let scale = clip_scale(grad_norm_sq(&grads, &opt.discriminator.ids), config.grad_clip);
        adam_update(&mut model.store, &grads, &mut opt.discriminator, lr, scale)?;
    }

    // generator side
    let mut fw = Forward::train(&model.store, mix(seed, 31));
    let uv = |k: u64| UvSampling::Random(mix(seed, 40 + k));
    let p = [fw.input(batch.points[0].clone()), fw.input(batch.points[1].clone())];
    let n = batch.n;
    let c = [model.content_vars(&mut fw, p[0], n[0])?, model.content_vars(&mut fw, p[1], n[1])?];
    let s = [
        model.style_vars(&mut fw, Domain::One, p[0], n[0])?,
        model.style_vars(&mut fw, Domain::Two, p[1], n[1])?,
    ];
    let mut terms: Vec<(f64, Var)> = Vec::new();

    if weights.rec > 0.0 {
        for d in Domain::BOTH {
            let i = d.index();
            let rec = model.decode_vars(&mut fw, c[i], s[i], d, uv(i as u64))?;
            let l = loss_reconstruction(&mut fw.graph, p[i], rec, n[i], n_out);
            report.rec[i] = Some(fw.graph.scalar(l));
            terms.push((weights.rec, l));
        }
    }

    // x_{src→dst} decoded with a prior style code, shared by the adversarial
    // and latent terms
    let latent = multimodal && (weights.latent_content > 0.0 || weights.latent_style > 0.0);
    let mut prior_styled: [Option<(Var, Var)>; 2] = [None, None];
    if multimodal && (weights.adv > 0.0 || latent) {
        for src in Domain::BOTH {
            let dst = src.other();
            let prior = fw.input(prior_codes(batch.size, model.config.style_dim, mix(seed, 50 + dst.index() as u64)));
            let sampled = model.decode_vars(&mut fw, c[src.index()], prior, dst, uv(4 + src.index() as u64))?;
            prior_styled[src.index()] = Some((prior, sampled));
        }
    }

    if weights.adv > 0.0 || weights.cycle > 0.0 {
        for src in Domain::BOTH {
            let dst = src.other();
            let (si, di) = (src.index(), dst.index());
            // x_{src→dst}: content of the source, style of the other batch
            let translated = model.decode_vars(&mut fw, c[si], s[di], dst, uv(2 + si as u64))?;
            let mut fakes = vec![translated];
            if let Some((_, sampled)) = prior_styled[si] {
                fakes.push(sampled);
            }
            if weights.adv > 0.0 {
                let all = if fakes.len() == 1 { fakes[0] } else { fw.graph.concat_rows(&fakes) };
                let score = model.score_vars(&mut fw, dst, all, n_out)?;
                let l = loss_adversarial_generator(&mut fw.graph, score, form)?;
                report.adv[di] = Some(fw.graph.scalar(l));
                terms.push((weights.adv, l));
            }
            if weights.cycle > 0.0 {
                let back_content = model.content_vars(&mut fw, translated, n_out)?;
                let cycled = model.decode_vars(&mut fw, back_content, s[si], src, uv(6 + si as u64))?;
                let l = loss_cycle(&mut fw.graph, p[si], cycled, n[si], n_out);
                report.cycle[si] = Some(fw.graph.scalar(l));
                terms.push((weights.cycle, l));
            }
        }
    }

    if latent {
        for src in Domain::BOTH {
            let dst = src.other();
            let (si, di) = (src.index(), dst.index());
            let (prior, sampled) = prior_styled[si].expect("decoded above");
            if weights.latent_content > 0.0 {
                let recovered = model.content_vars(&mut fw, sampled, n_out)?;
                let l = loss_latent(&mut fw.graph, recovered, c[si])?;
                report.latent_content[si] = Some(fw.graph.scalar(l));
                terms.push((weights.latent_content, l));
            }
            if weights.latent_style > 0.0 {
                let recovered = model.style_vars(&mut fw, dst, sampled, n_out)?;
                let l = loss_latent(&mut fw.graph, recovered, prior)?;
                report.latent_style[di] = Some(fw.graph.scalar(l));
                terms.push((weights.latent_style, l));
            }
        }
    }

    if let Some(name) = report.first_non_finite(multimodal) {
        return Err(Error::Divergence(format!("{name} loss is not finite")));
    }
    let (gen_total, disc_total) = loss_total(&report, weights, multimodal)?;
    report.total_generator = gen_total;
    report.total_discriminator = disc_total;
    if terms.is_empty() {
        return Ok(report);
    }
    let mut total = None;
    for (w, l) in terms {
        let scaled = fw.graph.scale(l, w);
        total = Some(match total {
            None => scaled,
            Some(t) => fw.graph.add(t, scaled),
        });
    }
    let grads = fw.graph.backward(total.expect("non-empty"))?;
    let stats = std::mem::take(&mut fw.stat_updates);
    drop(fw);
    let scale = clip_scale(grad_norm_sq(&grads, &opt.generator.ids), config.grad_clip);
    adam_update(&mut model.store, &grads, &mut opt.generator, lr, scale)?;
    apply_stat_updates(&mut model.store, &stats);
    if let Some(name) = model.store.first_non_finite() {
        return Err(Error::Divergence(format!("parameter {name} is not finite")));
    }
    Ok(report)
}
