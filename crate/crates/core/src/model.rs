//! The two-domain style transfer system: one shared content encoder, and a
//! style encoder, mapping network and discriminator per domain around a
//! single adaptive folding decoder.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Mat, ParamId, Real, Var};
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, TriangleMesh};
use crate::nets::{
    AdaNormParams, AdaNormVars, ContentCode, Discriminator, Domain, FoldingDecoder, Forward, Group,
    MappingNetwork, NormMode, ParameterStore, PointEncoder, StyleCode, UvSampling,
};

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub content_dim: usize,
    pub style_dim: usize,
    /// Per-point hidden widths of every encoder before its output layer.
    pub encoder_widths: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub primitives: usize,
    pub n_points: usize,
    pub mapping_hidden: usize,
    pub mapping_dropout: f64,
    pub disc_bottleneck: usize,
    pub disc_hidden: Vec<usize>,
    pub disc_dropout: f64,
    pub norm_mode: NormMode,
    pub norm_eps: f64,
    pub multimodal: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            content_dim: 1024,
            style_dim: 512,
            encoder_widths: vec![64, 128],
            decoder_hidden: vec![512, 256, 128],
            primitives: 4,
            n_points: 2500,
            mapping_hidden: 512,
            mapping_dropout: 0.2,
            disc_bottleneck: 1024,
            disc_hidden: vec![512, 256, 128],
            disc_dropout: 0.2,
            norm_mode: NormMode::AdaptiveBatch,
            norm_eps: 1e-5,
            multimodal: false,
        }
    }
}

impl ModelConfig {
    /// Reduced dimensions that train in minutes on one CPU core.
    pub fn desk() -> Self {
        Self {
            content_dim: 64,
            style_dim: 32,
            encoder_widths: vec![32, 64],
            decoder_hidden: vec![128, 64, 32],
            primitives: 4,
            n_points: 256,
            mapping_hidden: 64,
            mapping_dropout: 0.2,
            disc_bottleneck: 64,
            disc_hidden: vec![64, 32, 16],
            disc_dropout: 0.2,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.content_dim == 0 || self.style_dim == 0 || self.disc_bottleneck == 0 || self.mapping_hidden == 0 {
            return bad("code, bottleneck and mapping widths must be positive");
        }
        if self.decoder_hidden.is_empty() || self.decoder_hidden.contains(&0) || self.encoder_widths.contains(&0) {
            return bad("layer widths must be positive and the decoder needs a hidden layer");
        }
        if self.disc_hidden.contains(&0) {
            return bad("discriminator widths must be positive");
        }
        if self.primitives == 0 || self.n_points == 0 || self.n_points % self.primitives != 0 {
            return Err(Error::PointsPerPrimitive { points: self.n_points, primitives: self.primitives });
        }
        for p in [self.mapping_dropout, self.disc_dropout] {
            if !(0.0..1.0).contains(&p) {
                return bad("dropout must lie in [0, 1)");
            }
        }
        if self.norm_eps.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return bad("normalization epsilon must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct StyleTransferModel<S: Real> {
    pub config: ModelConfig,
    pub store: ParameterStore<S>,
    pub content_encoder: PointEncoder,
    pub style_encoders: [PointEncoder; 2],
    pub decoder: FoldingDecoder,
    pub mappings: [MappingNetwork; 2],
    pub discriminators: [Discriminator; 2],
}

impl<S: Real> StyleTransferModel<S> {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParameterStore::new();
        let c = &config;
        let g = Group::Generator;
        let content_encoder = PointEncoder::new(&mut store, "content", g, &c.encoder_widths, c.content_dim, &mut rng)?;
        let style_encoders = [
            PointEncoder::new(&mut store, "style1", g, &c.encoder_widths, c.style_dim, &mut rng)?,
            PointEncoder::new(&mut store, "style2", g, &c.encoder_widths, c.style_dim, &mut rng)?,
        ];
        let decoder = FoldingDecoder::new(
            &mut store,
            "decoder",
            c.content_dim,
            &c.decoder_hidden,
            c.primitives,
            c.norm_mode,
            c.norm_eps,
            &mut rng,
        )?;
        let mapping = |name: &str, rng: &mut ChaCha8Rng, store: &mut ParameterStore<S>| {
            MappingNetwork::new(store, name, c.style_dim, c.mapping_hidden, &c.decoder_hidden, c.mapping_dropout, rng)
        };
        let mappings = [mapping("mapping1", &mut rng, &mut store)?, mapping("mapping2", &mut rng, &mut store)?];
        let disc = |name: &str, rng: &mut ChaCha8Rng, store: &mut ParameterStore<S>| {
            Discriminator::new(store, name, &c.encoder_widths, c.disc_bottleneck, &c.disc_hidden, c.disc_dropout, rng)
        };
        let discriminators = [disc("disc1", &mut rng, &mut store)?, disc("disc2", &mut rng, &mut store)?];
        Ok(Self { config, store, content_encoder, style_encoders, decoder, mappings, discriminators })
    }

    /// Same architecture and values in another precision.
    pub fn cast<T: Real>(&self) -> StyleTransferModel<T> {
        StyleTransferModel {
            config: self.config.clone(),
            store: self.store.cast(),
            content_encoder: self.content_encoder.clone(),
            style_encoders: self.style_encoders.clone(),
            decoder: self.decoder.clone(),
            mappings: self.mappings.clone(),
            discriminators: self.discriminators.clone(),
        }
    }

    pub fn generator_ids(&self) -> Vec<ParamId> {
        self.store.ids_in(Group::Generator)
    }

    pub fn discriminator_ids(&self) -> Vec<ParamId> {
        self.store.ids_in(Group::Discriminator)
    }

    // ---- graph-level building blocks used by training and metrics ----

    pub fn content_vars(&self, fw: &mut Forward<'_, S>, points: Var, n: usize) -> Result<Var> {
        self.content_encoder.forward(fw, points, n)
    }

    pub fn style_vars(&self, fw: &mut Forward<'_, S>, domain: Domain, points: Var, n: usize) -> Result<Var> {
        self.style_encoders[domain.index()].forward(fw, points, n)
    }

    /// `H_domain(c, s) = G(c, M_domain(s))`; returns `B·n_points × 3`.
    pub fn decode_vars(
        &self,
        fw: &mut Forward<'_, S>,
        content: Var,
        style: Var,
        domain: Domain,
        sampling: UvSampling,
    ) -> Result<Var> {
        let adn = self.mappings[domain.index()].forward(fw, style)?;
        self.decoder.forward(fw, content, &adn, self.config.n_points, sampling)
    }

    /// `B × 1` discriminator scores of `domain`.
    pub fn score_vars(&self, fw: &mut Forward<'_, S>, domain: Domain, points: Var, n: usize) -> Result<Var> {
        self.discriminators[domain.index()].forward(fw, points, n)
    }

    // ---- inference on value types ----

    fn stack(clouds: &[&PointCloud]) -> Result<(Mat<S>, usize)> {
        let n = clouds.first().ok_or(Error::EmptyBatch)?.len();
        if clouds.iter().any(|c| c.len() != n) {
            return Err(Error::ShapeMismatch("batched clouds must share a point count".into()));
        }
        let mut data = Vec::with_capacity(clouds.len() * n * 3);
        for c in clouds {
            data.extend(c.to_mat::<S>().data);
        }
        Ok((Mat::from_vec(clouds.len() * n, 3, data), n))
    }

    fn rows_f64(m: &Mat<S>) -> Vec<Vec<f64>> {
        (0..m.rows).map(|r| m.row(r).iter().map(|x| x.as_f64()).collect()).collect()
    }

    fn code_mat(rows: &[&[f64]]) -> Mat<S> {
        let cols = rows.first().map_or(0, |r| r.len());
        Mat::from_vec(rows.len(), cols, rows.iter().flat_map(|r| r.iter().map(|&x| S::from_f64_lossy(x))).collect())
    }

    fn split_clouds(&self, m: &Mat<S>) -> Result<Vec<PointCloud>> {
        let n = self.config.n_points;
        (0..m.rows / n).map(|b| PointCloud::from_mat_rows(m, b * n, n)).collect()
    }

    pub fn encode(&self, x: &PointCloud, domain: Domain) -> Result<(ContentCode, StyleCode)> {
        Ok(self.encode_batch(&[x], domain)?.remove(0))
    }

    /// Encodes equally-sized clouds in one pass.
    pub fn encode_batch(&self, xs: &[&PointCloud], domain: Domain) -> Result<Vec<(ContentCode, StyleCode)>> {
        let (m, n) = Self::stack(xs)?;
        let mut fw = Forward::eval(&self.store);
        let p = fw.input(m);
        let c = self.content_vars(&mut fw, p, n)?;
        let s = self.style_vars(&mut fw, domain, p, n)?;
        Self::rows_f64(fw.value(c))
            .into_iter()
            .zip(Self::rows_f64(fw.value(s)))
            .map(|(c, s)| Ok((ContentCode::new(c)?, StyleCode::new(s, domain)?)))
            .collect()
    }

    pub fn encode_content(&self, x: &PointCloud) -> Result<ContentCode> {
        let (m, n) = Self::stack(&[x])?;
        let mut fw = Forward::eval(&self.store);
        let p = fw.input(m);
        let c = self.content_vars(&mut fw, p, n)?;
        ContentCode::new(fw.value(c).to_f64_vec())
    }

    fn check_codes(&self, c: &ContentCode, s: &StyleCode) -> Result<Domain> {
        if c.len() != self.config.content_dim {
            return Err(Error::ShapeMismatch(format!(
                "content code of length {}, model expects {}",
                c.len(),
                self.config.content_dim
            )));
        }
        if s.len() != self.config.style_dim {
            return Err(Error::ShapeMismatch(format!(
                "style code of length {}, model expects {}",
                s.len(),
                self.config.style_dim
            )));
        }
        s.domain().ok_or_else(|| Error::ShapeMismatch("style code carries no domain tag".into()))
    }

    pub fn decode(&self, c: &ContentCode, s: &StyleCode) -> Result<PointCloud> {
        Ok(self.decode_batch(&[(c, s)])?.remove(0))
    }

    /// Decodes on the fixed inference grid. Pairs may mix domains.
    pub fn decode_batch(&self, items: &[(&ContentCode, &StyleCode)]) -> Result<Vec<PointCloud>> {
        if items.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let mut out: Vec<Option<PointCloud>> = vec![None; items.len()];
        for domain in Domain::BOTH {
            let mut idx = Vec::new();
            for (i, (c, s)) in items.iter().enumerate() {
                if self.check_codes(c, s)? == domain {
                    idx.push(i);
                }
            }
            if idx.is_empty() {
                continue;
            }
            let cm = Self::code_mat(&idx.iter().map(|&i| items[i].0.values()).collect::<Vec<_>>());
            let sm = Self::code_mat(&idx.iter().map(|&i| items[i].1.values()).collect::<Vec<_>>());
            let mut fw = Forward::eval(&self.store);
            let c = fw.input(cm);
            let s = fw.input(sm);
            let y = self.decode_vars(&mut fw, c, s, domain, UvSampling::Grid)?;
            for (cloud, &i) in self.split_clouds(fw.value(y))?.into_iter().zip(&idx) {
                out[i] = Some(cloud);
            }
        }
        Ok(out.into_iter().map(|c| c.expect("every item decoded")).collect())
    }

    /// The `(γ, β)` a style code induces through its domain's mapping.
    pub fn adanorm_params(&self, s: &StyleCode) -> Result<AdaNormParams> {
        let domain = s.domain().ok_or_else(|| Error::ShapeMismatch("style code carries no domain tag".into()))?;
        let mut fw = Forward::eval(&self.store);
        let sv = fw.input(Self::code_mat(&[s.values()]));
        let adn = self.mappings[domain.index()].forward(&mut fw, sv)?;
        Ok(AdaNormParams {
            layers: adn.layers.iter().map(|&(g, b)| (fw.value(g).to_f64_vec(), fw.value(b).to_f64_vec())).collect(),
        })
    }

    /// Decoder output under explicit normalization parameters.
    pub fn decode_with_params(&self, c: &ContentCode, adp: &AdaNormParams) -> Result<PointCloud> {
        adp.validate(self.decoder.channels())?;
        let mut fw = Forward::eval(&self.store);
        let cv = fw.input(Self::code_mat(&[c.values()]));
        let layers = adp
            .layers
            .iter()
            .map(|(g, b)| (fw.input(Self::code_mat(&[g])), fw.input(Self::code_mat(&[b]))))
            .collect();
        let y = self.decoder.forward(&mut fw, cv, &AdaNormVars { layers }, self.config.n_points, UvSampling::Grid)?;
        PointCloud::from_mat_rows(fw.value(y), 0, self.config.n_points)
    }

    /// Decoded surface with the grid connectivity of each primitive.
    pub fn decode_mesh(&self, c: &ContentCode, s: &StyleCode) -> Result<TriangleMesh> {
        let cloud = self.decode(c, s)?;
        TriangleMesh::new(cloud.into_points(), self.decoder.grid_faces(self.config.n_points)?)
    }

    /// Content of `x_src`, style of `x_style` under `dst`, decoded by `H_dst`.
    pub fn translate(&self, x_src: &PointCloud, src: Domain, x_style: &PointCloud, dst: Domain) -> Result<PointCloud> {
        if src == dst {
            return Err(Error::SameDomainTranslation(src.tag()));
        }
        let c = self.encode_content(x_src)?;
        let (_, s) = self.encode(x_style, dst)?;
        self.decode(&c, &s)
    }

    /// `src → dst → src`, returning with the source shape's own style.
    pub fn cycle_translate(&self, x: &PointCloud, src: Domain, x_style: &PointCloud) -> Result<PointCloud> {
        let forward = self.translate(x, src, x_style, src.other())?;
        let (_, s_own) = self.encode(x, src)?;
        let c = self.encode_content(&forward)?;
        self.decode(&c, &s_own)
    }

    /// Draw from the standard normal style prior.
    pub fn sample_style(&self, domain: Domain, seed: u64) -> Result<StyleCode> {
        if !self.config.multimodal {
            return Err(Error::NotMultimodal);
        }
        StyleCode::new(standard_normal(self.config.style_dim, seed), domain)
    }

    /// Latent walk from `x_a`'s content to `x_b`'s, holding `x_a`'s style.
    pub fn interpolate_content(
        &self,
        x_a: &PointCloud,
        x_b: &PointCloud,
        domain_a: Domain,
        domain_b: Domain,
        steps: usize,
    ) -> Result<Vec<PointCloud>> {
        if steps < 2 {
            return Err(Error::OutOfRange(format!("interpolation needs at least 2 steps, got {steps}")));
        }
        let (c_a, s_a) = self.encode(x_a, domain_a)?;
        let (c_b, _) = self.encode(x_b, domain_b)?;
        (0..steps)
            .map(|i| {
                let t = i as f64 / (steps - 1) as f64;
                self.decode(&c_a.lerp(&c_b, t)?, &s_a)
            })
            .collect()
    }
}

fn standard_normal(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// `s + σ·ε`, `ε ~ N(0, I)`: the noise-perturbation baseline.
pub fn perturb_style(s: &StyleCode, sigma: f64, seed: u64) -> Result<StyleCode> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::OutOfRange(format!("noise scale {sigma} must be finite and non-negative")));
    }
    let noise = standard_normal(s.len(), seed);
    let values = s.values().iter().zip(noise).map(|(v, e)| v + sigma * e).collect();
    match s.domain() {
        Some(d) => StyleCode::new(values, d),
        None => StyleCode::untagged(values),
    }
}

/// Default perturbation scale of the noise baseline for the folding decoder.
pub const DEFAULT_STYLE_NOISE: f64 = 0.1;
