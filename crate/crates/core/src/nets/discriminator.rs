use rand::Rng;

use super::encoder::PointEncoder;
use super::layers::{Forward, Linear};
use super::params::{Group, ParameterStore};
use crate::autodiff::{ParamId, Real, Var};
use crate::error::Result;

/// Point encoder to a bottleneck, then (affine → dropout → ReLU) blocks
/// and a final affine to one unbounded score per instance.
#[derive(Debug, Clone)]
pub struct Discriminator {
    pub encoder: PointEncoder,
    pub blocks: Vec<Linear>,
    pub score: Linear,
    pub dropout: f64,
}

impl Discriminator {
    #[allow(clippy::too_many_arguments)]
    pub fn new<S: Real>(
        store: &mut ParameterStore<S>,
        name: &str,
        encoder_widths: &[usize],
        bottleneck: usize,
        hidden: &[usize],
        dropout: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let g = Group::Discriminator;
        let encoder = PointEncoder::new(store, &format!("{name}.encoder"), g, encoder_widths, bottleneck, rng)?;
        let mut blocks = Vec::new();
        let mut fan_in = bottleneck;
        for (k, &w) in hidden.iter().enumerate() {
            blocks.push(Linear::new(store, &format!("{name}.block{k}"), g, fan_in, w, rng)?);
            fan_in = w;
        }
        let score = Linear::new(store, &format!("{name}.score"), g, fan_in, 1, rng)?;
        Ok(Self { encoder, blocks, score, dropout })
    }

    /// `points` is `B·n × 3`; returns `B × 1` scores.
    pub fn forward<S: Real>(&self, fw: &mut Forward<'_, S>, points: Var, n: usize) -> Result<Var> {
        let mut h = self.encoder.forward(fw, points, n)?;
        for block in &self.blocks {
            let a = block.forward(fw, h)?;
            let d = fw.dropout(a, self.dropout);
            h = fw.graph.relu(d);
        }
        self.score.forward(fw, h)
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = self.encoder.param_ids();
        for l in self.blocks.iter().chain(std::iter::once(&self.score)) {
            ids.extend(l.param_ids());
        }
        ids
    }
}
