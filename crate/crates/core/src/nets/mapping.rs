use rand::Rng;

use super::layers::{Forward, Linear};
use super::params::{Group, ParameterStore};
use crate::autodiff::{ParamId, Real, Var};
use crate::error::{Error, Result};

/// Graph handles of per-layer `(γ, β)`, each `B × C_l`.
#[derive(Debug, Clone)]
pub struct AdaNormVars {
    pub layers: Vec<(Var, Var)>,
}

/// Style code → all decoder `(γ, β)`: two (affine → dropout → ReLU) blocks
/// and one affine head whose output is split per layer. `γ` is emitted as
/// `1 + raw`.
#[derive(Debug, Clone)]
pub struct MappingNetwork {
    pub blocks: Vec<Linear>,
    pub head: Linear,
    pub channels: Vec<usize>,
    pub style_dim: usize,
    pub dropout: f64,
}

/// Initialization gain of the mapping head; small so conditioning starts
/// near the identity.
pub const HEAD_GAIN: f64 = 0.1;

impl MappingNetwork {
    pub fn new<S: Real>(
        store: &mut ParameterStore<S>,
        name: &str,
        style_dim: usize,
        hidden: usize,
        channels: &[usize],
        dropout: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::Config(format!("dropout {dropout} outside [0, 1)")));
        }
        let blocks = vec![
            Linear::new(store, &format!("{name}.block0"), Group::Generator, style_dim, hidden, rng)?,
            Linear::new(store, &format!("{name}.block1"), Group::Generator, hidden, hidden, rng)?,
        ];
        let total: usize = channels.iter().map(|c| 2 * c).sum();
        let head = Linear::with_gain(store, &format!("{name}.head"), Group::Generator, hidden, total, HEAD_GAIN, rng)?;
        Ok(Self { blocks, head, channels: channels.to_vec(), style_dim, dropout })
    }

    pub fn output_len(&self) -> usize {
        self.channels.iter().map(|c| 2 * c).sum()
    }

    /// Raw head output, `B × Σ 2·C_l`.
    pub fn forward_raw<S: Real>(&self, fw: &mut Forward<'_, S>, style: Var) -> Result<Var> {
        let (_, cols) = fw.graph.shape(style);
        if cols != self.style_dim {
            return Err(Error::ShapeMismatch(format!(
                "mapping network expects style dimension {}, got {cols}",
                self.style_dim
            )));
        }
        let mut h = style;
        for block in &self.blocks {
            let a = block.forward(fw, h)?;
            let d = fw.dropout(a, self.dropout);
            h = fw.graph.relu(d);
        }
        self.head.forward(fw, h)
    }

    pub fn forward<S: Real>(&self, fw: &mut Forward<'_, S>, style: Var) -> Result<AdaNormVars> {
        let raw = self.forward_raw(fw, style)?;
        let mut layers = Vec::with_capacity(self.channels.len());
        let mut offset = 0;
        for &c in &self.channels {
            let g_raw = fw.graph.slice_cols(raw, offset, offset + c);
            let gamma = fw.graph.add_scalar(g_raw, 1.0);
            let beta = fw.graph.slice_cols(raw, offset + c, offset + 2 * c);
            layers.push((gamma, beta));
            offset += 2 * c;
        }
        Ok(AdaNormVars { layers })
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        self.blocks
            .iter()
            .chain(std::iter::once(&self.head))
            .flat_map(|l| l.param_ids())
            .collect()
    }
}
