use rand::Rng;

use super::layers::{Forward, Linear};
use super::params::{Group, ParameterStore};
use crate::autodiff::{ParamId, Real, Var};
use crate::error::{Error, Result};

/// Shared per-point affine + ReLU stack, channelwise max pool, final affine.
#[derive(Debug, Clone)]
pub struct PointEncoder {
    pub point_layers: Vec<Linear>,
    pub head: Linear,
    pub out_dim: usize,
}

/// Pooled code plus the per-point activations of every shared layer.
pub struct EncoderTaps {
    pub code: Var,
    pub taps: Vec<Var>,
}

impl PointEncoder {
    /// `widths` are the per-point hidden widths; the last shared layer has
    /// `out_dim` channels, so the stack is `3 → widths… → out_dim`.
    pub fn new<S: Real>(
        store: &mut ParameterStore<S>,
        name: &str,
        group: Group,
        widths: &[usize],
        out_dim: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if out_dim == 0 {
            return Err(Error::Config("encoder output dimension must be at least 1".into()));
        }
        let mut point_layers = Vec::new();
        let mut fan_in = 3;
        for (k, &w) in widths.iter().chain(std::iter::once(&out_dim)).enumerate() {
            point_layers.push(Linear::new(store, &format!("{name}.point{k}"), group, fan_in, w, rng)?);
            fan_in = w;
        }
        let head = Linear::new(store, &format!("{name}.head"), group, fan_in, out_dim, rng)?;
        Ok(Self { point_layers, head, out_dim })
    }

    /// `points` is `B·n × 3`, `n` points per instance. Returns `B × out_dim`.
    pub fn forward<S: Real>(&self, fw: &mut Forward<'_, S>, points: Var, n: usize) -> Result<Var> {
        Ok(self.forward_taps(fw, points, n)?.code)
    }

    pub fn forward_taps<S: Real>(
        &self,
        fw: &mut Forward<'_, S>,
        points: Var,
        n: usize,
    ) -> Result<EncoderTaps> {
        let (rows, cols) = fw.graph.shape(points);
        if cols != 3 || n == 0 || rows % n != 0 {
            return Err(Error::ShapeMismatch(format!(
                "encoder input {rows}x{cols} with {n} points per instance"
            )));
        }
        let mut h = points;
        let mut taps = Vec::with_capacity(self.point_layers.len());
        for layer in &self.point_layers {
            let a = layer.forward(fw, h)?;
            h = fw.graph.relu(a);
            taps.push(h);
        }
        let pooled = fw.graph.seg_max(h, n);
        let code = self.head.forward(fw, pooled)?;
        Ok(EncoderTaps { code, taps })
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        self.point_layers
            .iter()
            .chain(std::iter::once(&self.head))
            .flat_map(|l| l.param_ids())
            .collect()
    }
}
