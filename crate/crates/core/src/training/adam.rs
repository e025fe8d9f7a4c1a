use crate::autodiff::{Gradients, Mat, ParamId, Real};
use crate::error::{Error, Result};
use crate::nets::ParameterStore;

/// Adam moments for one parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<S: Real> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Number of updates applied so far.
    pub t: u64,
    pub ids: Vec<ParamId>,
    pub m: Vec<Mat<S>>,
    pub v: Vec<Mat<S>>,
}

impl<S: Real> AdamState<S> {
    /// Zero moments for `ids`, shaped after the store.
    pub fn new(store: &ParameterStore<S>, ids: Vec<ParamId>) -> Self {
        let zeros = |id: &ParamId| {
            let (r, c) = store.get(*id).shape();
            Mat::zeros(r, c)
        };
        let m = ids.iter().map(zeros).collect();
        let v = ids.iter().map(zeros).collect();
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, ids, m, v }
    }
}

/// Squared L2 norm of the gradients of `ids`.
pub fn grad_norm_sq<S: Real>(grads: &Gradients<S>, ids: &[ParamId]) -> f64 {
    ids.iter()
        .filter_map(|&id| grads.param(id))
        .flat_map(|g| g.data.iter().map(|x| x.as_f64() * x.as_f64()))
        .sum()
}

/// One bias-corrected Adam step over the state's parameters. Parameters
/// that received no gradient are left untouched, moments included.
/// `scale` multiplies every gradient (global-norm clipping).
pub fn adam_update<S: Real>(
    store: &mut ParameterStore<S>,
    grads: &Gradients<S>,
    state: &mut AdamState<S>,
    lr: f64,
    scale: f64,
) -> Result<()> {
    for &id in &state.ids {
        if let Some(g) = grads.param(id) {
            if g.shape() != store.get(id).shape() {
                return Err(Error::ShapeMismatch(format!(
                    "gradient {:?} for parameter {} of shape {:?}",
                    g.shape(),
                    store.name(id),
                    store.get(id).shape()
                )));
            }
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for (k, &id) in state.ids.iter().enumerate() {
        let Some(g) = grads.param(id) else { continue };
        let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
        let m = &mut state.m[k];
        let v = &mut state.v[k];
        let p = store.get_mut(id);
        for i in 0..g.data.len() {
            let gi = g.data[i].as_f64() * scale;
            let mi = b1 * m.data[i].as_f64() + (1.0 - b1) * gi;
            let vi = b2 * v.data[i].as_f64() + (1.0 - b2) * gi * gi;
            m.data[i] = S::from_f64_lossy(mi);
            v.data[i] = S::from_f64_lossy(vi);
            let step = lr * (mi / bc1) / ((vi / bc2).sqrt() + eps);
            p.data[i] = S::from_f64_lossy(p.data[i].as_f64() - step);
        }
    }
    Ok(())
}
