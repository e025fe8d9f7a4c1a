use serde::{Deserialize, Serialize};

use super::layers::{Forward, StatUpdate};
use crate::autodiff::{Mat, ParamId, Real, Var};
use crate::error::{Error, Result};

/// Reduction axes of an adaptive normalization layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormMode {
    /// Statistics over every row of the batch (AdaBN).
    AdaptiveBatch,
    /// Statistics over each instance's own rows (AdaIN).
    AdaptiveInstance,
}

impl std::str::FromStr for NormMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adaptive-batch" | "batch" => Ok(NormMode::AdaptiveBatch),
            "adaptive-instance" | "instance" => Ok(NormMode::AdaptiveInstance),
            other => Err(Error::Config(format!("unknown norm mode {other:?}"))),
        }
    }
}

pub const RUNNING_MOMENTUM: f64 = 0.1;

/// Running mean/variance buffers of an adaptive-batch layer.
#[derive(Debug, Clone, Copy)]
pub struct RunningStats {
    pub mean: ParamId,
    pub var: ParamId,
}

/// `y = γ ⊙ x̂ + β`, where `x̂` normalizes each channel over the mode's
/// reduction axes and `γ`, `β` are per-instance rows (`B × C`).
///
/// `x` holds `B` instances of `seg` rows each. In evaluation mode an
/// adaptive-batch layer with running buffers normalizes with those instead
/// of the batch statistics.
#[allow(clippy::too_many_arguments)]
pub fn adanorm_forward<S: Real>(
    fw: &mut Forward<'_, S>,
    x: Var,
    gamma: Var,
    beta: Var,
    seg: usize,
    mode: NormMode,
    eps: f64,
    running: Option<RunningStats>,
) -> Result<Var> {
    if eps <= 0.0 {
        return Err(Error::Config("normalization epsilon must be positive".into()));
    }
    let (rows, cols) = fw.graph.shape(x);
    let (gr, gc) = fw.graph.shape(gamma);
    let (br, bc) = fw.graph.shape(beta);
    if gc != cols || bc != cols {
        return Err(Error::ShapeMismatch(format!(
            "adanorm over {cols} channels got gamma width {gc}, beta width {bc}"
        )));
    }
    if seg == 0 || rows % seg != 0 || gr * seg != rows || br != gr {
        return Err(Error::ShapeMismatch(format!(
            "adanorm input {rows} rows, {seg} per instance, {gr} gamma rows"
        )));
    }

    let xhat = match (mode, running, fw.is_train()) {
        (NormMode::AdaptiveInstance, _, _) => fw.graph.normalize(x, seg, eps),
        (NormMode::AdaptiveBatch, Some(stats), false) => {
            let mean = fw.store.get(stats.mean).clone();
            let var = fw.store.get(stats.var);
            let shift = fw.graph.constant(mean.map(|m| -m));
            let inv = var.map(|v| S::one() / (v + S::from_f64_lossy(eps)).sqrt());
            let inv = fw.graph.constant(inv);
            let centered = fw.graph.add_row(x, shift);
            fw.graph.mul_seg_rows(centered, inv, rows)
        }
        (NormMode::AdaptiveBatch, running, train) => {
            if let (Some(stats), true) = (running, train) {
                let (mean, var) = column_stats(fw.graph.value(x));
                fw.stat_updates.push(StatUpdate { mean_id: stats.mean, var_id: stats.var, mean, var });
            }
            fw.graph.normalize(x, rows, eps)
        }
    };
    let scaled = fw.graph.mul_seg_rows(xhat, gamma, seg);
    Ok(fw.graph.add_seg_rows(scaled, beta, seg))
}

/// Column means and unbiased variances.
fn column_stats<S: Real>(x: &Mat<S>) -> (Vec<f64>, Vec<f64>) {
    let n = x.rows as f64;
    let mut mean = vec![0.0; x.cols];
    for r in 0..x.rows {
        for (m, v) in mean.iter_mut().zip(x.row(r)) {
            *m += v.as_f64();
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; x.cols];
    for r in 0..x.rows {
        for ((s, v), m) in var.iter_mut().zip(x.row(r)).zip(&mean) {
            let d = v.as_f64() - m;
            *s += d * d;
        }
    }
    let denom = if x.rows > 1 { n - 1.0 } else { 1.0 };
    var.iter_mut().for_each(|s| *s /= denom);
    (mean, var)
}

/// Folds pending statistic updates into the running buffers.
pub fn apply_stat_updates<S: Real>(
    store: &mut super::params::ParameterStore<S>,
    updates: &[StatUpdate],
) {
    for u in updates {
        let m = store.get_mut(u.mean_id);
        for (r, &b) in m.data.iter_mut().zip(&u.mean) {
            *r = S::from_f64_lossy((1.0 - RUNNING_MOMENTUM) * r.as_f64() + RUNNING_MOMENTUM * b);
        }
        let v = store.get_mut(u.var_id);
        for (r, &b) in v.data.iter_mut().zip(&u.var) {
            *r = S::from_f64_lossy((1.0 - RUNNING_MOMENTUM) * r.as_f64() + RUNNING_MOMENTUM * b);
        }
    }
}
