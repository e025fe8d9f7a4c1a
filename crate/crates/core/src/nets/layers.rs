use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::params::{Group, ParameterStore};
use crate::autodiff::{Graph, Mat, ParamId, Real, Var};
use crate::error::{Error, Result};

/// Running-statistic refresh produced by a training-mode batch
/// normalization; applied by the caller once the step completes.
#[derive(Debug, Clone)]
pub struct StatUpdate {
    pub mean_id: ParamId,
    pub var_id: ParamId,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// One forward evaluation: the tape, the parameters it reads, and the
/// randomness used by dropout.
pub struct Forward<'s, S: Real> {
    pub graph: Graph<S>,
    pub store: &'s ParameterStore<S>,
    train: bool,
    rng: ChaCha8Rng,
    pub stat_updates: Vec<StatUpdate>,
}

impl<'s, S: Real> Forward<'s, S> {
    /// Recording pass with dropout and batch statistics active.
    pub fn train(store: &'s ParameterStore<S>, seed: u64) -> Self {
        Self {
            graph: Graph::new(),
            store,
            train: true,
            rng: ChaCha8Rng::seed_from_u64(seed),
            stat_updates: Vec::new(),
        }
    }

    /// Training semantics (dropout, batch statistics) without a tape; for
    /// producing samples that are consumed as constants.
    pub fn train_detached(store: &'s ParameterStore<S>, seed: u64) -> Self {
        Self {
            graph: Graph::inference(),
            store,
            train: true,
            rng: ChaCha8Rng::seed_from_u64(seed),
            stat_updates: Vec::new(),
        }
    }

    /// Non-recording pass; dropout off, running statistics used.
    pub fn eval(store: &'s ParameterStore<S>) -> Self {
        Self {
            graph: Graph::inference(),
            store,
            train: false,
            rng: ChaCha8Rng::seed_from_u64(0),
            stat_updates: Vec::new(),
        }
    }

    /// Recording pass with inference semantics (no dropout, running
    /// statistics). Used by gradient checks that need a smooth function.
    pub fn eval_recording(store: &'s ParameterStore<S>) -> Self {
        Self {
            graph: Graph::new(),
            store,
            train: false,
            rng: ChaCha8Rng::seed_from_u64(0),
            stat_updates: Vec::new(),
        }
    }

    pub fn is_train(&self) -> bool {
        self.train
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        let value = self.store.get(id);
        self.graph.param(id, value)
    }

    pub fn input(&mut self, value: Mat<S>) -> Var {
        self.graph.constant(value)
    }

    pub fn value(&self, v: Var) -> &Mat<S> {
        self.graph.value(v)
    }

    /// Inverted dropout: zeroes with probability `p`, rescales survivors.
    pub fn dropout(&mut self, x: Var, p: f64) -> Var {
        if !self.train || p <= 0.0 {
            return x;
        }
        let (rows, cols) = self.graph.shape(x);
        let keep = S::from_f64_lossy(1.0 / (1.0 - p));
        let mask: Vec<S> = (0..rows * cols)
            .map(|_| if self.rng.gen::<f64>() < p { S::zero() } else { keep })
            .collect();
        let m = self.graph.constant(Mat::from_vec(rows, cols, mask));
        self.graph.mul(x, m)
    }
}

/// Affine map `x · W + b` with `W` stored `in × out`.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    pub fn new<S: Real>(
        store: &mut ParameterStore<S>,
        name: &str,
        group: Group,
        fan_in: usize,
        fan_out: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        Self::with_gain(store, name, group, fan_in, fan_out, 1.0, rng)
    }

    pub fn with_gain<S: Real>(
        store: &mut ParameterStore<S>,
        name: &str,
        group: Group,
        fan_in: usize,
        fan_out: usize,
        gain: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let weight = store.add_kaiming(format!("{name}.weight"), group, fan_in, fan_out, gain, rng)?;
        let bias = store.add_bias(format!("{name}.bias"), group, fan_in, fan_out, rng)?;
        Ok(Self { weight, bias, fan_in, fan_out })
    }

    pub fn forward<S: Real>(&self, fw: &mut Forward<'_, S>, x: Var) -> Result<Var> {
        let (_, cols) = fw.graph.shape(x);
        if cols != self.fan_in {
            return Err(Error::ShapeMismatch(format!(
                "linear layer expects {} inputs, got {cols}",
                self.fan_in
            )));
        }
        let w = fw.param(self.weight);
        let b = fw.param(self.bias);
        let xw = fw.graph.matmul(x, w);
        Ok(fw.graph.add_row(xw, b))
    }

    pub fn param_ids(&self) -> [ParamId; 2] {
        [self.weight, self.bias]
    }
}
