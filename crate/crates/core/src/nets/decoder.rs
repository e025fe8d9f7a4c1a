use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::adanorm::{adanorm_forward, NormMode, RunningStats};
use super::layers::{Forward, Linear};
use super::mapping::AdaNormVars;
use super::params::{Group, ParameterStore};
use crate::autodiff::{Mat, ParamId, Real, Var};
use crate::error::{Error, Result};

/// How 2D parameter points are placed on each primitive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UvSampling {
    /// Fresh uniform samples in `[0,1]²` per instance.
    Random(u64),
    /// Fixed regular grid shared by every instance.
    Grid,
}

#[derive(Debug, Clone)]
struct PrimitiveMlp {
    uv_weight: ParamId,
    code_weight: ParamId,
    bias0: ParamId,
    hidden: Vec<Linear>,
    out: Linear,
    running: Vec<Option<RunningStats>>,
}

/// Folding decoder: one MLP per primitive maps `(u, v, content)` to a 3D
/// point, with every hidden normalization replaced by an adaptive one.
#[derive(Debug, Clone)]
pub struct FoldingDecoder {
    prims: Vec<PrimitiveMlp>,
    pub content_dim: usize,
    pub hidden: Vec<usize>,
    pub mode: NormMode,
    pub eps: f64,
}

impl FoldingDecoder {
    pub fn new<S: Real>(
        store: &mut ParameterStore<S>,
        name: &str,
        content_dim: usize,
        hidden: &[usize],
        primitives: usize,
        mode: NormMode,
        eps: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if hidden.is_empty() || primitives == 0 {
            return Err(Error::Config("decoder needs hidden layers and at least one primitive".into()));
        }
        let g = Group::Generator;
        let fan_in0 = content_dim + 2;
        let mut prims = Vec::with_capacity(primitives);
        for p in 0..primitives {
            let base = format!("{name}.prim{p}");
            // one (content + 2) × H0 affine, stored as its two row blocks
            let bound = (6.0 / fan_in0 as f64).sqrt();
            let init = |rows: usize, cols: usize, rng: &mut dyn rand::RngCore| {
                Mat::<S>::from_vec(
                    rows,
                    cols,
                    (0..rows * cols).map(|_| S::from_f64_lossy(rng.gen_range(-bound..=bound))).collect(),
                )
            };
            let uv_weight = store.add(format!("{base}.layer0.weight_uv"), g, init(2, hidden[0], rng))?;
            let code_weight =
                store.add(format!("{base}.layer0.weight_code"), g, init(content_dim, hidden[0], rng))?;
            let bias0 = store.add_bias(format!("{base}.layer0.bias"), g, fan_in0, hidden[0], rng)?;
            let mut layers = Vec::new();
            for k in 1..hidden.len() {
                layers.push(Linear::new(store, &format!("{base}.layer{k}"), g, hidden[k - 1], hidden[k], rng)?);
            }
            let out = Linear::new(store, &format!("{base}.out"), g, hidden[hidden.len() - 1], 3, rng)?;
            let mut running = Vec::new();
            for (k, &c) in hidden.iter().enumerate() {
                running.push(match mode {
                    NormMode::AdaptiveBatch => Some(RunningStats {
                        mean: store.add(format!("{base}.norm{k}.running_mean"), Group::Buffer, Mat::zeros(1, c))?,
                        var: store.add(format!("{base}.norm{k}.running_var"), Group::Buffer, Mat::filled(1, c, S::one()))?,
                    }),
                    NormMode::AdaptiveInstance => None,
                });
            }
            prims.push(PrimitiveMlp { uv_weight, code_weight, bias0, hidden: layers, out, running });
        }
        Ok(Self { prims, content_dim, hidden: hidden.to_vec(), mode, eps })
    }

    pub fn primitives(&self) -> usize {
        self.prims.len()
    }

    /// Channel counts of the adaptive layers, in order.
    pub fn channels(&self) -> &[usize] {
        &self.hidden
    }

    pub fn points_per_primitive(&self, n_points: usize) -> Result<usize> {
        let p = self.prims.len();
        if n_points == 0 || n_points % p != 0 {
            return Err(Error::PointsPerPrimitive { points: n_points, primitives: p });
        }
        Ok(n_points / p)
    }

    /// `content` is `B × content_dim`; returns `B·n_points × 3`, instance
    /// `b` occupying rows `[b·n, (b+1)·n)` ordered primitive by primitive.
    pub fn forward<S: Real>(
        &self,
        fw: &mut Forward<'_, S>,
        content: Var,
        adn: &AdaNormVars,
        n_points: usize,
        sampling: UvSampling,
    ) -> Result<Var> {
        let k = self.points_per_primitive(n_points)?;
        let (batch, cdim) = fw.graph.shape(content);
        if cdim != self.content_dim {
            return Err(Error::ShapeMismatch(format!(
                "decoder expects content dimension {}, got {cdim}",
                self.content_dim
            )));
        }
        if adn.layers.len() != self.hidden.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} adaptive layers supplied, decoder has {}",
                adn.layers.len(),
                self.hidden.len()
            )));
        }
        for (&(g, b), &c) in adn.layers.iter().zip(&self.hidden) {
            if fw.graph.shape(g) != (batch, c) || fw.graph.shape(b) != (batch, c) {
                return Err(Error::ShapeMismatch(format!(
                    "adaptive parameters {:?} for a {batch}-instance batch of {c} channels",
                    fw.graph.shape(g)
                )));
            }
        }

        let mut parts = Vec::with_capacity(self.prims.len());
        for (p, prim) in self.prims.iter().enumerate() {
            let uv = match sampling {
                UvSampling::Grid => {
                    let grid = grid_uv(k);
                    let mut data = Vec::with_capacity(batch * k * 2);
                    for _ in 0..batch {
                        data.extend(grid.iter().flat_map(|&[u, v]| [S::from_f64_lossy(u), S::from_f64_lossy(v)]));
                    }
                    Mat::from_vec(batch * k, 2, data)
                }
                UvSampling::Random(seed) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (p as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                    let data = (0..batch * k * 2).map(|_| S::from_f64_lossy(rng.gen::<f64>())).collect();
                    Mat::from_vec(batch * k, 2, data)
                }
            };
            let uv = fw.input(uv);
            let w_uv = fw.param(prim.uv_weight);
            let w_code = fw.param(prim.code_weight);
            let b0 = fw.param(prim.bias0);
            let spatial = fw.graph.matmul(uv, w_uv);
            let code_term = fw.graph.matmul(content, w_code);
            let code_term = fw.graph.add_row(code_term, b0);
            // The content term is constant over an instance's points, so
            // per-instance centering would erase it: in instance mode it
            // joins after the first normalization instead of before.
            let instance = self.mode == NormMode::AdaptiveInstance;
            let mut h = if instance { spatial } else { fw.graph.add_seg_rows(spatial, code_term, k) };
            let linears = std::iter::once(None).chain(prim.hidden.iter().map(Some));
            for ((&(gamma, beta), running), lin) in adn.layers.iter().zip(&prim.running).zip(linears) {
                let first = lin.is_none();
                if let Some(lin) = lin {
                    h = lin.forward(fw, h)?;
                }
                h = adanorm_forward(fw, h, gamma, beta, k, self.mode, self.eps, *running)?;
                if first && instance {
                    h = fw.graph.add_seg_rows(h, code_term, k);
                }
                h = fw.graph.relu(h);
            }
            let o = prim.out.forward(fw, h)?;
            parts.push(fw.graph.tanh(o));
        }
        let segs = vec![k; parts.len()];
        Ok(if parts.len() == 1 { parts[0] } else { fw.graph.concat_seg_rows(&parts, &segs) })
    }

    /// Triangle connectivity of the grid layout for `n_points` outputs.
    pub fn grid_faces(&self, n_points: usize) -> Result<Vec<[usize; 3]>> {
        let k = self.points_per_primitive(n_points)?;
        let (rows, cols) = grid_dims(k);
        let mut faces = Vec::new();
        for p in 0..self.prims.len() {
            let base = p * k;
            for i in 0..rows.saturating_sub(1) {
                for j in 0..cols.saturating_sub(1) {
                    let a = base + i * cols + j;
                    let b = a + 1;
                    let c = a + cols;
                    let d = c + 1;
                    faces.push([a, b, d]);
                    faces.push([a, d, c]);
                }
            }
        }
        Ok(faces)
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = Vec::new();
        for prim in &self.prims {
            ids.extend([prim.uv_weight, prim.code_weight, prim.bias0]);
            for l in &prim.hidden {
                ids.extend(l.param_ids());
            }
            ids.extend(prim.out.param_ids());
        }
        ids
    }

    pub fn running_ids(&self) -> Vec<ParamId> {
        self.prims
            .iter()
            .flat_map(|p| p.running.iter().flatten().flat_map(|r| [r.mean, r.var]))
            .collect()
    }
}

/// Factor `k = rows · cols` with `rows` the largest divisor not above √k.
pub fn grid_dims(k: usize) -> (usize, usize) {
    let mut rows = (k as f64).sqrt().floor() as usize;
    while rows > 1 && k % rows != 0 {
        rows -= 1;
    }
    let rows = rows.max(1);
    (rows, k / rows)
}

/// Row-major regular grid over `[0,1]²` with `k` nodes.
pub fn grid_uv(k: usize) -> Vec<[f64; 2]> {
    let (rows, cols) = grid_dims(k);
    let coord = |i: usize, n: usize| if n > 1 { i as f64 / (n - 1) as f64 } else { 0.5 };
    (0..rows)
        .flat_map(|i| (0..cols).map(move |j| [coord(i, rows), coord(j, cols)]))
        .collect()
}
