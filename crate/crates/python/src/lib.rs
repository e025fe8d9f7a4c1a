//! Python bindings: point clouds, the style-transfer model, training, and
//! the perceptual metrics.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use shapestyle::config::RunConfig;
use shapestyle::data::{build_dataset, DataSpec, Dataset, Split};
use shapestyle::geometry::{self, Point};
use shapestyle::metrics::{self, ExtractorConfig};
use shapestyle::model::StyleTransferModel;
use shapestyle::nets::{ContentCode, Domain, StyleCode};
use shapestyle::training::{self, reconstruction_chamfer};
use shapestyle::Error;

fn py_err(e: Error) -> PyErr {
    match e.exit_code() {
        1 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn domain(tag: u8) -> PyResult<Domain> {
    Domain::from_tag(tag).map_err(py_err)
}

#[pyclass(name = "PointCloud", module = "shapestyle_py")]
#[derive(Clone)]
struct PyPointCloud {
    inner: geometry::PointCloud,
}

#[pymethods]
impl PyPointCloud {
    #[new]
    fn new(points: Vec<[f64; 3]>) -> PyResult<Self> {
        Ok(Self { inner: geometry::PointCloud::new(points).map_err(py_err)? })
    }

    /// Coordinates as a list of `[x, y, z]`.
    fn points(&self) -> Vec<Point> {
        self.inner.points().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("PointCloud({} points)", self.inner.len())
    }

    /// Centered and scaled into the unit sphere.
    fn normalized(&self) -> PyResult<Self> {
        Ok(Self { inner: geometry::normalize_unit(&self.inner).map_err(py_err)?.0 })
    }

    fn chamfer(&self, other: &PyPointCloud) -> f64 {
        geometry::chamfer(&self.inner, &other.inner)
    }

    #[staticmethod]
    fn read_xyz(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: geometry::read_xyz(path).map_err(py_err)? })
    }

    fn write_xyz(&self, path: PathBuf) -> PyResult<()> {
        geometry::write_xyz(path, &self.inner).map_err(py_err)
    }
}

fn wrap(c: geometry::PointCloud) -> PyPointCloud {
    PyPointCloud { inner: c }
}

fn unwrap_all(xs: &[PyPointCloud]) -> Vec<geometry::PointCloud> {
    xs.iter().map(|c| c.inner.clone()).collect()
}

/// Bidirectional mean squared nearest-neighbor distance.
#[pyfunction]
fn chamfer(a: &PyPointCloud, b: &PyPointCloud) -> f64 {
    geometry::chamfer(&a.inner, &b.inner)
}

/// Area-weighted surface samples of an OBJ mesh.
#[pyfunction]
#[pyo3(signature = (path, n_points, seed=0))]
fn sample_obj(path: PathBuf, n_points: usize, seed: u64) -> PyResult<PyPointCloud> {
    let mesh = geometry::read_obj(path).map_err(py_err)?;
    Ok(wrap(geometry::sample_surface(&mesh, n_points, seed).map_err(py_err)?))
}

/// The synthetic chair benchmark as `{(family, split): [PointCloud]}`.
#[pyclass(name = "Dataset", module = "shapestyle_py")]
struct PyDataset {
    inner: Dataset,
}

#[pymethods]
impl PyDataset {
    #[staticmethod]
    #[pyo3(signature = (n_train, n_val, n_points=256, seed=0, quadrupeds=false))]
    fn synthetic(n_train: usize, n_val: usize, n_points: usize, seed: u64, quadrupeds: bool) -> PyResult<Self> {
        let base = if quadrupeds { DataSpec::quadrupeds(n_train, n_val) } else { DataSpec::chairs(n_train, n_val) };
        let spec = DataSpec { n_points, seed, ..base };
        Ok(Self { inner: build_dataset(&spec).map_err(py_err)? })
    }

    /// Clouds of one family (1 or 2) and split ("train" or "val").
    fn clouds(&self, family: u8, split: &str) -> PyResult<Vec<PyPointCloud>> {
        let split = Split::parse(split).ok_or_else(|| PyValueError::new_err("split must be 'train' or 'val'"))?;
        Ok(self.inner.clouds(domain(family)?, split).into_iter().map(wrap).collect())
    }

    fn __len__(&self) -> usize {
        self.inner.samples.len()
    }
}

#[pyclass(name = "Model", module = "shapestyle_py")]
struct PyModel {
    inner: StyleTransferModel<f32>,
}

#[pymethods]
impl PyModel {
    /// A freshly initialized model. `config` is a RunConfig TOML document
    /// (only its `[model]` table is used); `desk` selects the reduced preset.
    #[new]
    #[pyo3(signature = (config=None, seed=0, desk=false))]
    fn new(config: Option<&str>, seed: u64, desk: bool) -> PyResult<Self> {
        let cfg = run_config(config, desk)?;
        Ok(Self { inner: StyleTransferModel::new(cfg.model, seed).map_err(py_err)? })
    }

    /// Model weights from a training checkpoint.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: training::load_checkpoint(&path).map_err(py_err)?.model })
    }

    #[getter]
    fn multimodal(&self) -> bool {
        self.inner.config.multimodal
    }

    #[getter]
    fn n_points(&self) -> usize {
        self.inner.config.n_points
    }

    /// `(content, style)` codes as float lists.
    fn encode(&self, x: &PyPointCloud, family: u8) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let (c, s) = self.inner.encode(&x.inner, domain(family)?).map_err(py_err)?;
        Ok((c.values().to_vec(), s.values().to_vec()))
    }

    /// Decodes a content code under a style code of `family`.
    fn decode(&self, content: Vec<f64>, style: Vec<f64>, family: u8) -> PyResult<PyPointCloud> {
        let c = ContentCode::new(content).map_err(py_err)?;
        let s = StyleCode::new(style, domain(family)?).map_err(py_err)?;
        Ok(wrap(self.inner.decode(&c, &s).map_err(py_err)?))
    }

    fn reconstruct(&self, x: &PyPointCloud, family: u8) -> PyResult<PyPointCloud> {
        let (c, s) = self.inner.encode(&x.inner, domain(family)?).map_err(py_err)?;
        Ok(wrap(self.inner.decode(&c, &s).map_err(py_err)?))
    }

    /// Content of `source`, style of `style` read in family `dst`.
    fn translate(&self, source: &PyPointCloud, src: u8, style: &PyPointCloud, dst: u8) -> PyResult<PyPointCloud> {
        Ok(wrap(self.inner.translate(&source.inner, domain(src)?, &style.inner, domain(dst)?).map_err(py_err)?))
    }

    /// Translation into `family` with a style drawn from its prior.
    #[pyo3(signature = (content, family, seed=0))]
    fn sample(&self, content: &PyPointCloud, family: u8, seed: u64) -> PyResult<PyPointCloud> {
        let c = self.inner.encode_content(&content.inner).map_err(py_err)?;
        let s = self.inner.sample_style(domain(family)?, seed).map_err(py_err)?;
        Ok(wrap(self.inner.decode(&c, &s).map_err(py_err)?))
    }

    fn interpolate(&self, a: &PyPointCloud, b: &PyPointCloud, family_a: u8, family_b: u8, steps: usize) -> PyResult<Vec<PyPointCloud>> {
        let frames = self
            .inner
            .interpolate_content(&a.inner, &b.inner, domain(family_a)?, domain(family_b)?, steps)
            .map_err(py_err)?;
        Ok(frames.into_iter().map(wrap).collect())
    }

    /// Mean Chamfer between each cloud and its reconstruction.
    fn reconstruction_chamfer(&self, clouds: Vec<PyPointCloud>, family: u8) -> PyResult<f64> {
        reconstruction_chamfer(&self.inner, &unwrap_all(&clouds), domain(family)?).map_err(py_err)
    }
}

fn run_config(text: Option<&str>, desk: bool) -> PyResult<RunConfig> {
    match text {
        Some(t) => RunConfig::parse(t, std::path::Path::new("<python>")).map_err(py_err),
        None => Ok(if desk { RunConfig::desk() } else { RunConfig::default() }),
    }
}

#[pyclass(name = "Trainer", module = "shapestyle_py", unsendable)]
struct PyTrainer {
    inner: training::Trainer,
}

#[pymethods]
impl PyTrainer {
    #[new]
    #[pyo3(signature = (config=None, desk=false))]
    fn new(config: Option<&str>, desk: bool) -> PyResult<Self> {
        let cfg = run_config(config, desk)?;
        let model = StyleTransferModel::new(cfg.model, cfg.train.seed).map_err(py_err)?;
        Ok(Self { inner: training::Trainer::new(model, cfg.train).map_err(py_err)? })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: training::load_checkpoint(&path).map_err(py_err)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        training::save_checkpoint(&self.inner, &path).map_err(py_err)
    }

    #[getter]
    fn epoch(&self) -> usize {
        self.inner.progress.epoch
    }

    #[getter]
    fn finished(&self) -> bool {
        self.inner.finished()
    }

    /// Finishes the current epoch; returns the generator and discriminator
    /// totals of each step.
    fn run_epoch(&mut self, family1: Vec<PyPointCloud>, family2: Vec<PyPointCloud>) -> PyResult<Vec<(f64, f64)>> {
        let (a, b) = (unwrap_all(&family1), unwrap_all(&family2));
        let reports = self.inner.run_epoch([&a, &b], None).map_err(py_err)?;
        Ok(reports.iter().map(|r| (r.total_generator, r.total_discriminator)).collect())
    }

    /// A copy of the current weights.
    fn model(&self) -> PyModel {
        PyModel { inner: self.inner.model.clone() }
    }
}

#[pyclass(name = "FeatureExtractor", module = "shapestyle_py")]
struct PyFeatureExtractor {
    inner: metrics::FeatureExtractor,
}

#[pymethods]
impl PyFeatureExtractor {
    /// Fits the family classifier on the dataset's training split.
    #[staticmethod]
    #[pyo3(signature = (dataset, desk=true, seed=0))]
    fn fit(dataset: &PyDataset, desk: bool, seed: u64) -> PyResult<Self> {
        let base = if desk { ExtractorConfig::desk() } else { ExtractorConfig::default() };
        let cfg = ExtractorConfig { seed, ..base };
        Ok(Self { inner: metrics::fit_feature_extractor(&dataset.inner, &cfg).map_err(py_err)? })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: metrics::FeatureExtractor::load(&path).map_err(py_err)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(py_err)
    }

    #[getter]
    fn val_accuracy(&self) -> f64 {
        self.inner.provenance().val_accuracy
    }

    fn lpips(&self, x: &PyPointCloud, y: &PyPointCloud) -> PyResult<f64> {
        metrics::lpips3d(&self.inner, &x.inner, &y.inner).map_err(py_err)
    }

    /// `(delta_source, delta_target, sts)` for one translation.
    fn sts(
        &self,
        source: &PyPointCloud,
        target: &PyPointCloud,
        reconstruction_src: &PyPointCloud,
        reconstruction_tgt: &PyPointCloud,
        augmented: &PyPointCloud,
    ) -> PyResult<(f64, f64, f64)> {
        let b = metrics::sts(&self.inner, &source.inner, &target.inner, &reconstruction_src.inner, &reconstruction_tgt.inner, &augmented.inner)
            .map_err(py_err)?;
        Ok((b.delta_source, b.delta_target, b.sts))
    }

    /// Mean STS and its standard error over the round-robin pairing.
    #[pyo3(signature = (model, sources, src, targets, seed=0))]
    fn mean_sts(&self, model: &PyModel, sources: Vec<PyPointCloud>, src: u8, targets: Vec<PyPointCloud>, seed: u64) -> PyResult<(f64, f64)> {
        let s = metrics::evaluate_sts(&model.inner, &self.inner, &unwrap_all(&sources), domain(src)?, &unwrap_all(&targets), seed)
            .map_err(py_err)?;
        Ok((s.mean, s.std_error))
    }

    /// Prior-sampling diversity of translations into `family`.
    #[pyo3(signature = (model, family, contents, n_samples=100, pairs_per_sample=19, seed=0))]
    fn diversity(&self, model: &PyModel, family: u8, contents: Vec<PyPointCloud>, n_samples: usize, pairs_per_sample: usize, seed: u64) -> PyResult<f64> {
        let cfg = metrics::DiversityConfig { n_samples, pairs_per_sample, seed };
        let r = metrics::diversity(&model.inner, &self.inner, domain(family)?, &unwrap_all(&contents), metrics::StyleSource::Prior, &cfg)
            .map_err(py_err)?;
        Ok(r.mean)
    }
}

#[pymodule]
fn shapestyle_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPointCloud>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyTrainer>()?;
    m.add_class::<PyFeatureExtractor>()?;
    m.add_function(wrap_pyfunction!(chamfer, m)?)?;
    m.add_function(wrap_pyfunction!(sample_obj, m)?)?;
    Ok(())
}
