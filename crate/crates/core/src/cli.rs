//! Command-line front end. `run` parses arguments, dispatches, and maps
//! errors to exit codes: 0 success, 1 usage, 2 data, 3 divergence.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::OpenOptions;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{parse_toml, RunConfig};
use crate::data::{build_dataset, load_directory, load_generated, read_shape, write_dataset, DataSpec, Dataset, Split, MANIFEST};
use crate::error::{Error, Result};
use crate::geometry::{self, PointCloud};
use crate::metrics::{evaluate, fit_feature_extractor, FeatureExtractor};
use crate::model::StyleTransferModel;
use crate::nets::Domain;
use crate::training::{load_checkpoint, mix, save_checkpoint, TrainLog, Trainer};

#[derive(Debug, Parser)]
#[command(name = "shapestyle", version, about = "Style transfer between families of 3D shapes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic two-family benchmark as OBJ files plus a manifest.
    GenData {
        /// Dataset spec (TOML); the built-in chair benchmark when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a model, writing a checkpoint after every epoch and a CSV log.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Continue from this checkpoint instead of initializing.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// CSV log path; defaults to `<out>.csv`.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Overrides `train.seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Translate one shape into the other family using a style reference.
    Translate {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        style: PathBuf,
        #[arg(long)]
        src_family: u8,
        #[arg(long)]
        dst_family: u8,
        /// OBJ output; a point cloud is written next to it with `.xyz`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Multimodal translation: `count` variants from fresh prior draws.
    Sample {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        content: PathBuf,
        /// Destination family.
        #[arg(long)]
        family: u8,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Walk between two content codes under the first shape's style.
    Interpolate {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value_t = 1)]
        family_a: u8,
        #[arg(long, default_value_t = 1)]
        family_b: u8,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute STS, diversity and reconstruction error on the validation split.
    Evaluate {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// A saved extractor file, or `fit` to train one on the data.
        #[arg(long)]
        extractor: String,
        /// CSV output; the text summary goes to the same path with `.txt`.
        #[arg(long)]
        report: PathBuf,
        /// Metric and data options; defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Where to keep a freshly fitted extractor.
        #[arg(long)]
        save_extractor: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::GenData { spec, out, seed } => gen_data(spec.as_deref(), &out, seed),
        Command::Train { config, data, out, resume, log, seed } => {
            train(&config, &data, &out, resume.as_deref(), log.as_deref(), seed)
        }
        Command::Translate { ckpt, source, style, src_family, dst_family, out } => {
            translate(&ckpt, &source, &style, src_family, dst_family, &out)
        }
        Command::Sample { ckpt, content, family, count, seed, out } => sample(&ckpt, &content, family, count, seed, &out),
        Command::Interpolate { ckpt, a, b, family_a, family_b, steps, out } => {
            interpolate(&ckpt, &a, &b, family_a, family_b, steps, &out)
        }
        Command::Evaluate { ckpt, data, extractor, report, config, save_extractor, seed } => {
            evaluate_cmd(&ckpt, &data, &extractor, &report, config.as_deref(), save_extractor.as_deref(), seed)
        }
    }
}

fn usage(message: impl Into<String>) -> Error {
    Error::Config(message.into())
}

fn domain_flag(tag: u8) -> Result<Domain> {
    Domain::from_tag(tag)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes through a temporary sibling so readers never see a partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn with_extension(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

fn gen_data(spec_path: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut spec = match spec_path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            parse_toml::<DataSpec>(&text, p)?
        }
        None => DataSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    spec.validate()?;
    if out.join(MANIFEST).exists() {
        return Err(usage(format!("{} already holds a dataset", out.display())));
    }
    let ds = build_dataset(&spec)?;
    create_dir(out)?;
    let hash = write_dataset(&ds, &spec, out)?;
    println!("wrote {} shapes to {}; manifest sha256 {hash}", ds.samples.len(), out.display());
    Ok(())
}

/// A generated directory (with manifest) or two plain family subdirectories.
fn load_data(dir: &Path, cfg: &RunConfig, seed: u64) -> Result<Dataset> {
    if dir.join(MANIFEST).exists() {
        load_generated(dir, cfg.data.n_points, seed, cfg.data.normalize)
    } else {
        let map: BTreeMap<String, Domain> = [
            (cfg.data.family_dirs[0].clone(), Domain::One),
            (cfg.data.family_dirs[1].clone(), Domain::Two),
        ]
        .into_iter()
        .collect();
        load_directory(dir, &map, cfg.data.n_points, seed, cfg.data.normalize)
    }
}

fn train(config: &Path, data: &Path, out: &Path, resume: Option<&Path>, log: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    let mut trainer = match resume {
        Some(p) => load_checkpoint(p)?,
        None => Trainer::new(StyleTransferModel::new(cfg.model.clone(), cfg.train.seed)?, cfg.train.clone())?,
    };
    let seed = trainer.config.seed;
    let ds = load_data(data, &cfg, seed)?;
    let train = [ds.clouds(Domain::One, Split::Train), ds.clouds(Domain::Two, Split::Train)];
    let slices = [train[0].as_slice(), train[1].as_slice()];
    if trainer.steps_per_epoch(slices) == 0 {
        return Err(Error::EmptyFamily("training split".into()));
    }
    let log_path = log.map(Path::to_path_buf).unwrap_or_else(|| with_extension(out, "csv"));
    let multimodal = trainer.model.config.multimodal;
    let mut log = if resume.is_some() && log_path.exists() {
        let f = OpenOptions::new().append(true).open(&log_path).map_err(|e| Error::io(&log_path, e))?;
        TrainLog::continuing(Box::new(f), multimodal)
    } else {
        let f = std::fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
        TrainLog::new(Box::new(f), multimodal)?
    };
    while !trainer.finished() {
        let reports = trainer.run_epoch(slices, Some(&mut log))?;
        write_atomic(out, &crate::training::checkpoint::to_bytes(&trainer)?)?;
        if let Some(r) = reports.last() {
            println!(
                "epoch {}/{}: generator {:.5}, discriminator {:.5}",
                trainer.progress.epoch, trainer.config.epochs, r.total_generator, r.total_discriminator
            );
        }
    }
    save_checkpoint(&trainer, out)?;
    Ok(())
}

fn load_model(ckpt: &Path) -> Result<StyleTransferModel<f32>> {
    Ok(load_checkpoint(ckpt)?.model)
}

fn input_cloud(path: &Path, model: &StyleTransferModel<f32>) -> Result<PointCloud> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    Ok(read_shape(path, name, model.config.n_points, 0, true)?.1)
}

fn write_shape(model: &StyleTransferModel<f32>, cloud: &PointCloud, obj: &Path) -> Result<()> {
    let mesh = geometry::TriangleMesh::new(cloud.points().to_vec(), model.decoder.grid_faces(model.config.n_points)?)?;
    geometry::write_obj(obj, &mesh)?;
    geometry::write_xyz(with_extension(obj, "xyz"), cloud)
}

fn translate(ckpt: &Path, source: &Path, style: &Path, src: u8, dst: u8, out: &Path) -> Result<()> {
    let (src, dst) = (domain_flag(src)?, domain_flag(dst)?);
    if src == dst {
        return Err(Error::SameDomainTranslation(src.tag()));
    }
    let model = load_model(ckpt)?;
    let x = input_cloud(source, &model)?;
    let y = input_cloud(style, &model)?;
    let translated = model.translate(&x, src, &y, dst)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_shape(&model, &translated, out)
}

fn sample(ckpt: &Path, content: &Path, family: u8, count: usize, seed: u64, out: &Path) -> Result<()> {
    let family = domain_flag(family)?;
    if count == 0 {
        return Err(usage("--count must be at least 1"));
    }
    let model = load_model(ckpt)?;
    if !model.config.multimodal {
        return Err(Error::NotMultimodal);
    }
    let c = model.encode_content(&input_cloud(content, &model)?)?;
    let styles = (0..count).map(|i| model.sample_style(family, mix(seed, i as u64))).collect::<Result<Vec<_>>>()?;
    let items: Vec<_> = styles.iter().map(|s| (&c, s)).collect();
    let clouds = model.decode_batch(&items)?;
    create_dir(out)?;
    let width = digits(count - 1);
    for (i, cloud) in clouds.iter().enumerate() {
        write_shape(&model, cloud, &out.join(format!("sample_{i:0width$}.obj")))?;
    }
    Ok(())
}

fn digits(n: usize) -> usize {
    n.to_string().len().max(3)
}

fn interpolate(ckpt: &Path, a: &Path, b: &Path, fa: u8, fb: u8, steps: usize, out: &Path) -> Result<()> {
    let (fa, fb) = (domain_flag(fa)?, domain_flag(fb)?);
    if steps < 2 {
        return Err(Error::OutOfRange(format!("interpolation needs at least 2 steps, got {steps}")));
    }
    let model = load_model(ckpt)?;
    let frames = model.interpolate_content(&input_cloud(a, &model)?, &input_cloud(b, &model)?, fa, fb, steps)?;
    create_dir(out)?;
    let width = digits(steps - 1);
    for (i, cloud) in frames.iter().enumerate() {
        write_shape(&model, cloud, &out.join(format!("frame_{i:0width$}.obj")))?;
    }
    Ok(())
}

fn evaluate_cmd(
    ckpt: &Path,
    data: &Path,
    extractor: &str,
    report: &Path,
    config: Option<&Path>,
    save_extractor: Option<&Path>,
    seed: u64,
) -> Result<()> {
    let mut cfg = match config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let model = load_model(ckpt)?;
    if config.is_none() {
        cfg.data.n_points = model.config.n_points;
    }
    let ds = load_data(data, &cfg, seed)?;
    let f = if extractor == "fit" {
        let f = fit_feature_extractor(&ds, &cfg.metrics.extractor)?;
        if let Some(p) = save_extractor {
            f.save(p)?;
        }
        f
    } else {
        FeatureExtractor::load(Path::new(extractor))?
    };
    let val = [ds.clouds(Domain::One, Split::Val), ds.clouds(Domain::Two, Split::Val)];
    let all = [
        ds.samples.iter().filter(|s| s.family == Domain::One).map(|s| s.cloud.clone()).collect::<Vec<_>>(),
        ds.samples.iter().filter(|s| s.family == Domain::Two).map(|s| s.cloud.clone()).collect::<Vec<_>>(),
    ];
    let r = evaluate(&model, &f, [&val[0], &val[1]], [&all[0], &all[1]], &cfg.metrics.diversity(seed), seed)?;
    let summary = r.summary();
    write_atomic(report, r.to_csv().as_bytes())?;
    write_atomic(&with_extension(report, "txt"), summary.as_bytes())?;
    print!("{summary}");
    Ok(())
}
