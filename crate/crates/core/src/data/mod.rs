//! Two-family synthetic benchmarks, on-disk datasets and manifests.

pub mod shapes;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use shapes::{
    generate_chairlike, generate_quadruped, ChairContent, ChairStyle, QuadrupedPose, QuadrupedStyle, Tessellation,
};

use crate::error::{Error, Result};
use crate::geometry::{self, PointCloud, TriangleMesh};
use crate::nets::Domain;
use crate::training::mix;

/// Closed interval `[lo, hi]`.
pub type Range = [f64; 2];

fn check_range(name: &str, r: Range) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] < r[1]) {
        return Err(Error::Config(format!("range {name} = {r:?} is degenerate")));
    }
    Ok(())
}

fn uniform(rng: &mut ChaCha8Rng, r: Range) -> f64 {
    rng.gen_range(r[0]..=r[1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChairContentRanges {
    pub seat_width: Range,
    pub seat_depth: Range,
    pub seat_thickness: Range,
    pub leg_length: Range,
    pub back_height: Range,
}

impl Default for ChairContentRanges {
    fn default() -> Self {
        Self {
            seat_width: [0.8, 1.2],
            seat_depth: [0.8, 1.1],
            seat_thickness: [0.08, 0.16],
            leg_length: [0.6, 1.0],
            back_height: [0.6, 1.1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChairStyleRanges {
    pub armrests: bool,
    pub arm_thickness: Range,
    pub frame_thickness: Range,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseRanges {
    /// Variance of the Gaussian pose prior, in radians².
    pub variance: f64,
}

impl Default for PoseRanges {
    fn default() -> Self {
        Self { variance: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadrupedStyleRanges {
    pub body_aspect: Range,
    pub limb_girth: Range,
}

/// What a family generates, with its content and style parameter ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilyShape {
    Chair { content: ChairContentRanges, style: ChairStyleRanges },
    Quadruped { content: PoseRanges, style: QuadrupedStyleRanges },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StyleFamilySpec {
    pub family: u8,
    pub n_train: usize,
    pub n_val: usize,
    pub shape: FamilyShape,
}

impl StyleFamilySpec {
    pub fn validate(&self) -> Result<()> {
        Domain::from_tag(self.family)?;
        if self.n_train + self.n_val == 0 {
            return Err(Error::Config(format!("family {} has no samples", self.family)));
        }
        match &self.shape {
            FamilyShape::Chair { content, style } => {
                for (n, r) in [
                    ("seat_width", content.seat_width),
                    ("seat_depth", content.seat_depth),
                    ("seat_thickness", content.seat_thickness),
                    ("leg_length", content.leg_length),
                    ("back_height", content.back_height),
                    ("frame_thickness", style.frame_thickness),
                ] {
                    check_range(n, r)?;
                    if r[0] <= 0.0 {
                        return Err(Error::Config(format!("range {n} must be positive")));
                    }
                }
                if style.armrests {
                    check_range("arm_thickness", style.arm_thickness)?;
                }
                if 2.0 * style.frame_thickness[1] >= content.seat_width[0].min(content.seat_depth[0]) {
                    return Err(Error::Config("frame thickness range too large for the seat".into()));
                }
            }
            FamilyShape::Quadruped { content, style } => {
                if !(content.variance > 0.0 && content.variance.is_finite()) {
                    return Err(Error::Config("pose variance must be positive".into()));
                }
                check_range("body_aspect", style.body_aspect)?;
                check_range("limb_girth", style.limb_girth)?;
            }
        }
        Ok(())
    }

    fn same_content(&self, other: &Self) -> bool {
        match (&self.shape, &other.shape) {
            (FamilyShape::Chair { content: a, .. }, FamilyShape::Chair { content: b, .. }) => a == b,
            (FamilyShape::Quadruped { content: a, .. }, FamilyShape::Quadruped { content: b, .. }) => a == b,
            _ => false,
        }
    }
}

/// A two-family benchmark plus sampling options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSpec {
    pub seed: u64,
    pub n_points: usize,
    pub normalize: bool,
    pub families: Vec<StyleFamilySpec>,
}

impl Default for DataSpec {
    fn default() -> Self {
        Self::chairs(2000, 200)
    }
}

impl DataSpec {
    /// Armchairs (family 1) against straight chairs (family 2).
    pub fn chairs(n_train: usize, n_val: usize) -> Self {
        let family = |family: u8, armrests: bool, frame: Range| StyleFamilySpec {
            family,
            n_train,
            n_val,
            shape: FamilyShape::Chair {
                content: ChairContentRanges::default(),
                style: ChairStyleRanges { armrests, arm_thickness: [0.1, 0.16], frame_thickness: frame },
            },
        };
        Self {
            seed: 0,
            n_points: 2500,
            normalize: true,
            families: vec![family(1, true, [0.09, 0.14]), family(2, false, [0.04, 0.07])],
        }
    }

    /// Stocky, thick-limbed quadrupeds against long, slender ones.
    pub fn quadrupeds(n_train: usize, n_val: usize) -> Self {
        let family = |family: u8, aspect: Range, girth: Range| StyleFamilySpec {
            family,
            n_train,
            n_val,
            shape: FamilyShape::Quadruped {
                content: PoseRanges::default(),
                style: QuadrupedStyleRanges { body_aspect: aspect, limb_girth: girth },
            },
        };
        Self {
            seed: 0,
            n_points: 2500,
            normalize: true,
            families: vec![family(1, [1.1, 1.5], [0.22, 0.3]), family(2, [1.9, 2.4], [0.08, 0.13])],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.families.len() != 2 {
            return Err(Error::Config(format!("expected 2 families, found {}", self.families.len())));
        }
        for f in &self.families {
            f.validate()?;
        }
        if self.families[0].family == self.families[1].family {
            return Err(Error::Config("the two families need distinct labels".into()));
        }
        if !self.families[0].same_content(&self.families[1]) {
            return Err(Error::Config("both families must share the same generator and content ranges".into()));
        }
        if self.n_points == 0 {
            return Err(Error::Config("n_points must be at least 1".into()));
        }
        if self.seed > i64::MAX as u64 {
            return Err(Error::Config("seed must fit in a signed 64-bit integer".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Sample {
    /// Path relative to the dataset root; doubles as a stable identifier.
    pub name: String,
    pub family: Domain,
    pub split: Split,
    pub mesh: Option<TriangleMesh>,
    pub cloud: PointCloud,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub provenance: String,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn clouds(&self, family: Domain, split: Split) -> Vec<PointCloud> {
        self.samples
            .iter()
            .filter(|s| s.family == family && s.split == split)
            .map(|s| s.cloud.clone())
            .collect()
    }

    pub fn count(&self, family: Domain, split: Split) -> usize {
        self.samples.iter().filter(|s| s.family == family && s.split == split).count()
    }
}

/// Stable 64-bit FNV-1a, for seeds derived from names.
fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

/// Surface sample for a named shape; identical whether the mesh was just
/// generated or read back from disk.
pub fn cloud_for(mesh: &TriangleMesh, name: &str, n_points: usize, seed: u64, normalize: bool) -> Result<PointCloud> {
    let cloud = geometry::sample_surface(mesh, n_points, mix(seed, fnv1a(name)))?;
    Ok(if normalize { geometry::normalize_unit(&cloud)?.0 } else { cloud })
}

/// Exactly `n_val` validation indices out of `n`, chosen by hash rank.
pub fn val_indices(seed: u64, family: u8, n: usize, n_val: usize) -> Vec<bool> {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (mix(mix(seed, 0x5917 + family as u64), i as u64), i));
    let mut val = vec![false; n];
    for &i in order.iter().take(n_val) {
        val[i] = true;
    }
    val
}

pub fn sample_name(family: u8, index: usize) -> String {
    format!("family{family}/shape_{index:05}.obj")
}

fn generate_one(spec: &StyleFamilySpec, seed: u64, index: usize) -> Result<TriangleMesh> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(mix(seed, spec.family as u64), index as u64));
    match &spec.shape {
        FamilyShape::Chair { content, style } => {
            let c = ChairContent {
                seat_width: uniform(&mut rng, content.seat_width),
                seat_depth: uniform(&mut rng, content.seat_depth),
                seat_thickness: uniform(&mut rng, content.seat_thickness),
                leg_length: uniform(&mut rng, content.leg_length),
                back_height: uniform(&mut rng, content.back_height),
            };
            let s = ChairStyle {
                armrests: style.armrests,
                arm_thickness: if style.armrests { uniform(&mut rng, style.arm_thickness) } else { 0.0 },
                frame_thickness: uniform(&mut rng, style.frame_thickness),
            };
            generate_chairlike(&c, &s)
        }
        FamilyShape::Quadruped { content, style } => {
            let normal = Normal::new(0.0, content.variance.sqrt()).map_err(|e| Error::Config(e.to_string()))?;
            let mut angle = || rng.sample(normal).clamp(-shapes::MAX_POSE_ANGLE, shapes::MAX_POSE_ANGLE);
            let pose = QuadrupedPose { legs: [angle(), angle(), angle(), angle()], neck: angle() };
            let s = QuadrupedStyle {
                body_aspect: uniform(&mut rng, style.body_aspect),
                limb_girth: uniform(&mut rng, style.limb_girth),
            };
            generate_quadruped(&pose, &s, Tessellation::default())
        }
    }
}

/// Generates every mesh, samples its surface and assigns splits.
pub fn build_dataset(spec: &DataSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut samples = Vec::new();
    for fam in &spec.families {
        let family = Domain::from_tag(fam.family)?;
        let n = fam.n_train + fam.n_val;
        let val = val_indices(spec.seed, fam.family, n, fam.n_val);
        for i in 0..n {
            let mesh = generate_one(fam, spec.seed, i)?;
            let name = sample_name(fam.family, i);
            let cloud = cloud_for(&mesh, &name, spec.n_points, spec.seed, spec.normalize)?;
            let split = if val[i] { Split::Val } else { Split::Train };
            samples.push(Sample { name, family, split, mesh: Some(mesh), cloud });
        }
    }
    Ok(Dataset { samples, provenance: format!("generated (seed {})", spec.seed) })
}

pub const MANIFEST: &str = "manifest.txt";
pub const SPEC_COPY: &str = "spec.toml";

/// Writes each mesh as OBJ, the spec, and `manifest.txt` with lines
/// `relpath family split sha256`.
pub fn write_dataset(ds: &Dataset, spec: &DataSpec, dir: &Path) -> Result<String> {
    let mut manifest = String::new();
    for s in &ds.samples {
        let mesh = s.mesh.as_ref().ok_or_else(|| Error::InvalidMesh(format!("{} has no mesh", s.name)))?;
        let text = geometry::obj_string(mesh);
        let path = dir.join(&s.name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&path, &text).map_err(|e| Error::io(&path, e))?;
        let hash = hex::encode(Sha256::digest(text.as_bytes()));
        manifest.push_str(&format!("{} {} {} {}\n", s.name, s.family.tag(), s.split.as_str(), hash));
    }
    let spec_text = toml::to_string(spec).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(dir.join(SPEC_COPY), spec_text).map_err(|e| Error::io(dir.join(SPEC_COPY), e))?;
    std::fs::write(dir.join(MANIFEST), &manifest).map_err(|e| Error::io(dir.join(MANIFEST), e))?;
    Ok(hex::encode(Sha256::digest(manifest.as_bytes())))
}

/// Loads one `.obj` or `.xyz` file as a cloud of `n_points`; the sampling
/// seed is derived from `name`, so the same file always yields the same cloud.
pub fn read_shape(path: &Path, name: &str, n_points: usize, seed: u64, normalize: bool) -> Result<(Option<TriangleMesh>, PointCloud)> {
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("obj") => {
            let mesh = geometry::read_obj(path)?;
            let cloud = cloud_for(&mesh, name, n_points, seed, normalize)?;
            Ok((Some(mesh), cloud))
        }
        Some("xyz") => {
            let raw = geometry::read_xyz(path)?.resample(n_points, mix(seed, fnv1a(name)));
            let cloud = if normalize { geometry::normalize_unit(&raw)?.0 } else { raw };
            Ok((None, cloud))
        }
        _ => Err(Error::Parse { path: path.to_path_buf(), line: 0, message: "unsupported extension".into() }),
    }
}

/// Reads a directory written by [`write_dataset`], checking every hash.
pub fn load_generated(dir: &Path, n_points: usize, seed: u64, normalize: bool) -> Result<Dataset> {
    let mpath = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let mut samples = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let bad = |m: &str| Error::Parse { path: mpath.clone(), line: k + 1, message: m.to_string() };
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 {
            return Err(bad("expected: relpath family split sha256"));
        }
        let tag: u8 = f[1].parse().map_err(|_| bad("bad family label"))?;
        let family = Domain::from_tag(tag).map_err(|_| bad("family label must be 1 or 2"))?;
        let split = Split::parse(f[2]).ok_or_else(|| bad("split must be train or val"))?;
        let path = dir.join(f[0]);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        if hex::encode(Sha256::digest(&bytes)) != f[3] {
            return Err(bad(&format!("content hash mismatch for {}", f[0])));
        }
        let (mesh, cloud) = read_shape(&path, f[0], n_points, seed, normalize)?;
        samples.push(Sample { name: f[0].to_string(), family, split, mesh, cloud });
    }
    for d in Domain::BOTH {
        if !samples.iter().any(|s| s.family == d) {
            return Err(Error::EmptyFamily(d.to_string()));
        }
    }
    Ok(Dataset { samples, provenance: format!("manifest {}", mpath.display()) })
}

/// Ingests `root/<subdir>/*.{obj,xyz}`, labeling each subdirectory through
/// `family_map`. Splits come from a hash rank holding out one shape in 11.
pub fn load_directory(root: &Path, family_map: &BTreeMap<String, Domain>, n_points: usize, seed: u64, normalize: bool) -> Result<Dataset> {
    let mut samples = Vec::new();
    for (sub, &family) in family_map {
        let dir = root.join(sub);
        let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| e.eq_ignore_ascii_case("obj") || e.eq_ignore_ascii_case("xyz"))
            })
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::EmptyFamily(sub.clone()));
        }
        let val = val_indices(seed, family.tag(), files.len(), files.len() / 11);
        for (i, path) in files.iter().enumerate() {
            let name = format!("{sub}/{}", path.file_name().and_then(|n| n.to_str()).unwrap_or_default());
            let (mesh, cloud) = read_shape(path, &name, n_points, seed, normalize)?;
            let split = if val[i] { Split::Val } else { Split::Train };
            samples.push(Sample { name, family, split, mesh, cloud });
        }
    }
    Ok(Dataset { samples, provenance: format!("directory {}", root.display()) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n_train: usize, n_val: usize) -> DataSpec {
        DataSpec { n_points: 64, ..DataSpec::chairs(n_train, n_val) }
    }

    #[test]
    fn split_counts_are_exact() {
        let ds = build_dataset(&small(20, 4)).unwrap();
        assert_eq!(ds.len(), 48);
        for d in Domain::BOTH {
            assert_eq!(ds.count(d, Split::Train), 20);
            assert_eq!(ds.count(d, Split::Val), 4);
        }
        let desk = DataSpec::chairs(200, 40);
        let total: usize = desk.families.iter().map(|f| f.n_train + f.n_val).sum();
        assert_eq!(total, 480);
        let full = DataSpec::default();
        assert_eq!((full.families[0].n_train, full.families[0].n_val), (2000, 200));
    }

    #[test]
    fn families_must_share_content_ranges() {
        let mut spec = small(2, 1);
        if let FamilyShape::Chair { content, .. } = &mut spec.families[1].shape {
            content.leg_length = [0.1, 0.2];
        }
        assert!(build_dataset(&spec).is_err());
        let mut mixed = small(2, 1);
        mixed.families[1] = DataSpec::quadrupeds(2, 1).families[1].clone();
        assert!(mixed.validate().is_err());
    }

    #[test]
    fn write_and_reload_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = small(3, 1);
        let ds = build_dataset(&spec).unwrap();
        let h1 = write_dataset(&ds, &spec, dir.path()).unwrap();
        let back = load_generated(dir.path(), spec.n_points, spec.seed, spec.normalize).unwrap();
        assert_eq!(back.len(), ds.len());
        for (a, b) in ds.samples.iter().zip(&back.samples) {
            assert_eq!(a.cloud, b.cloud);
            assert_eq!(a.split, b.split);
        }
        let dir2 = tempfile::tempdir().unwrap();
        let h2 = write_dataset(&build_dataset(&spec).unwrap(), &spec, dir2.path()).unwrap();
        assert_eq!(h1, h2);
    }

    #[test]
    fn directory_ingestion() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        std::fs::create_dir_all(root.join("a")).unwrap();
        std::fs::create_dir_all(root.join("b")).unwrap();
        let tri = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n";
        for k in 0..3 {
            std::fs::write(root.join(format!("a/s{k}.obj")), tri).unwrap();
        }
        std::fs::write(root.join("b/s0.obj"), tri).unwrap();
        std::fs::write(root.join("b/s1.xyz"), "0 0 0\n1 1 1\n0 1 0\n").unwrap();
        let map: BTreeMap<String, Domain> = [("a".to_string(), Domain::One), ("b".to_string(), Domain::Two)].into();
        let ds = load_directory(root, &map, 16, 0, true).unwrap();
        assert_eq!(ds.len(), 5);
        assert_eq!(ds.samples.iter().filter(|s| s.family == Domain::Two).count(), 2);

        std::fs::write(root.join("b/s2.obj"), "v 0 0 0\nf 1 2 3\n").unwrap();
        let err = load_directory(root, &map, 16, 0, true).unwrap_err().to_string();
        assert!(err.contains("s2.obj"), "{err}");

        std::fs::create_dir_all(root.join("c")).unwrap();
        let map: BTreeMap<String, Domain> = [("c".to_string(), Domain::One)].into();
        assert!(matches!(load_directory(root, &map, 16, 0, true), Err(Error::EmptyFamily(_))));
    }

    #[test]
    fn quadruped_benchmark_builds() {
        let spec = DataSpec { n_points: 32, ..DataSpec::quadrupeds(3, 1) };
        let ds = build_dataset(&spec).unwrap();
        assert_eq!(ds.len(), 8);
    }

    #[test]
    fn spec_toml_round_trip() {
        let spec = DataSpec::quadrupeds(5, 2);
        let text = toml::to_string(&spec).unwrap();
        let back: DataSpec = toml::from_str(&text).unwrap();
        assert_eq!(back, spec);
        assert_eq!(toml::to_string(&back).unwrap(), text);
    }
}
