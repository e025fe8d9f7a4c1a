//! Shape containers, surface sampling, normalization and the Chamfer kernel.

mod io;
mod nearest;

pub use io::{parse_obj, parse_xyz, read_obj, read_xyz, write_obj, write_xyz, obj_string, xyz_string};
pub use nearest::nearest_sq;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Mat, Real};
use crate::error::{Error, Result};

pub type Point = [f64; 3];

/// Ordered set of 3D points with finite coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidCloud("no points".into()));
        }
        if let Some(i) = points.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidCloud(format!("non-finite coordinate at point {i}")));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }

    /// `N × 3` matrix in the requested precision.
    pub fn to_mat<S: Real>(&self) -> Mat<S> {
        let data = self.points.iter().flat_map(|p| p.iter().map(|&c| S::from_f64_lossy(c))).collect();
        Mat::from_vec(self.points.len(), 3, data)
    }

    /// Rows `[start, start + count)` of an `· × 3` matrix.
    pub fn from_mat_rows<S: Real>(m: &Mat<S>, start: usize, count: usize) -> Result<Self> {
        if m.cols != 3 {
            return Err(Error::ShapeMismatch(format!("expected 3 columns, got {}", m.cols)));
        }
        let points = (start..start + count)
            .map(|r| {
                let row = m.row(r);
                [row[0].as_f64(), row[1].as_f64(), row[2].as_f64()]
            })
            .collect();
        Self::new(points)
    }

    pub fn centroid(&self) -> Point {
        let n = self.points.len() as f64;
        let mut c = [0.0; 3];
        for p in &self.points {
            for k in 0..3 {
                c[k] += p[k];
            }
        }
        c.map(|v| v / n)
    }

    /// Reorders points by `perm[i]` → position `i`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self { points: perm.iter().map(|&i| self.points[i]).collect() }
    }

    /// Draws `n` points with replacement (or returns a clone when `n`
    /// already matches).
    pub fn resample(&self, n: usize, seed: u64) -> Self {
        if n == self.points.len() {
            return self.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = (0..n).map(|_| self.points[rng.gen_range(0..self.points.len())]).collect();
        Self { points }
    }
}

/// Indexed triangle mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point>,
    faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if faces.is_empty() {
            return Err(Error::InvalidMesh("no faces".into()));
        }
        if vertices.iter().any(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidMesh("non-finite vertex".into()));
        }
        for (k, f) in faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&i| i >= vertices.len()) {
                return Err(Error::InvalidMesh(format!(
                    "face {k} references vertex {bad} of {}",
                    vertices.len()
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!("face {k} repeats a vertex index")));
            }
        }
        let mesh = Self { vertices, faces };
        if mesh.face_areas().iter().all(|&a| a == 0.0) {
            return Err(Error::DegenerateSurface);
        }
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn face_areas(&self) -> Vec<f64> {
        self.faces
            .iter()
            .map(|f| triangle_area(self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]))
            .collect()
    }

    pub fn total_area(&self) -> f64 {
        self.face_areas().iter().sum()
    }

    /// Appends another mesh, offsetting its indices.
    pub fn merge(&mut self, other: &TriangleMesh) {
        let offset = self.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.faces.extend(other.faces.iter().map(|f| f.map(|i| i + offset)));
    }
}

pub fn triangle_area(a: Point, b: Point, c: Point) -> f64 {
    let u = sub(b, a);
    let v = sub(c, a);
    let n = cross(u, v);
    0.5 * dot(n, n).sqrt()
}

pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: Point, b: Point) -> Point {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn squared_distance(a: Point, b: Point) -> f64 {
    let d = sub(a, b);
    dot(d, d)
}

/// Area-weighted triangle choice followed by uniform barycentric
/// coordinates.
pub fn sample_surface(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::InvalidCloud("sample count must be at least 1".into()));
    }
    let areas = mesh.face_areas();
    let chooser = WeightedIndex::new(&areas).map_err(|_| Error::DegenerateSurface)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let f = mesh.faces[chooser.sample(&mut rng)];
        let (a, b, c) = (mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]);
        let mut u: f64 = rng.gen();
        let mut v: f64 = rng.gen();
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        points.push([0, 1, 2].map(|k| a[k] + u * (b[k] - a[k]) + v * (c[k] - a[k])));
    }
    PointCloud::new(points)
}

/// Maps points to `(p - center) / scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationTransform {
    pub center: Point,
    pub scale: f64,
}

impl NormalizationTransform {
    pub fn apply(&self, cloud: &PointCloud) -> PointCloud {
        PointCloud {
            points: cloud
                .points
                .iter()
                .map(|p| [0, 1, 2].map(|k| (p[k] - self.center[k]) / self.scale))
                .collect(),
        }
    }

    pub fn invert(&self, cloud: &PointCloud) -> PointCloud {
        PointCloud {
            points: cloud
                .points
                .iter()
                .map(|p| [0, 1, 2].map(|k| p[k] * self.scale + self.center[k]))
                .collect(),
        }
    }

    pub fn apply_mesh(&self, mesh: &TriangleMesh) -> TriangleMesh {
        TriangleMesh {
            vertices: mesh
                .vertices
                .iter()
                .map(|p| [0, 1, 2].map(|k| (p[k] - self.center[k]) / self.scale))
                .collect(),
            faces: mesh.faces.clone(),
        }
    }
}

/// Centers on the centroid and scales the farthest point to unit distance.
pub fn normalize_unit(cloud: &PointCloud) -> Result<(PointCloud, NormalizationTransform)> {
    let center = cloud.centroid();
    let scale = cloud
        .points
        .iter()
        .map(|&p| squared_distance(p, center))
        .fold(0.0f64, f64::max)
        .sqrt();
    if scale <= 1e-12 {
        return Err(Error::ZeroExtent);
    }
    let t = NormalizationTransform { center, scale };
    Ok((t.apply(cloud), t))
}

/// Mean squared nearest-neighbor distance from `p` to `q` plus the same
/// from `q` to `p`.
pub fn chamfer(p: &PointCloud, q: &PointCloud) -> f64 {
    let (fwd, _) = nearest_sq(&p.points, &q.points);
    let (bwd, _) = nearest_sq(&q.points, &p.points);
    fwd.iter().sum::<f64>() / p.len() as f64 + bwd.iter().sum::<f64>() / q.len() as f64
}
