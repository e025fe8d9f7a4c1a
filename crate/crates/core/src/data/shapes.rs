//! Procedural chair-like and quadruped-like meshes built from boxes and
//! lathed solids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, TriangleMesh};

/// Axis-aligned box: 8 vertices, 12 outward-facing triangles.
pub fn box_mesh(min: Point, max: Point) -> Result<TriangleMesh> {
    if (0..3).any(|k| !(max[k] > min[k])) {
        return Err(Error::OutOfRange(format!("box extent {min:?}..{max:?} is empty")));
    }
    let v = |i: usize| [if i & 1 == 0 { min[0] } else { max[0] }, if i & 2 == 0 { min[1] } else { max[1] }, if i & 4 == 0 { min[2] } else { max[2] }];
    let vertices = (0..8).map(v).collect();
    let faces = vec![
        [0, 2, 3], [0, 3, 1], // z = min
        [4, 5, 7], [4, 7, 6], // z = max
        [0, 1, 5], [0, 5, 4], // y = min
        [2, 6, 7], [2, 7, 3], // y = max
        [0, 4, 6], [0, 6, 2], // x = min
        [1, 3, 7], [1, 7, 5], // x = max
    ];
    TriangleMesh::new(vertices, faces)
}

/// Shared structure of a chair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChairContent {
    pub seat_width: f64,
    pub seat_depth: f64,
    pub seat_thickness: f64,
    pub leg_length: f64,
    pub back_height: f64,
}

/// Family-specific traits of a chair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChairStyle {
    pub armrests: bool,
    pub arm_thickness: f64,
    pub frame_thickness: f64,
}

/// Seat, four legs and a backrest, plus two solid arm blocks when the
/// style asks for armrests. Boxes are emitted in that order.
pub fn generate_chairlike(content: &ChairContent, style: &ChairStyle) -> Result<TriangleMesh> {
    let ChairContent { seat_width: w, seat_depth: d, seat_thickness: h, leg_length: l, back_height: bh } = *content;
    let t = style.frame_thickness;
    for (name, v) in [("seat_width", w), ("seat_depth", d), ("seat_thickness", h), ("leg_length", l), ("back_height", bh), ("frame_thickness", t)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::OutOfRange(format!("{name} must be positive, got {v}")));
        }
    }
    if 2.0 * t >= w.min(d) {
        return Err(Error::OutOfRange(format!("frame thickness {t} too large for a {w}x{d} seat")));
    }
    let (hw, hd) = (w / 2.0, d / 2.0);
    let mut mesh = box_mesh([-hw, l, -hd], [hw, l + h, hd])?;
    for (sx, sz) in [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)] {
        let cx = sx * (hw - t / 2.0);
        let cz = sz * (hd - t / 2.0);
        mesh.merge(&box_mesh([cx - t / 2.0, 0.0, cz - t / 2.0], [cx + t / 2.0, l, cz + t / 2.0])?);
    }
    let top = l + h;
    mesh.merge(&box_mesh([-hw, top, -hd], [hw, top + bh, -hd + t])?);
    if style.armrests {
        let a = style.arm_thickness;
        if !(a > 0.0) || 2.0 * a >= w {
            return Err(Error::OutOfRange(format!("arm thickness {a} outside (0, seat_width/2)")));
        }
        let arm_top = top + 0.45 * bh;
        for sx in [-1.0, 1.0] {
            let (x0, x1) = if sx < 0.0 { (-hw, -hw + a) } else { (hw - a, hw) };
            mesh.merge(&box_mesh([x0, top, -hd + t], [x1, arm_top, hd])?);
        }
    }
    Ok(mesh)
}

/// Shared pose of a quadruped, in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadrupedPose {
    /// Front-left, front-right, hind-left, hind-right swing angles.
    pub legs: [f64; 4],
    pub neck: f64,
}

/// Family-specific proportions of a quadruped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadrupedStyle {
    /// Body length over body height.
    pub body_aspect: f64,
    /// Limb radius relative to body height.
    pub limb_girth: f64,
}

/// Tessellation of every lathed part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tessellation {
    /// Interior rings between the two poles.
    pub rings: usize,
    /// Vertices per ring; even, so the mesh is mirror symmetric.
    pub segments: usize,
}

impl Default for Tessellation {
    fn default() -> Self {
        Self { rings: 7, segments: 12 }
    }
}

impl Tessellation {
    /// Vertices and faces of one lathed part: `2 + R·s` and `2·s·R`.
    pub fn part_counts(&self) -> (usize, usize) {
        (2 + self.rings * self.segments, 2 * self.segments * self.rings)
    }
}

pub const MAX_POSE_ANGLE: f64 = std::f64::consts::FRAC_PI_4;

/// Lathe around the local y axis: `profile` lists `(y, radius)` of the
/// interior rings, poles sit at `y_top` and `y_bottom`.
fn lathe(y_top: f64, y_bottom: f64, profile: &[(f64, f64)], segments: usize) -> (Vec<Point>, Vec<[usize; 3]>) {
    let mut v = vec![[0.0, y_top, 0.0]];
    for &(y, r) in profile {
        for k in 0..segments {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / segments as f64;
            v.push([r * phi.cos(), y, r * phi.sin()]);
        }
    }
    let bottom = v.len();
    v.push([0.0, y_bottom, 0.0]);
    let ring = |i: usize, k: usize| 1 + i * segments + k % segments;
    let mut f = Vec::new();
    for k in 0..segments {
        f.push([0, ring(0, k + 1), ring(0, k)]);
    }
    for i in 0..profile.len() - 1 {
        for k in 0..segments {
            f.push([ring(i, k), ring(i, k + 1), ring(i + 1, k + 1)]);
            f.push([ring(i, k), ring(i + 1, k + 1), ring(i + 1, k)]);
        }
    }
    let last = profile.len() - 1;
    for k in 0..segments {
        f.push([bottom, ring(last, k), ring(last, k + 1)]);
    }
    (v, f)
}

/// Ellipsoid rings for a lathe of half-height `a` and radius `r`.
fn ellipsoid_profile(a: f64, r: f64, rings: usize) -> Vec<(f64, f64)> {
    (1..=rings)
        .map(|i| {
            let theta = std::f64::consts::PI * i as f64 / (rings + 1) as f64;
            (a * theta.cos(), r * theta.sin())
        })
        .collect()
}

/// Capsule of straight length `len` and radius `r` hanging from `y = 0`.
fn capsule_profile(len: f64, r: f64, rings: usize) -> Vec<(f64, f64)> {
    // half the rings on each cap; the straight part joins the two equators
    let top = rings / 2;
    let bottom = rings - top;
    let mut p = Vec::with_capacity(rings);
    for i in 1..=top {
        let theta = std::f64::consts::FRAC_PI_2 * i as f64 / top as f64;
        p.push((r * theta.cos(), r * theta.sin()));
    }
    for i in 0..bottom {
        let theta = std::f64::consts::FRAC_PI_2 * i as f64 / bottom as f64;
        p.push((-len - r * theta.sin(), r * theta.cos()));
    }
    p
}

fn rotate_x(p: Point, angle: f64) -> Point {
    let (s, c) = angle.sin_cos();
    [p[0], c * p[1] - s * p[2], s * p[1] + c * p[2]]
}

fn place(mesh: &mut Option<TriangleMesh>, part: (Vec<Point>, Vec<[usize; 3]>), map: impl Fn(Point) -> Point) -> Result<()> {
    let (v, f) = part;
    let m = TriangleMesh::new(v.into_iter().map(map).collect(), f)?;
    match mesh {
        Some(all) => all.merge(&m),
        None => *mesh = Some(m),
    }
    Ok(())
}

/// Ellipsoid body along z, four capsule limbs swung about the x axis, and
/// a head on a neck pitched by the neck angle. x = 0 is the sagittal
/// plane.
pub fn generate_quadruped(pose: &QuadrupedPose, style: &QuadrupedStyle, tess: Tessellation) -> Result<TriangleMesh> {
    for &a in pose.legs.iter().chain(std::iter::once(&pose.neck)) {
        if !(a.abs() <= MAX_POSE_ANGLE + 1e-12) {
            return Err(Error::OutOfRange(format!("pose angle {a} outside ±45°")));
        }
    }
    if !(style.body_aspect > 0.0 && style.limb_girth > 0.0 && style.body_aspect.is_finite() && style.limb_girth.is_finite()) {
        return Err(Error::OutOfRange("body aspect and limb girth must be positive".into()));
    }
    if tess.rings < 2 || tess.segments < 4 || tess.segments % 2 != 0 {
        return Err(Error::OutOfRange("tessellation needs ≥ 2 rings and an even segment count ≥ 4".into()));
    }
    let body_h = 0.5; // half-height
    let body_len = body_h * style.body_aspect; // half-length
    let body_w = 0.55 * body_h; // half-width
    let limb_r = style.limb_girth * body_h;
    let limb_len = 1.4 * body_h;
    let mut mesh = None;

    // body: lathe along y, then laid along z and flattened in x
    let body = lathe(body_len, -body_len, &ellipsoid_profile(body_len, 1.0, tess.rings), tess.segments);
    place(&mut mesh, body, |p| [p[0] * body_w, p[2] * body_h, p[1]])?;

    let hip_x = body_w * 0.6;
    let hip_z = body_len * 0.65;
    let hip_y = -body_h * 0.5;
    for (k, (sx, sz)) in [(-1.0, 1.0), (1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)].into_iter().enumerate() {
        let limb = lathe(limb_r, -limb_len - limb_r, &capsule_profile(limb_len, limb_r, tess.rings), tess.segments);
        let angle = pose.legs[k];
        place(&mut mesh, limb, |p| {
            let q = rotate_x(p, angle);
            [q[0] + sx * hip_x, q[1] + hip_y, q[2] + sz * hip_z]
        })?;
    }

    // neck pitched about the front of the body, head at its tip
    let neck_len = 0.8 * body_h;
    let neck_r = 0.6 * limb_r.max(0.05);
    let base = [0.0, body_h * 0.4, body_len * 0.85];
    let tilt = std::f64::consts::FRAC_PI_4 + pose.neck;
    let neck = lathe(neck_r, -neck_len - neck_r, &capsule_profile(neck_len, neck_r, tess.rings), tess.segments);
    // hang downwards, then swing up and forwards by `tilt` from the vertical
    let swing = std::f64::consts::PI - tilt;
    place(&mut mesh, neck, |p| {
        let q = rotate_x(p, swing);
        [q[0] + base[0], q[1] + base[1], q[2] + base[2]]
    })?;
    let tip = rotate_x([0.0, -neck_len, 0.0], swing);
    let head_r = 0.35 * body_h;
    let head = lathe(head_r, -head_r, &ellipsoid_profile(head_r, head_r * 0.8, tess.rings), tess.segments);
    place(&mut mesh, head, |p| {
        // muzzle along the neck direction
        let q = rotate_x(p, swing);
        [q[0] + base[0] + tip[0], q[1] + base[1] + tip[1], q[2] + base[2] + tip[2]]
    })?;
    Ok(mesh.expect("body placed"))
}
