//! Cell quality metrics tracked across morphs.

use super::Mesh;
use crate::geom::Vec2;

/// Per-cell and global mesh quality numbers.
#[derive(Clone, Debug)]
pub struct QualityReport {
    /// Circumradius / (2 * inradius) per cell; 1 for equilateral triangles.
    pub aspect_ratio: Vec<f64>,
    /// Smallest interior angle per cell, degrees.
    pub min_interior_angle: Vec<f64>,
    pub max_aspect_ratio: f64,
    pub min_angle: f64,
    /// Upstream-tip opening angle in degrees, when a Design loop exists.
    pub tip_opening_angle: Option<f64>,
    /// Half-axis ratio a/b of the Design loop, when one exists.
    pub half_axis_ratio: Option<f64>,
}

/// Aspect ratio and minimum interior angle (degrees) of one triangle.
///
/// The aspect ratio is circumradius over twice the inradius, which is 1
/// exactly for equilateral triangles and grows without bound for slivers.
pub fn triangle_quality(a: Vec2, b: Vec2, c: Vec2) -> (f64, f64) {
    let la = (c - b).norm();
    let lb = (a - c).norm();
    let lc = (b - a).norm();
    let area = 0.5 * (b - a).cross(c - a).abs();
    let s = 0.5 * (la + lb + lc);
    let inradius = area / s;
    let circumradius = la * lb * lc / (4.0 * area);
    let ar = circumradius / (2.0 * inradius);

    let ang = |u: Vec2, v: Vec2| (u.dot(v) / (u.norm() * v.norm())).clamp(-1.0, 1.0).acos();
    let alpha = ang(b - a, c - a);
    let beta = ang(c - b, a - b);
    let gamma = std::f64::consts::PI - alpha - beta;
    let min_angle = alpha.min(beta).min(gamma).to_degrees();
    (ar, min_angle)
}

pub(super) fn report(mesh: &Mesh) -> QualityReport {
    let mut aspect_ratio = Vec::with_capacity(mesh.cell_count());
    let mut min_interior_angle = Vec::with_capacity(mesh.cell_count());
    let mut max_ar = 0.0_f64;
    let mut min_ang = f64::INFINITY;
    for t in mesh.triangles() {
        let (ar, ang) = triangle_quality(mesh.node(t[0]), mesh.node(t[1]), mesh.node(t[2]));
        max_ar = max_ar.max(ar);
        min_ang = min_ang.min(ang);
        aspect_ratio.push(ar);
        min_interior_angle.push(ang);
    }
    let tip = mesh.tip_metrics().ok();
    QualityReport {
        aspect_ratio,
        min_interior_angle,
        max_aspect_ratio: max_ar,
        min_angle: min_ang,
        tip_opening_angle: tip.map(|t| t.0),
        half_axis_ratio: tip.map(|t| t.1),
    }
}
