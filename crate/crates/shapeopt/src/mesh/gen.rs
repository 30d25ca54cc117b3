//! Built-in mesh generation.
//!
//! The channel generator builds the upper half of the domain and mirrors it
//! across y = 0, so the mesh is exactly symmetric about the channel axis:
//! structured rings blend the obstacle boundary into a square frame, and a
//! graded Cartesian grid fills the rest of the channel. Cell sizes grow
//! geometrically away from the obstacle with a cap that keeps far-field
//! aspect ratios moderate.

use super::{BoundaryEdge, BoundaryTag, Mesh};
use crate::error::{Error, Result};
use crate::geom::{signed_area2, Vec2};
use std::collections::HashMap;

/// Specification of the built-in channel-with-obstacle case.
#[derive(Clone, Debug)]
pub struct ChannelSpec {
    pub length: f64,
    pub height: f64,
    pub obstacle: Obstacle,
    pub target_cells: usize,
}

#[derive(Clone, Copy, Debug)]
pub enum Obstacle {
    Circle { diameter: f64 },
    Ellipse { semi_axis_x: f64, semi_axis_y: f64 },
}

impl Obstacle {
    fn semi_axes(self) -> (f64, f64) {
        match self {
            Obstacle::Circle { diameter } => (0.5 * diameter, 0.5 * diameter),
            Obstacle::Ellipse {
                semi_axis_x,
                semi_axis_y,
            } => (semi_axis_x, semi_axis_y),
        }
    }

    fn perimeter(self) -> f64 {
        let (a, b) = self.semi_axes();
        // Ramanujan's approximation; exact for circles.
        std::f64::consts::PI * (3.0 * (a + b) - ((3.0 * a + b) * (a + 3.0 * b)).sqrt())
    }
}

/// Obstacle centered at the origin in a `length x height` channel. The node
/// budget is met approximately; the design boundary resolution scales with
/// `target_cells`.
pub fn channel_with_obstacle(spec: &ChannelSpec) -> Result<Mesh> {
    let (a, b) = spec.obstacle.semi_axes();
    if !(spec.length > 0.0 && spec.height > 0.0 && a > 0.0 && b > 0.0) {
        return Err(Error::Mesh("channel and obstacle dimensions must be positive".into()));
    }
    if spec.target_cells < 24 {
        return Err(Error::Mesh("target cell count too small (need at least 24)".into()));
    }
    let r_max = a.max(b);
    let w = (2.5 * r_max).min(0.35 * spec.height).min(0.2 * spec.length);
    if w < 1.25 * r_max {
        return Err(Error::Mesh("obstacle too large for the channel".into()));
    }

    // Cell count grows monotonically with the angular resolution; walk up
    // until the target is bracketed and keep the closer mesh.
    let mut best: Option<(usize, Mesh)> = None;
    for k in 1..=64 {
        let mesh = build_channel(spec, w, 8 * k)?;
        let cells = mesh.cell_count();
        let diff = cells.abs_diff(spec.target_cells);
        let better = best.as_ref().map_or(true, |(d, _)| diff < *d);
        if better {
            best = Some((diff, mesh));
        }
        if cells >= spec.target_cells {
            break;
        }
    }
    Ok(best.expect("loop ran at least once").1)
}

/// Axis-aligned rectangle meshed with an `nx x ny` grid, each cell split
/// along an alternating diagonal. `tags` label the left, right, bottom and
/// top sides in that order.
pub fn rectangle(
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    nx: usize,
    ny: usize,
    tags: [BoundaryTag; 4],
) -> Result<Mesh> {
    if !(x1 > x0 && y1 > y0) || nx == 0 || ny == 0 {
        return Err(Error::Mesh("degenerate rectangle".into()));
    }
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let x = x0 + (x1 - x0) * i as f64 / nx as f64;
            let y = y0 + (y1 - y0) * j as f64 / ny as f64;
            nodes.push(Vec2::new(x, y));
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut tris = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (p, q, r, s) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            if (i + j) % 2 == 0 {
                tris.push([p, q, r]);
                tris.push([p, r, s]);
            } else {
                tris.push([p, q, s]);
                tris.push([q, r, s]);
            }
        }
    }
    let mut edges = Vec::new();
    for j in 0..ny {
        edges.push(BoundaryEdge { nodes: [id(0, j), id(0, j + 1)], tag: tags[0] });
        edges.push(BoundaryEdge { nodes: [id(nx, j), id(nx, j + 1)], tag: tags[1] });
    }
    for i in 0..nx {
        edges.push(BoundaryEdge { nodes: [id(i, 0), id(i + 1, 0)], tag: tags[2] });
        edges.push(BoundaryEdge { nodes: [id(i, ny), id(i + 1, ny)], tag: tags[3] });
    }
    Mesh::new(nodes, tris, edges)
}

const FIRST_LAYER_FACTOR: f64 = 0.55;
const RING_GROWTH: f64 = 1.2;
const FAR_GROWTH: f64 = 1.3;
const FAR_CAP_FACTOR: f64 = 2.2;

struct HalfMesh {
    nodes: Vec<Vec2>,
    keys: HashMap<(i64, i64), usize>,
    tris: Vec<[usize; 3]>,
}

impl HalfMesh {
    fn new() -> Self {
        HalfMesh {
            nodes: Vec::new(),
            keys: HashMap::new(),
            tris: Vec::new(),
        }
    }

    fn node(&mut self, p: Vec2) -> usize {
        let key = ((p.x * 1e9).round() as i64, (p.y * 1e9).round() as i64);
        if let Some(&i) = self.keys.get(&key) {
            return i;
        }
        let i = self.nodes.len();
        self.nodes.push(p);
        self.keys.insert(key, i);
        i
    }

    fn tri(&mut self, a: usize, b: usize, c: usize) {
        if signed_area2(self.nodes[a], self.nodes[b], self.nodes[c]) > 0.0 {
            self.tris.push([a, b, c]);
        } else {
            self.tris.push([a, c, b]);
        }
    }

    /// Splits quad (a, b, c, d) along the shorter diagonal. `mirror_flip`
    /// inverts the tie-break so a mesh built from mirrored quads triangulates
    /// symmetrically.
    fn quad(&mut self, a: usize, b: usize, c: usize, d: usize, parity: usize, mirror_flip: bool) {
        let d1 = (self.nodes[c] - self.nodes[a]).norm();
        let d2 = (self.nodes[d] - self.nodes[b]).norm();
        let use_ac = if d1 < d2 - 1e-12 {
            true
        } else if d2 < d1 - 1e-12 {
            false
        } else {
            (parity % 2 == 0) != mirror_flip
        };
        if use_ac {
            self.tri(a, b, c);
            self.tri(a, c, d);
        } else {
            self.tri(a, b, d);
            self.tri(b, c, d);
        }
    }
}

/// Geometric ladder of interval widths covering `span`: starts at `h0`, grows
/// by `growth` up to `cap`, then is rescaled so the widths sum to `span`.
fn graded_spacings(span: f64, h0: f64, growth: f64, cap: f64) -> Vec<f64> {
    debug_assert!(span > 0.0 && h0 > 0.0);
    let mut d = Vec::new();
    let mut sum = 0.0;
    let mut h = h0;
    while sum < span {
        d.push(h);
        sum += h;
        h = (h * growth).min(cap);
    }
    let scale = span / sum;
    for v in &mut d {
        *v *= scale;
    }
    d
}

fn build_channel(spec: &ChannelSpec, w: f64, n_frame: usize) -> Result<Mesh> {
    let (a, b) = spec.obstacle.semi_axes();
    let k = n_frame / 8; // intervals per half side of the square frame
    let h_sq = 8.0 * w / n_frame as f64;

    // The obstacle boundary carries twice the angular resolution of the
    // frame when the ring ladder is deep enough; a 2:1 transition ring
    // coarsens the stations partway out. Tiny ladders skip the refinement.
    let refine = k >= 2;
    let n_circ = if refine { 2 * n_frame } else { n_frame };
    let n_half = n_circ / 2;

    // Obstacle and frame stations at the fine resolution for the upper
    // half, i = 0..=n_half. Only the first quarter is computed; the rest is
    // mirrored in x so station coordinates are exactly symmetric.
    let mut circ = vec![Vec2::ZERO; n_half + 1];
    let mut square = vec![Vec2::ZERO; n_half + 1];
    let fine_h = 8.0 * w / n_circ as f64;
    for i in 0..=n_half / 2 {
        let theta = std::f64::consts::PI * i as f64 / n_half as f64;
        circ[i] = if 2 * i == n_half {
            Vec2::new(0.0, b)
        } else {
            Vec2::new(a * theta.cos(), b * theta.sin())
        };
        // Walk the square perimeter from (w, 0) counterclockwise.
        let s = i as f64 * fine_h;
        square[i] = if s <= w + 1e-12 {
            Vec2::new(w, s)
        } else {
            Vec2::new(w - (s - w), w)
        };
    }
    for i in n_half / 2 + 1..=n_half {
        let m = n_half - i;
        circ[i] = Vec2::new(-circ[m].x, circ[m].y);
        square[i] = Vec2::new(-square[m].x, square[m].y);
    }

    // Boundary layers: an inner shell of uniform absolute thickness (so the
    // near-wall anisotropy is the same all around the obstacle), then rings
    // blending toward the frame, coarsened 2:1 in the angular direction at
    // the shell boundary when the obstacle is refined.
    let arc = spec.obstacle.perimeter() / n_circ as f64;
    let h0 = FIRST_LAYER_FACTOR * arc.min(h_sq);
    let gap_min = (0..=n_half)
        .map(|i| (square[i] - circ[i]).norm())
        .fold(f64::INFINITY, f64::min);
    let mut shell_offsets = vec![0.0];
    {
        let mut d = h0;
        let mut acc = 0.0;
        while d < 1.15 * arc.min(h_sq) && acc + d < 0.4 * gap_min {
            acc += d;
            shell_offsets.push(acc);
            d *= RING_GROWTH;
        }
    }
    let shell_levels = shell_offsets.len() - 1;
    let s_shell = *shell_offsets.last().unwrap();
    let d_last = if shell_levels > 0 {
        shell_offsets[shell_levels] - shell_offsets[shell_levels - 1]
    } else {
        h0
    };

    // Outer zone: per-direction blend from the shell to the frame with a
    // ladder normalized on the mean remaining gap.
    let gap_ref = (0..=n_half)
        .map(|i| (square[i] - circ[i]).norm() - s_shell)
        .fold(f64::INFINITY, f64::min);
    // After the 2:1 transition the angular width is about twice the fine arc
    // and grows with distance; the radial ladder restarts thick enough to
    // keep the outer cells near-isotropic.
    let outer_start = (1.8 * arc).max(d_last * RING_GROWTH).min(h_sq);
    let outer = graded_spacings(gap_ref, outer_start, 1.25, 0.75 * h_sq);
    let mut t_outer = Vec::with_capacity(outer.len());
    let mut acc = 0.0;
    for d in &outer {
        acc += d / gap_ref;
        t_outer.push(acc.min(1.0));
    }
    *t_outer.last_mut().unwrap() = 1.0;

    let n_layers = shell_levels + t_outer.len();
    let coarsen_after = if refine { shell_levels } else { usize::MAX };

    let mut half = HalfMesh::new();

    // Ring nodes: fine stations through the shell, frame stations beyond the
    // transition.
    let mut ring_ids: Vec<Vec<usize>> = Vec::with_capacity(n_layers + 1);
    for j in 0..=n_layers {
        let stride = if j > coarsen_after { 2 } else { 1 };
        let ids: Vec<usize> = (0..=n_half)
            .step_by(stride)
            .map(|i| {
                let gap = square[i] - circ[i];
                let unit = gap / gap.norm();
                let p = if j <= shell_levels {
                    circ[i] + unit * shell_offsets[j]
                } else {
                    let shell = circ[i] + unit * s_shell;
                    shell + t_outer[j - shell_levels - 1] * (square[i] - shell)
                };
                let p = if i == 0 || i == n_half { Vec2::new(p.x, 0.0) } else { p };
                half.node(p)
            })
            .collect();
        ring_ids.push(ids);
    }
    for j in 0..n_layers {
        let inner = &ring_ids[j];
        let outer = &ring_ids[j + 1];
        if inner.len() == outer.len() {
            let cols = inner.len() - 1;
            for i in 0..cols {
                let flip = i >= cols / 2;
                let m = if flip { cols - 1 - i } else { i };
                half.quad(inner[i], inner[i + 1], outer[i + 1], outer[i], m + j, flip);
            }
        } else {
            // 2:1 transition: three triangles per coarse sector.
            let sectors = outer.len() - 1;
            for i in 0..sectors {
                let (fa, fm, fb) = (inner[2 * i], inner[2 * i + 1], inner[2 * i + 2]);
                let (ca, cb) = (outer[i], outer[i + 1]);
                half.tri(fa, fm, ca);
                half.tri(fm, fb, cb);
                half.tri(fm, cb, ca);
            }
        }
    }

    // Cartesian ladders. The x ladder is built symmetric: graded left part,
    // uniform band across the frame, mirrored right part.
    let h_cap = FAR_CAP_FACTOR * h_sq;
    let left = graded_spacings(0.5 * spec.length - w, h_sq, FAR_GROWTH, h_cap);
    let mut xs = Vec::new();
    {
        let mut p = -w;
        let mut acc = Vec::new();
        for d in &left {
            p -= d;
            acc.push(p);
        }
        *acc.last_mut().unwrap() = -0.5 * spec.length;
        xs.extend(acc.iter().rev());
    }
    for i in -(k as i64)..=(k as i64) {
        xs.push(if i.unsigned_abs() as usize == k {
            if i < 0 { -w } else { w }
        } else {
            i as f64 * h_sq
        });
    }
    {
        let mut p = w;
        for (m, d) in left.iter().enumerate() {
            p += d;
            xs.push(if m + 1 == left.len() { 0.5 * spec.length } else { p });
        }
    }
    let mut ys = Vec::new();
    for j in 0..=k {
        ys.push(if j == k { w } else { j as f64 * h_sq });
    }
    {
        let up = graded_spacings(0.5 * spec.height - w, h_sq, FAR_GROWTH, h_cap);
        let mut p = w;
        for (m, d) in up.iter().enumerate() {
            p += d;
            ys.push(if m + 1 == up.len() { 0.5 * spec.height } else { p });
        }
    }

    let nx = xs.len() - 1;
    let ny = ys.len() - 1;
    let mut grid_ids = vec![vec![None; nx + 1]; ny + 1];
    let inside_frame = |cx: f64, cy: f64| cx.abs() < w && cy < w;
    for j in 0..ny {
        for i in 0..nx {
            let cx = 0.5 * (xs[i] + xs[i + 1]);
            let cy = 0.5 * (ys[j] + ys[j + 1]);
            if inside_frame(cx, cy) {
                continue;
            }
            for (di, dj) in [(0, 0), (1, 0), (1, 1), (0, 1)] {
                let (ii, jj) = (i + di, j + dj);
                if grid_ids[jj][ii].is_none() {
                    grid_ids[jj][ii] = Some(half.node(Vec2::new(xs[ii], ys[jj])));
                }
            }
            let flip = 2 * i >= nx;
            let m = if flip { nx - 1 - i } else { i };
            half.quad(
                grid_ids[j][i].unwrap(),
                grid_ids[j][i + 1].unwrap(),
                grid_ids[j + 1][i + 1].unwrap(),
                grid_ids[j + 1][i].unwrap(),
                m + j,
                flip,
            );
        }
    }

    // Make the half exactly x-symmetric, then mirror it across y = 0.
    let quant = |v: f64| (v * 1e9).round() as i64;
    let key_of: Vec<(i64, i64)> = half.nodes.iter().map(|p| (quant(p.x), quant(p.y))).collect();
    let lookup: HashMap<(i64, i64), usize> = key_of
        .iter()
        .enumerate()
        .map(|(i, &k)| (k, i))
        .collect();
    for i in 0..half.nodes.len() {
        let p = half.nodes[i];
        let mk = (quant(-p.x), quant(p.y));
        if let Some(&j) = lookup.get(&mk) {
            if j > i {
                half.nodes[j] = Vec2::new(-p.x, p.y);
            } else if j == i {
                half.nodes[i] = Vec2::new(0.0, p.y);
            }
        }
    }

    let seam = 1e-12;
    let mut mirror_of = vec![usize::MAX; half.nodes.len()];
    let mut nodes = half.nodes.clone();
    for (i, p) in half.nodes.iter().enumerate() {
        if p.y.abs() <= seam {
            mirror_of[i] = i;
        } else {
            mirror_of[i] = nodes.len();
            nodes.push(Vec2::new(p.x, -p.y));
        }
    }
    let mut tris = half.tris.clone();
    for t in &half.tris {
        tris.push([mirror_of[t[0]], mirror_of[t[2]], mirror_of[t[1]]]);
    }

    // Classify boundary edges by position.
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for t in &tris {
        for e in 0..3 {
            let (p, q) = (t[e], t[(e + 1) % 3]);
            let key = (p.min(q), p.max(q));
            *count.entry(key).or_insert(0) += 1;
        }
    }
    let tol = 1e-9 * spec.length.max(spec.height);
    let on = |v: f64, target: f64| (v - target).abs() <= tol;
    let mut edges = Vec::new();
    for (&(p, q), &c) in count.iter() {
        if c != 1 {
            continue;
        }
        let (pp, pq) = (nodes[p], nodes[q]);
        let tag = if on(pp.x, -0.5 * spec.length) && on(pq.x, -0.5 * spec.length) {
            BoundaryTag::Inflow
        } else if on(pp.x, 0.5 * spec.length) && on(pq.x, 0.5 * spec.length) {
            BoundaryTag::Outflow
        } else if (on(pp.y, 0.5 * spec.height) && on(pq.y, 0.5 * spec.height))
            || (on(pp.y, -0.5 * spec.height) && on(pq.y, -0.5 * spec.height))
        {
            BoundaryTag::SlipWall
        } else {
            for r in [pp, pq] {
                let s = (r.x / a).powi(2) + (r.y / b).powi(2);
                if (s - 1.0).abs() > 1e-6 {
                    return Err(Error::Mesh(format!(
                        "generator produced a stray boundary edge at ({}, {})",
                        r.x, r.y
                    )));
                }
            }
            BoundaryTag::Design
        };
        edges.push(BoundaryEdge { nodes: [p, q], tag });
    }
    // Deterministic ordering regardless of hash-map iteration.
    edges.sort_by_key(|e| (e.nodes[0], e.nodes[1]));

    Mesh::new(nodes, tris, edges)
}
