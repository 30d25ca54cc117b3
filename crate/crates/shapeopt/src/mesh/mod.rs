//! Unstructured triangular meshes with tagged boundary loops.
//!
//! The mesh is the design variable of the optimization. Connectivity is fixed
//! for the lifetime of a run; only node positions change, through [`Mesh::morph`].
//! All queries are pure functions of the mesh.

mod gen;
mod io;
mod quality;
mod vtk;

pub use gen::{channel_with_obstacle, rectangle, ChannelSpec, Obstacle};
pub use io::{load_mesh, save_native, MeshFormat};
pub use quality::{triangle_quality, QualityReport};
pub use vtk::{write_vtk, FieldData};

use crate::error::{Error, Result};
use crate::geom::{signed_area2, Vec2};
use std::collections::HashMap;

/// Boundary condition class of a tagged boundary edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    /// Prescribed velocity.
    Inflow,
    /// Zero traction.
    Outflow,
    /// Frictionless wall: zero normal velocity, zero tangential traction.
    SlipWall,
    /// The obstacle boundary, free to deform; no-slip in the flow problem.
    Design,
}

impl BoundaryTag {
    pub fn name(self) -> &'static str {
        match self {
            BoundaryTag::Inflow => "inflow",
            BoundaryTag::Outflow => "outflow",
            BoundaryTag::SlipWall => "slip",
            BoundaryTag::Design => "design",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "inflow" => Some(BoundaryTag::Inflow),
            "outflow" => Some(BoundaryTag::Outflow),
            "slip" => Some(BoundaryTag::SlipWall),
            "design" => Some(BoundaryTag::Design),
            _ => None,
        }
    }
}

/// A tagged boundary edge. After construction the node pair is oriented the
/// way its owning triangle traverses it, so `(b - a).perp()` points out of
/// the fluid.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
}

/// Conforming triangle mesh of the fluid domain.
#[derive(Clone, Debug)]
pub struct Mesh {
    nodes: Vec<Vec2>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    /// Triangle owning each boundary edge (parallel to `boundary_edges`).
    edge_cell: Vec<usize>,
    /// For each node, `true` when it lies on any boundary edge.
    boundary_node: Vec<bool>,
    /// For each node, `true` when all its boundary edges are Design edges
    /// or it is interior. Nodes where this is `false` are pinned by morphs.
    movable: Vec<bool>,
}

/// Per-node data along the Design boundary, in ascending node order.
///
/// Normals are unit, point out of the fluid (into the obstacle), and come
/// from averaging the two adjacent Design edge normals. `weights` carry half
/// the total length of the adjacent Design edges: the trapezoidal quadrature
/// weight for boundary integrals.
#[derive(Clone, Debug)]
pub struct DesignBoundary {
    pub nodes: Vec<usize>,
    pub normals: Vec<Vec2>,
    pub weights: Vec<f64>,
    index: HashMap<usize, usize>,
    /// Indices into `mesh.boundary_edges()` of the Design edges.
    pub edges: Vec<usize>,
}

impl DesignBoundary {
    /// Position of `node` in the design-node arrays, if it is a design node.
    pub fn index_of(&self, node: usize) -> Option<usize> {
        self.index.get(&node).copied()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

impl Mesh {
    /// Builds and validates a mesh. Boundary edges are reoriented to match
    /// their owning triangle.
    pub fn new(
        nodes: Vec<Vec2>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<BoundaryEdge>,
    ) -> Result<Mesh> {
        let nn = nodes.len();
        for (i, p) in nodes.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::Mesh(format!("node {i} has non-finite coordinates")));
            }
        }
        for (i, t) in triangles.iter().enumerate() {
            for &v in t {
                if v >= nn {
                    return Err(Error::Mesh(format!("cell {i} references node {v} out of range")));
                }
            }
            if t[0] == t[1] || t[1] == t[2] || t[2] == t[0] {
                return Err(Error::Mesh(format!("cell {i} has repeated nodes")));
            }
            let a2 = signed_area2(nodes[t[0]], nodes[t[1]], nodes[t[2]]);
            if a2 <= 0.0 {
                return Err(Error::Mesh(format!(
                    "inverted cell {i} (signed area {:.3e})",
                    0.5 * a2
                )));
            }
        }

        // Directed edge -> owning triangle. A boundary edge of the mesh is one
        // whose reverse never occurs.
        let mut owner: HashMap<(usize, usize), usize> = HashMap::new();
        for (ti, t) in triangles.iter().enumerate() {
            for k in 0..3 {
                let e = (t[k], t[(k + 1) % 3]);
                if owner.insert(e, ti).is_some() {
                    return Err(Error::Mesh(format!(
                        "edge ({}, {}) traversed twice in the same direction; non-manifold or misoriented cells",
                        e.0, e.1
                    )));
                }
            }
        }

        let mut tagged: HashMap<(usize, usize), usize> = HashMap::new();
        let mut oriented = Vec::with_capacity(boundary_edges.len());
        let mut edge_cell = Vec::with_capacity(boundary_edges.len());
        for (k, be) in boundary_edges.iter().enumerate() {
            let [a, b] = be.nodes;
            if a >= nn || b >= nn {
                return Err(Error::Mesh(format!("boundary edge {k} references node out of range")));
            }
            let (dir, cell) = if let Some(&c) = owner.get(&(a, b)) {
                ((a, b), c)
            } else if let Some(&c) = owner.get(&(b, a)) {
                ((b, a), c)
            } else {
                return Err(Error::Mesh(format!(
                    "boundary edge ({a}, {b}) is not an edge of any cell"
                )));
            };
            if owner.contains_key(&(dir.1, dir.0)) {
                return Err(Error::Mesh(format!(
                    "boundary edge ({a}, {b}) is interior (shared by two cells)"
                )));
            }
            if tagged.insert(dir, k).is_some() {
                return Err(Error::Mesh(format!("boundary edge ({a}, {b}) tagged twice")));
            }
            oriented.push(BoundaryEdge {
                nodes: [dir.0, dir.1],
                tag: be.tag,
            });
            edge_cell.push(cell);
        }

        // Every mesh-boundary edge must carry a tag, and the tagged edges must
        // form closed loops: one outgoing and one incoming per boundary node.
        let mut out_deg: HashMap<usize, usize> = HashMap::new();
        let mut in_deg: HashMap<usize, usize> = HashMap::new();
        for (&(a, b), _) in owner.iter() {
            if !owner.contains_key(&(b, a)) {
                if !tagged.contains_key(&(a, b)) {
                    return Err(Error::Mesh(format!("untagged boundary edge ({a}, {b})")));
                }
                *out_deg.entry(a).or_insert(0) += 1;
                *in_deg.entry(b).or_insert(0) += 1;
            }
        }
        for (&n, &d) in out_deg.iter() {
            if d != 1 || in_deg.get(&n) != Some(&1) {
                return Err(Error::Mesh(format!(
                    "boundary is not a union of closed loops at node {n}"
                )));
            }
        }

        let mut used = vec![false; nn];
        for t in &triangles {
            for &v in t {
                used[v] = true;
            }
        }
        if let Some(i) = used.iter().position(|&u| !u) {
            return Err(Error::Mesh(format!("node {i} is not referenced by any cell")));
        }

        let mut boundary_node = vec![false; nn];
        let mut movable = vec![true; nn];
        for be in &oriented {
            for &v in &be.nodes {
                boundary_node[v] = true;
                if be.tag != BoundaryTag::Design {
                    movable[v] = false;
                }
            }
        }

        Ok(Mesh {
            nodes,
            triangles,
            boundary_edges: oriented,
            edge_cell,
            boundary_node,
            movable,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn cell_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> Vec2 {
        self.nodes[i]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    /// Triangle owning boundary edge `k`.
    pub fn boundary_edge_cell(&self, k: usize) -> usize {
        self.edge_cell[k]
    }

    pub fn is_boundary_node(&self, i: usize) -> bool {
        self.boundary_node[i]
    }

    /// A node may move under morphs iff it is interior or lies exclusively on
    /// Design edges.
    pub fn is_movable_node(&self, i: usize) -> bool {
        self.movable[i]
    }

    pub fn signed_area(&self, cell: usize) -> f64 {
        let [a, b, c] = self.triangles[cell];
        0.5 * signed_area2(self.nodes[a], self.nodes[b], self.nodes[c])
    }

    /// Total fluid area (the paper's wetted "volume" in 2D).
    pub fn volume(&self) -> f64 {
        (0..self.cell_count()).map(|c| self.signed_area(c)).sum()
    }

    /// Area-weighted centroid of the fluid domain.
    pub fn barycenter(&self) -> Vec2 {
        let mut m = Vec2::ZERO;
        let mut vol = 0.0;
        for t in &self.triangles {
            let (a, b, c) = (self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]);
            let area = 0.5 * signed_area2(a, b, c);
            m += (a + b + c) * (area / 3.0);
            vol += area;
        }
        m / vol
    }

    /// Gathers the Design nodes with their averaged outward (out-of-fluid)
    /// unit normals and trapezoidal boundary weights.
    pub fn design_boundary(&self) -> Result<DesignBoundary> {
        let mut normal_sum: HashMap<usize, Vec2> = HashMap::new();
        let mut weight: HashMap<usize, f64> = HashMap::new();
        let mut edges = Vec::new();
        for (k, be) in self.boundary_edges.iter().enumerate() {
            if be.tag != BoundaryTag::Design {
                continue;
            }
            edges.push(k);
            let [a, b] = be.nodes;
            let d = self.nodes[b] - self.nodes[a];
            let len = d.norm();
            if len == 0.0 {
                return Err(Error::Mesh(format!("degenerate design edge ({a}, {b})")));
            }
            let n = d.perp() / len;
            for &v in &[a, b] {
                *normal_sum.entry(v).or_insert(Vec2::ZERO) += n;
                *weight.entry(v).or_insert(0.0) += 0.5 * len;
            }
        }
        let mut nodes: Vec<usize> = normal_sum.keys().copied().collect();
        nodes.sort_unstable();
        let mut normals = Vec::with_capacity(nodes.len());
        let mut weights = Vec::with_capacity(nodes.len());
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, &n) in nodes.iter().enumerate() {
            let s = normal_sum[&n];
            if s.norm() == 0.0 {
                return Err(Error::Mesh(format!(
                    "design normals cancel at node {n}; boundary folds back on itself"
                )));
            }
            normals.push(s.normalized());
            weights.push(weight[&n]);
            index.insert(n, i);
        }
        Ok(DesignBoundary {
            nodes,
            normals,
            weights,
            index,
            edges,
        })
    }

    /// Per-design-node outward unit normals (out of the fluid, into the
    /// obstacle), paired with their node indices in ascending order.
    pub fn design_normals(&self) -> Result<Vec<(usize, Vec2)>> {
        let db = self.design_boundary()?;
        Ok(db.nodes.iter().copied().zip(db.normals).collect())
    }

    /// Perturbation of identity: moves every node by `t * u` and revalidates.
    /// Connectivity and tags are unchanged. Fails with the worst inverted
    /// cell if the deformation tangles the mesh.
    pub fn morph(&self, u: &[Vec2], t: f64) -> Result<Mesh> {
        if u.len() != self.node_count() {
            return Err(Error::Mesh(format!(
                "deformation field has {} entries for {} nodes",
                u.len(),
                self.node_count()
            )));
        }
        for (i, mv) in self.movable.iter().enumerate() {
            if !mv && (u[i].x != 0.0 || u[i].y != 0.0) {
                return Err(Error::Mesh(format!(
                    "deformation is nonzero on fixed boundary node {i}"
                )));
            }
        }
        let nodes: Vec<Vec2> = self
            .nodes
            .iter()
            .zip(u)
            .map(|(&x, &du)| x + du * t)
            .collect();
        let mut worst: Option<(usize, f64)> = None;
        for (ci, tri) in self.triangles.iter().enumerate() {
            let a2 = signed_area2(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
            if a2 <= 0.0 && worst.map_or(true, |(_, w)| a2 < w) {
                worst = Some((ci, a2));
            }
        }
        if let Some((cell, a2)) = worst {
            return Err(Error::MorphInversion {
                cell,
                area: 0.5 * a2,
            });
        }
        Ok(Mesh {
            nodes,
            triangles: self.triangles.clone(),
            boundary_edges: self.boundary_edges.clone(),
            edge_cell: self.edge_cell.clone(),
            boundary_node: self.boundary_node.clone(),
            movable: self.movable.clone(),
        })
    }

    /// Per-cell and global quality metrics; tip metrics are filled in when ahi
    /// Design loop exists.
    pub fn quality(&self) -> QualityReport {
        quality::report(self)
    }

    /// Upstream-tip opening angle (degrees, measured inside the obstacle) and
    /// the half-axis ratio a/b of the Design loop's bounding box.
    pub fn tip_metrics(&self) -> Result<(f64, f64)> {
        let db = self.design_boundary()?;
        if db.is_empty() {
            return Err(Error::Mesh("mesh has no design boundary".into()));
        }
        // Upstream tip: minimal x; ties (within 1e-12) resolved toward the
        // smaller |y|, then the smaller node index.
        let mut tip = db.nodes[0];
        for &n in &db.nodes[1..] {
            let (p, q) = (self.nodes[n], self.nodes[tip]);
            if p.x < q.x - 1e-12 {
                tip = n;
            } else if (p.x - q.x).abs() <= 1e-12
                && (p.y.abs() < q.y.abs() || (p.y.abs() == q.y.abs() && n < tip))
            {
                tip = n;
            }
        }
        // The two design edges meeting at the tip.
        let mut nbrs = Vec::new();
        for &k in &db.edges {
            let [a, b] = self.boundary_edges[k].nodes;
            if a == tip {
                nbrs.push(b);
            } else if b == tip {
                nbrs.push(a);
            }
        }
        if nbrs.len() != 2 {
            return Err(Error::Mesh(format!(
                "tip node {tip} has {} adjacent design edges; design boundary is not a closed loop",
                nbrs.len()
            )));
        }
        let p = self.nodes[tip];
        let ea = (self.nodes[nbrs[0]] - p).normalized();
        let eb = (self.nodes[nbrs[1]] - p).normalized();
        let mut angle = ea.dot(eb).clamp(-1.0, 1.0).acos();
        // Pick the side of the wedge the obstacle lies on: the tip normal
        // points into the obstacle.
        let ni = db.index_of(tip).expect("tip is a design node");
        let bisector = ea + eb;
        if bisector.norm() > 1e-12 && bisector.dot(db.normals[ni]) < 0.0 {
            angle = 2.0 * std::f64::consts::PI - angle;
        }
        let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
        for &n in &db.nodes {
            let p = self.nodes[n];
            xmin = xmin.min(p.x);
            xmax = xmax.max(p.x);
            ymin = ymin.min(p.y);
            ymax = ymax.max(p.y);
        }
        let a = 0.5 * (xmax - xmin);
        let b = 0.5 * (ymax - ymin);
        Ok((angle.to_degrees(), a / b))
    }
}
