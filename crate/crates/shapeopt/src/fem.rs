//! Finite-element infrastructure shared by the flow, adjoint and deformation
//! solvers: Taylor-Hood spaces (quadratic velocity, linear pressure) on
//! triangles, quadrature rules, and a sequential sparse direct solve.

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::mesh::Mesh;
use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use std::collections::HashMap;

/// Degree-5 triangle rule (7 points), weights summing to 1.
pub const TRI_QUAD: [([f64; 3], f64); 7] = {
    const A1: f64 = 0.059715871789769820;
    const B1: f64 = 0.470142064105115090;
    const W1: f64 = 0.132394152788506180;
    const A2: f64 = 0.797426985353087320;
    const B2: f64 = 0.101286507323456340;
    const W2: f64 = 0.125939180544827150;
    [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
        ([A1, B1, B1], W1),
        ([B1, A1, B1], W1),
        ([B1, B1, A1], W1),
        ([A2, B2, B2], W2),
        ([B2, A2, B2], W2),
        ([B2, B2, A2], W2),
    ]
};

/// 4-point Gauss-Legendre rule on [0, 1], weights summing to 1.
pub const EDGE_QUAD: [(f64, f64); 4] = [
    (0.069431844202973714, 0.173927422568726930),
    (0.330009478207571870, 0.326072577431273100),
    (0.669990521792428100, 0.326072577431273100),
    (0.930568155797026300, 0.173927422568726930),
];

/// Values of the six quadratic basis functions at barycentric coordinates.
/// Nodes 0-2 sit on the vertices, 3-5 on edge midpoints (01, 12, 20).
pub fn p2_values(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

/// Physical gradients of the six quadratic basis functions, given the
/// barycentric coordinates of the evaluation point and the (constant)
/// physical gradients of the barycentric functions.
pub fn p2_grads(l: [f64; 3], gl: [Vec2; 3]) -> [Vec2; 6] {
    [
        gl[0] * (4.0 * l[0] - 1.0),
        gl[1] * (4.0 * l[1] - 1.0),
        gl[2] * (4.0 * l[2] - 1.0),
        (gl[0] * l[1] + gl[1] * l[0]) * 4.0,
        (gl[1] * l[2] + gl[2] * l[1]) * 4.0,
        (gl[2] * l[0] + gl[0] * l[2]) * 4.0,
    ]
}

/// Constant geometric data of one triangle.
#[derive(Clone, Copy, Debug)]
pub struct TriGeom {
    pub area: f64,
    /// Physical gradients of the barycentric coordinate functions.
    pub grad_l: [Vec2; 3],
}

impl TriGeom {
    pub fn new(p0: Vec2, p1: Vec2, p2: Vec2) -> TriGeom {
        let a2 = (p1 - p0).cross(p2 - p0);
        TriGeom {
            area: 0.5 * a2,
            grad_l: [
                Vec2::new(p1.y - p2.y, p2.x - p1.x) / a2,
                Vec2::new(p2.y - p0.y, p0.x - p2.x) / a2,
                Vec2::new(p0.y - p1.y, p1.x - p0.x) / a2,
            ],
        }
    }

    pub fn of_cell(mesh: &Mesh, cell: usize) -> TriGeom {
        let [a, b, c] = mesh.triangles()[cell];
        TriGeom::new(mesh.node(a), mesh.node(b), mesh.node(c))
    }
}

/// Taylor-Hood degree-of-freedom layout for one mesh.
///
/// Velocity lives on vertices and edge midpoints, two components per node,
/// numbered `2*node + comp`; pressure lives on vertices, numbered after all
/// velocity unknowns. Edge numbering is deterministic (first encounter in
/// cell order).
pub struct Dofs {
    pub n_vertices: usize,
    pub n_edges: usize,
    /// Vertex pair of each velocity edge node (midpoint node `n_vertices + e`).
    pub edges: Vec<[usize; 2]>,
    /// The three edge ids of each triangle, in local order (01, 12, 20).
    pub tri_edges: Vec<[usize; 3]>,
    edge_ids: HashMap<(usize, usize), usize>,
}

impl Dofs {
    pub fn new(mesh: &Mesh) -> Dofs {
        let mut edge_ids = HashMap::new();
        let mut edges = Vec::new();
        let mut tri_edges = Vec::with_capacity(mesh.cell_count());
        for t in mesh.triangles() {
            let mut ids = [0usize; 3];
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let next = edges.len();
                let id = *edge_ids.entry(key).or_insert(next);
                if id == next {
                    edges.push([key.0, key.1]);
                }
                ids[k] = id;
            }
            tri_edges.push(ids);
        }
        Dofs {
            n_vertices: mesh.node_count(),
            n_edges: edges.len(),
            edges,
            tri_edges,
            edge_ids,
        }
    }

    /// Number of velocity nodes (vertices + edge midpoints).
    pub fn n_vel_nodes(&self) -> usize {
        self.n_vertices + self.n_edges
    }

    /// Total unknowns: two velocity components per node plus one pressure per
    /// vertex.
    pub fn n_total(&self) -> usize {
        2 * self.n_vel_nodes() + self.n_vertices
    }

    pub fn vel_dof(&self, vel_node: usize, comp: usize) -> usize {
        2 * vel_node + comp
    }

    pub fn pressure_dof(&self, vertex: usize) -> usize {
        2 * self.n_vel_nodes() + vertex
    }

    /// Velocity midpoint node of the edge between two vertices.
    pub fn edge_node(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_ids
            .get(&(a.min(b), a.max(b)))
            .map(|&e| self.n_vertices + e)
    }

    /// The six velocity nodes of a triangle: vertices then edge midpoints.
    pub fn tri_vel_nodes(&self, mesh: &Mesh, cell: usize) -> [usize; 6] {
        let t = mesh.triangles()[cell];
        let e = self.tri_edges[cell];
        [
            t[0],
            t[1],
            t[2],
            self.n_vertices + e[0],
            self.n_vertices + e[1],
            self.n_vertices + e[2],
        ]
    }

    /// Physical position of a velocity node.
    pub fn vel_node_pos(&self, mesh: &Mesh, node: usize) -> Vec2 {
        if node < self.n_vertices {
            mesh.node(node)
        } else {
            let [a, b] = self.edges[node - self.n_vertices];
            (mesh.node(a) + mesh.node(b)) * 0.5
        }
    }
}

/// Dirichlet constraints: an optional prescribed value per unknown.
#[derive(Clone, Debug)]
pub struct Constraints {
    values: Vec<Option<f64>>,
}

impl Constraints {
    pub fn none(n: usize) -> Constraints {
        Constraints {
            values: vec![None; n],
        }
    }

    pub fn set(&mut self, dof: usize, value: f64) {
        self.values[dof] = Some(value);
    }

    pub fn get(&self, dof: usize) -> Option<f64> {
        self.values[dof]
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.values[dof].is_some()
    }

    /// Writes the prescribed values into a state vector.
    pub fn impose(&self, x: &mut [f64]) {
        for (i, v) in self.values.iter().enumerate() {
            if let Some(v) = v {
                x[i] = *v;
            }
        }
    }
}

/// Growable triplet system with a dense right-hand side.
pub struct LinearSystem {
    pub n: usize,
    triplets: Vec<Triplet<usize, usize, f64>>,
    pub rhs: Vec<f64>,
}

impl LinearSystem {
    pub fn new(n: usize) -> LinearSystem {
        LinearSystem {
            n,
            triplets: Vec::new(),
            rhs: vec![0.0; n],
        }
    }

    #[inline]
    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        if v != 0.0 {
            self.triplets.push(Triplet::new(row, col, v));
        }
    }

    pub fn reserve(&mut self, n: usize) {
        self.triplets.reserve(n);
    }

    #[inline]
    pub fn add_rhs(&mut self, row: usize, v: f64) {
        self.rhs[row] += v;
    }

    /// Eliminates constrained unknowns: their rows become identity with the
    /// prescribed value on the right-hand side, and their columns are folded
    /// into the right-hand side of free rows.
    pub fn apply_constraints(&mut self, bc: &Constraints) {
        let mut kept = Vec::with_capacity(self.triplets.len());
        for t in &self.triplets {
            let (r, c, v) = (t.row, t.col, t.val);
            if bc.is_constrained(r) {
                continue;
            }
            if let Some(g) = bc.get(c) {
                self.rhs[r] -= v * g;
            } else {
                kept.push(Triplet::new(r, c, v));
            }
        }
        for d in 0..self.n {
            if let Some(val) = bc.get(d) {
                kept.push(Triplet::new(d, d, 1.0));
                self.rhs[d] = val;
            }
        }
        self.triplets = kept;
    }

    /// Residual `b - A x` of the current system.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.rhs.clone();
        for t in &self.triplets {
            r[t.row] -= t.val * x[t.col];
        }
        r
    }

    /// Factorizes and solves, with a few steps of iterative refinement until
    /// the linear residual satisfies `||b - Ax|| <= tol * (1 + ||b||)`.
    /// Symbolic factorizations are cached per sparsity pattern: connectivity
    /// is fixed for the lifetime of a run, so the analysis is paid once.
    pub fn solve(&self, tol: f64, max_refine: usize) -> Result<(Vec<f64>, f64)> {
        ensure_sequential();
        let a = SparseColMat::try_new_from_triplets(self.n, self.n, &self.triplets)
            .map_err(|e| Error::Solver(format!("assembling sparse matrix: {e:?}")))?;
        let lu = factorize_cached(&a)?;
        let b = Mat::from_fn(self.n, 1, |i, _| self.rhs[i]);
        let mut x = lu.solve(&b);
        let norm_b = norm2(self.rhs.iter().copied());
        let mut res = f64::INFINITY;
        for _ in 0..=max_refine {
            let r = &b - &a * &x;
            res = norm2((0..self.n).map(|i| r[(i, 0)]));
            if res <= tol * (1.0 + norm_b) {
                break;
            }
            let dx = lu.solve(&r);
            x += &dx;
        }
        if !res.is_finite() {
            return Err(Error::Solver("linear solve produced non-finite values".into()));
        }
        Ok(((0..self.n).map(|i| x[(i, 0)]).collect(), res))
    }

    pub fn triplets(&self) -> &[Triplet<usize, usize, f64>] {
        &self.triplets
    }

    /// Dense copy, for small-system tests.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.n]; self.n];
        for t in &self.triplets {
            m[t.row][t.col] += t.val;
        }
        m
    }
}

pub fn norm2(it: impl Iterator<Item = f64>) -> f64 {
    it.map(|v| v * v).sum::<f64>().sqrt()
}

/// faer is pinned to sequential execution so assembly-order determinism
/// carries through the factorization.
fn ensure_sequential() {
    use std::sync::Once;
    static ONCE: Once = Once::new();
    ONCE.call_once(|| {
        faer::set_global_parallelism(faer::Par::Seq);
    });
}

/// Numeric LU with the symbolic analysis cached per sparsity pattern. The
/// cache key combines size, nonzero count and a structure hash; entries are
/// bounded with oldest-first eviction. Symbolic analysis is deterministic,
/// so cache hits cannot change results.
fn factorize_cached(
    a: &SparseColMat<usize, f64>,
) -> Result<faer::sparse::linalg::solvers::Lu<usize, f64>> {
    use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
    use std::sync::Mutex;
    static CACHE: Mutex<Vec<((usize, usize, u64), SymbolicLu<usize>)>> = Mutex::new(Vec::new());

    let sym = a.symbolic();
    let mut h: u64 = 0xcbf29ce484222325;
    let mut feed = |v: usize| {
        h ^= v as u64;
        h = h.wrapping_mul(0x100000001b3);
    };
    for &p in sym.col_ptr() {
        feed(p);
    }
    for &i in sym.row_idx() {
        feed(i);
    }
    let key = (a.nrows(), a.compute_nnz(), h);

    let cached = {
        let cache = CACHE.lock().expect("symbolic cache lock");
        cache.iter().find(|(k, _)| *k == key).map(|(_, s)| s.clone())
    };
    let symbolic = match cached {
        Some(s) => s,
        None => {
            let s = SymbolicLu::try_new(sym)
                .map_err(|e| Error::Solver(format!("symbolic factorization failed: {e:?}")))?;
            let mut cache = CACHE.lock().expect("symbolic cache lock");
            if cache.len() >= 8 {
                cache.remove(0);
            }
            cache.push((key, s.clone()));
            s
        }
    };
    Lu::try_new_with_symbolic(symbolic, a.as_ref())
        .map_err(|e| Error::Solver(format!("sparse LU factorization failed: {e:?}")))
}
