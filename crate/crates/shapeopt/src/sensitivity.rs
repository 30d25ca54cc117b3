//! Boundary shape sensitivity and directional shape derivatives.
//!
//! The scalar sensitivity density `gamma` lives on the Design nodes. Its flow
//! part couples the primal and adjoint normal derivatives; the remaining
//! terms carry the augmented-Lagrange constraint forces. A deformation `u`
//! changes the objective at first order by the boundary quadrature of
//! `gamma * (u . n)` over the Design edges.

use crate::adjoint::AdjointState;
use crate::error::{Error, Result};
use crate::fem::{p2_grads, Dofs, TriGeom};
use crate::flow::{FlowState, FluidProperties};
use crate::geom::Vec2;
use crate::mesh::{BoundaryTag, DesignBoundary, Mesh};

/// Multipliers, penalties, targets and tolerances of the augmented Lagrange
/// method, plus the design step size.
#[derive(Clone, Copy, Debug)]
pub struct AugLagState {
    pub lambda_b: Vec2,
    pub lambda_c: f64,
    pub rho_b: f64,
    pub rho_c: f64,
    /// Penalty growth factor applied when a constraint stays violated.
    pub rho_inc: f64,
    pub tau_b: f64,
    pub tau_c: f64,
    pub target_barycenter: Vec2,
    pub target_volume: f64,
    /// Design step size applied to the deformation field.
    pub step_size: f64,
}

impl AugLagState {
    /// Zero multipliers with the 2D low-Reynolds reference parameters.
    pub fn new(target_barycenter: Vec2, target_volume: f64) -> AugLagState {
        AugLagState {
            lambda_b: Vec2::ZERO,
            lambda_c: 0.0,
            rho_b: 5e7,
            rho_c: 1e2,
            rho_inc: 2.0,
            tau_b: 1e-6,
            tau_c: 2e-2,
            target_barycenter,
            target_volume,
            step_size: 2e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| {
            Err(Error::Config {
                key: key.into(),
                msg: msg.into(),
            })
        };
        if !(self.rho_b > 0.0 && self.rho_c > 0.0) {
            return bad("auglag.rho", "penalty factors must be positive");
        }
        if !(self.rho_inc > 1.0) {
            return bad("auglag.rho_inc", "penalty growth factor must exceed 1");
        }
        if !(self.tau_b > 0.0 && self.tau_c > 0.0) {
            return bad("auglag.tau", "constraint tolerances must be positive");
        }
        if !(self.step_size > 0.0) {
            return bad("auglag.step_size", "step size must be positive");
        }
        if !(self.target_volume > 0.0) {
            return bad("auglag.target_volume", "target volume must be positive");
        }
        Ok(())
    }
}

/// Sensitivity density on the Design nodes (ascending node order, aligned
/// with [`Mesh::design_boundary`]).
#[derive(Clone, Debug)]
pub struct SensitivityField {
    pub nodes: Vec<usize>,
    pub gamma: Vec<f64>,
}

impl SensitivityField {
    pub fn max_abs(&self) -> f64 {
        self.gamma.iter().fold(0.0, |m, g| m.max(g.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.gamma.iter().all(|&g| g == 0.0)
    }
}

/// Finite-element velocity gradient averaged to the Design nodes: for each
/// node, the mean of the gradients evaluated at that node in the cells owning
/// its adjacent Design edges. Returns Jacobian rows per design node.
pub(crate) fn nodal_design_gradients(
    mesh: &Mesh,
    dofs: &Dofs,
    field: &[Vec2],
    db: &DesignBoundary,
) -> Vec<[Vec2; 2]> {
    let mut sums = vec![[Vec2::ZERO; 2]; db.len()];
    let mut counts = vec![0usize; db.len()];
    for &k in &db.edges {
        let cell = mesh.boundary_edge_cell(k);
        let tri = mesh.triangles()[cell];
        let geom = TriGeom::of_cell(mesh, cell);
        let nodes = dofs.tri_vel_nodes(mesh, cell);
        for &node in &mesh.boundary_edges()[k].nodes {
            let loc = tri.iter().position(|&v| v == node).expect("edge node in cell");
            let mut l = [0.0; 3];
            l[loc] = 1.0;
            let ng = p2_grads(l, geom.grad_l);
            let mut rows = [Vec2::ZERO; 2];
            for j in 0..6 {
                let v = field[nodes[j]];
                rows[0] += ng[j] * v.x;
                rows[1] += ng[j] * v.y;
            }
            let i = db.index_of(node).expect("design node");
            sums[i][0] += rows[0];
            sums[i][1] += rows[1];
            counts[i] += 1;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s[0] = s[0] / c as f64;
            s[1] = s[1] / c as f64;
        }
    }
    sums
}

/// Weak residual of the frozen primal state paired with the adjoint state
/// over one cell with explicitly supplied vertex positions: the Lagrangian
/// volume integrand whose geometry derivative yields the flow sensitivity.
#[allow(clippy::too_many_arguments)]
fn cell_lagrangian(
    pts: [Vec2; 3],
    v_local: &[Vec2; 6],
    a_local: &[Vec2; 6],
    p_local: &[f64; 3],
    ph_local: &[f64; 3],
    mu: f64,
    rho: f64,
) -> f64 {
    let geom = TriGeom::new(pts[0], pts[1], pts[2]);
    let mut s = 0.0;
    for (l, wq) in crate::fem::TRI_QUAD {
        let weight = wq * geom.area;
        let nv = crate::fem::p2_values(l);
        let ng = p2_grads(l, geom.grad_l);
        let mut v_at = Vec2::ZERO;
        let mut a_at = Vec2::ZERO;
        let mut gv = [Vec2::ZERO; 2];
        let mut ga = [Vec2::ZERO; 2];
        for k in 0..6 {
            v_at += v_local[k] * nv[k];
            a_at += a_local[k] * nv[k];
            gv[0] += ng[k] * v_local[k].x;
            gv[1] += ng[k] * v_local[k].y;
            ga[0] += ng[k] * a_local[k].x;
            ga[1] += ng[k] * a_local[k].y;
        }
        let p_at: f64 = (0..3).map(|i| l[i] * p_local[i]).sum();
        let ph_at: f64 = (0..3).map(|i| l[i] * ph_local[i]).sum();
        let sym_visc = 2.0 * gv[0].x * ga[0].x
            + (gv[0].y + gv[1].x) * (ga[0].y + ga[1].x)
            + 2.0 * gv[1].y * ga[1].y;
        let conv = rho * (v_at.dot(gv[0]) * a_at.x + v_at.dot(gv[1]) * a_at.y);
        let div_v = gv[0].x + gv[1].y;
        let div_a = ga[0].x + ga[1].y;
        s += weight * (mu * sym_visc + conv - p_at * div_a - ph_at * div_v);
    }
    s
}

/// Assembles the sensitivity density on the Design boundary from converged
/// primal and adjoint states and the current constraint multipliers.
///
/// The flow contribution at each node is the geometry derivative of the
/// discrete Lagrangian under a unit normal displacement of that node,
/// divided by the node's boundary weight. Because the adjoint carries the
/// objective's boundary data, this equals the derivative of the discrete
/// objective itself, so directional derivatives built from this density
/// match finite differences of the penalized objective. The constraint terms
/// enter in closed form.
pub fn shape_sensitivity(
    mesh: &Mesh,
    dofs: &Dofs,
    primal: &FlowState,
    adjoint: &AdjointState,
    props: &FluidProperties,
    al: &AugLagState,
) -> Result<SensitivityField> {
    if primal.velocity.len() != dofs.n_vel_nodes()
        || adjoint.velocity.len() != dofs.n_vel_nodes()
        || primal.pressure.len() != dofs.n_vertices
        || adjoint.pressure.len() != dofs.n_vertices
    {
        return Err(Error::Solver("state sizes do not match mesh".into()));
    }
    let db = mesh.design_boundary()?;
    let vol = mesh.volume();
    let beta = mesh.barycenter();
    let b = beta - al.target_barycenter;
    let c = vol - al.target_volume;

    let mut cells_of: Vec<Vec<usize>> = vec![Vec::new(); mesh.node_count()];
    for (ci, t) in mesh.triangles().iter().enumerate() {
        for &vtx in t {
            cells_of[vtx].push(ci);
        }
    }

    let delta = 1e-6;
    let mu = props.viscosity;
    let rho = props.density;
    let mut gamma = Vec::with_capacity(db.len());
    for i in 0..db.len() {
        let node = db.nodes[i];
        let n = db.normals[i];
        let patch = |offset: Vec2| -> f64 {
            let mut s = 0.0;
            for &cell in &cells_of[node] {
                let tri = mesh.triangles()[cell];
                let mut pts = [mesh.node(tri[0]), mesh.node(tri[1]), mesh.node(tri[2])];
                for (loc, &vtx) in tri.iter().enumerate() {
                    if vtx == node {
                        pts[loc] += offset;
                    }
                }
                let nodes = dofs.tri_vel_nodes(mesh, cell);
                let v_local: [Vec2; 6] = std::array::from_fn(|k| primal.velocity[nodes[k]]);
                let a_local: [Vec2; 6] = std::array::from_fn(|k| adjoint.velocity[nodes[k]]);
                let p_local: [f64; 3] = std::array::from_fn(|k| primal.pressure[tri[k]]);
                let ph_local: [f64; 3] = std::array::from_fn(|k| adjoint.pressure[tri[k]]);
                s += cell_lagrangian(pts, &v_local, &a_local, &p_local, &ph_local, mu, rho);
            }
            s
        };
        let flow_term = (patch(n * delta) - patch(n * -delta)) / (2.0 * delta * db.weights[i]);
        let x = mesh.node(node) - beta;
        let g = flow_term
            + al.lambda_b.dot(x) / vol
            + al.lambda_c
            + al.rho_b * b.dot(x) / vol
            + al.rho_c * c;
        if !g.is_finite() {
            return Err(Error::Solver(format!("non-finite sensitivity at node {node}")));
        }
        gamma.push(g);
    }
    Ok(SensitivityField {
        nodes: db.nodes,
        gamma,
    })
}

/// Directional shape derivative: trapezoidal quadrature of `gamma * (u . n)`
/// over the Design edges. `u` is indexed by mesh node.
pub fn shape_derivative(mesh: &Mesh, gamma: &SensitivityField, u: &[Vec2]) -> Result<f64> {
    if u.len() != mesh.node_count() {
        return Err(Error::Mesh(format!(
            "deformation field has {} entries for {} nodes",
            u.len(),
            mesh.node_count()
        )));
    }
    let db = mesh.design_boundary()?;
    if db.nodes != gamma.nodes {
        return Err(Error::Mesh(
            "sensitivity field does not match the mesh design boundary".into(),
        ));
    }
    let mut jp = 0.0;
    for i in 0..db.len() {
        jp += gamma.gamma[i] * u[db.nodes[i]].dot(db.normals[i]) * db.weights[i];
    }
    Ok(jp)
}

/// Total length of the Design boundary.
pub fn design_length(mesh: &Mesh) -> Result<f64> {
    let mut len = 0.0;
    for be in mesh.boundary_edges() {
        if be.tag == BoundaryTag::Design {
            len += (mesh.node(be.nodes[1]) - mesh.node(be.nodes[0])).norm();
        }
    }
    Ok(len)
}
