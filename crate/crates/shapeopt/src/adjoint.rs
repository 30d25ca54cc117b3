//! Continuous adjoint of the drag objective on the frozen primal state.
//!
//! The adjoint operator is assembled as the exact transpose of the
//! Newton-linearized primal operator. In weak form that is precisely the
//! adjoint momentum/continuity system: reversed advection, the transposed
//! primal velocity gradient, the Robin-type outflow term, plus the
//! divergence-weighted consistency term that vanishes with the incompressible
//! limit. The Design boundary prescribes the negative unit flow direction.
//! Exact transposition makes every sensitivity assembled from this state
//! agree with finite differences of the discrete objective.

use crate::error::{Error, Result};
use crate::fem::{norm2, Constraints, Dofs, LinearSystem};
use crate::flow::{
    assemble_linearized, velocity_constraints, FlowState, FluidProperties, Linearization,
    SolverConfig,
};
use crate::geom::Vec2;
use crate::mesh::Mesh;
use crate::sensitivity::nodal_design_gradients;

/// Adjoint velocity/pressure pair.
#[derive(Clone, Debug)]
pub struct AdjointState {
    pub velocity: Vec<Vec2>,
    pub pressure: Vec<f64>,
    pub residual_norm: f64,
}

/// Assembles the adjoint operator about the frozen velocity `v` (one entry
/// per velocity node) as the transpose of the Newton-linearized primal
/// operator, without boundary constraints.
pub fn assemble_adjoint(
    mesh: &Mesh,
    dofs: &Dofs,
    props: &FluidProperties,
    v: &[Vec2],
) -> LinearSystem {
    let newton = assemble_linearized(mesh, dofs, props, v, Linearization::Newton);
    let mut sys = LinearSystem::new(dofs.n_total());
    for t in newton.triplets() {
        sys.add(t.col, t.row, t.val);
    }
    sys
}

/// Adjoint Dirichlet data: `design_value` on the Design boundary, zero on the
/// inflow, zero normal component on slip walls.
pub fn adjoint_constraints(mesh: &Mesh, dofs: &Dofs, design_value: Vec2) -> Result<Constraints> {
    velocity_constraints(mesh, dofs, design_value, Vec2::ZERO)
}

/// Solves the adjoint system for the drag objective: Design data is the
/// negative unit flow direction.
pub fn solve_adjoint(
    mesh: &Mesh,
    primal: &FlowState,
    props: &FluidProperties,
    cfg: &SolverConfig,
) -> Result<AdjointState> {
    solve_adjoint_with_design_data(mesh, primal, props, cfg, -props.flow_direction())
}

/// Adjoint solve with caller-supplied Design Dirichlet data. Used by the
/// standard drag adjoint and by linearity diagnostics.
pub fn solve_adjoint_with_design_data(
    mesh: &Mesh,
    primal: &FlowState,
    props: &FluidProperties,
    cfg: &SolverConfig,
    design_value: Vec2,
) -> Result<AdjointState> {
    props.validate()?;
    cfg.validate()?;
    if !primal.residual_norm.is_finite() || primal.residual_norm > 100.0 * cfg.nonlinear_tol {
        return Err(Error::Solver(format!(
            "adjoint requires a converged primal state (residual {:.3e})",
            primal.residual_norm
        )));
    }
    let dofs = Dofs::new(mesh);
    if primal.velocity.len() != dofs.n_vel_nodes() {
        return Err(Error::Solver("primal state does not match mesh".into()));
    }
    let mut sys = assemble_adjoint(mesh, &dofs, props, &primal.velocity);
    let bc = adjoint_constraints(mesh, &dofs, design_value)?;
    sys.apply_constraints(&bc);
    let (x, _) = sys.solve(cfg.linear_tol, cfg.linear_refine)?;
    let velocity: Vec<Vec2> = (0..dofs.n_vel_nodes())
        .map(|n| Vec2::new(x[dofs.vel_dof(n, 0)], x[dofs.vel_dof(n, 1)]))
        .collect();
    let pressure: Vec<f64> = (0..dofs.n_vertices).map(|i| x[dofs.pressure_dof(i)]).collect();
    let r = norm2(sys.residual(&x).into_iter());
    if r > cfg.linear_tol * (1.0 + norm2(sys.rhs.iter().copied())) * 10.0 {
        return Err(Error::Solver(format!(
            "adjoint linear solve stalled at residual {r:.3e}"
        )));
    }
    Ok(AdjointState {
        velocity,
        pressure,
        residual_norm: r,
    })
}

/// Boundary traction multiplier on the Design nodes,
/// `lambda = phat n - mu (grad vhat + grad vhat^T) . n`, evaluated from the
/// finite-element adjoint gradient averaged to nodes. Diagnostic quantity.
pub fn boundary_traction_multiplier(
    mesh: &Mesh,
    dofs: &Dofs,
    adjoint: &AdjointState,
    props: &FluidProperties,
) -> Result<Vec<(usize, Vec2)>> {
    let db = mesh.design_boundary()?;
    let grads = nodal_design_gradients(mesh, dofs, &adjoint.velocity, &db);
    let mu = props.viscosity;
    let mut out = Vec::with_capacity(db.len());
    for i in 0..db.len() {
        let n = db.normals[i];
        let g = grads[i];
        let visc = Vec2::new(
            2.0 * g[0].x * n.x + (g[0].y + g[1].x) * n.y,
            (g[1].x + g[0].y) * n.x + 2.0 * g[1].y * n.y,
        );
        let p = adjoint.pressure[db.nodes[i]];
        out.push((db.nodes[i], n * p - visc * mu));
    }
    Ok(out)
}
