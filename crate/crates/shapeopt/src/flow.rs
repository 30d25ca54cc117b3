//! Steady incompressible Navier-Stokes primal solver and the force/objective
//! evaluation.
//!
//! Discretization: inf-sup stable Taylor-Hood elements (quadratic velocity,
//! linear pressure) with the stress-divergence form of the viscous term.
//! Boundary conditions: no-slip on the Design boundary, Dirichlet inflow,
//! slip walls imposed strongly in the wall-normal component, and a natural
//! traction condition at the outflow. The convective term is linearized by
//! Picard fixed-point iteration.

use crate::error::{Error, Result};
use crate::fem::{norm2, p2_grads, p2_values, Constraints, Dofs, LinearSystem, TriGeom, TRI_QUAD};
use crate::geom::Vec2;
use crate::mesh::{BoundaryTag, Mesh};
use crate::sensitivity::AugLagState;

/// Constant fluid data.
#[derive(Clone, Copy, Debug)]
pub struct FluidProperties {
    /// Density rho, kg/m^3.
    pub density: f64,
    /// Dynamic viscosity mu, Pa*s.
    pub viscosity: f64,
    /// Inflow velocity, m/s.
    pub inflow: Vec2,
}

impl FluidProperties {
    pub fn validate(&self) -> Result<()> {
        if !(self.density >= 0.0) || !self.density.is_finite() {
            return Err(Error::Config {
                key: "flow.density".into(),
                msg: "density must be non-negative".into(),
            });
        }
        if !(self.viscosity > 0.0) {
            return Err(Error::Config {
                key: "flow.viscosity".into(),
                msg: "viscosity must be positive".into(),
            });
        }
        if !(self.inflow.norm() > 0.0) {
            return Err(Error::Config {
                key: "flow.inflow".into(),
                msg: "inflow velocity must be nonzero".into(),
            });
        }
        Ok(())
    }

    /// Unit vector along the approach flow.
    pub fn flow_direction(&self) -> Vec2 {
        self.inflow.normalized()
    }
}

/// Tolerances of the nonlinear and linear solves.
#[derive(Clone, Copy, Debug)]
pub struct SolverConfig {
    /// Absolute tolerance on the 2-norm of the nonlinear algebraic residual.
    pub nonlinear_tol: f64,
    pub max_picard: usize,
    /// Linear residual target, relative to `1 + ||b||`.
    pub linear_tol: f64,
    /// Iterative refinement steps allowed per linear solve.
    pub linear_refine: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            nonlinear_tol: 1e-10,
            max_picard: 40,
            linear_tol: 1e-13,
            linear_refine: 4,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nonlinear_tol > 0.0) || !(self.linear_tol > 0.0) {
            return Err(Error::Config {
                key: "flow.tolerances".into(),
                msg: "solver tolerances must be positive".into(),
            });
        }
        Ok(())
    }
}

/// Converged primal state: velocity per Taylor-Hood node, pressure per vertex.
#[derive(Clone, Debug)]
pub struct FlowState {
    pub velocity: Vec<Vec2>,
    pub pressure: Vec<f64>,
    pub residual_norm: f64,
    pub picard_iterations: usize,
    /// Nonlinear residual before each solve, then the final residual.
    pub residual_history: Vec<f64>,
}

impl FlowState {
    /// Interpolates closed-form fields onto the velocity/pressure nodes.
    /// Intended for manufactured states in tests and diagnostics.
    pub fn from_fn(
        mesh: &Mesh,
        dofs: &Dofs,
        v: impl Fn(Vec2) -> Vec2,
        p: impl Fn(Vec2) -> f64,
    ) -> FlowState {
        let velocity = (0..dofs.n_vel_nodes())
            .map(|n| v(dofs.vel_node_pos(mesh, n)))
            .collect();
        let pressure = (0..dofs.n_vertices).map(|i| p(mesh.node(i))).collect();
        FlowState {
            velocity,
            pressure,
            residual_norm: 0.0,
            picard_iterations: 0,
            residual_history: Vec::new(),
        }
    }

    fn to_flat(&self, dofs: &Dofs) -> Result<Vec<f64>> {
        if self.velocity.len() != dofs.n_vel_nodes() || self.pressure.len() != dofs.n_vertices {
            return Err(Error::Solver(
                "state size does not match mesh degrees of freedom".into(),
            ));
        }
        let mut x = vec![0.0; dofs.n_total()];
        for (n, v) in self.velocity.iter().enumerate() {
            x[dofs.vel_dof(n, 0)] = v.x;
            x[dofs.vel_dof(n, 1)] = v.y;
        }
        for (i, p) in self.pressure.iter().enumerate() {
            x[dofs.pressure_dof(i)] = *p;
        }
        Ok(x)
    }

    fn from_flat(dofs: &Dofs, x: &[f64]) -> (Vec<Vec2>, Vec<f64>) {
        let velocity = (0..dofs.n_vel_nodes())
            .map(|n| Vec2::new(x[dofs.vel_dof(n, 0)], x[dofs.vel_dof(n, 1)]))
            .collect();
        let pressure = (0..dofs.n_vertices)
            .map(|i| x[dofs.pressure_dof(i)])
            .collect();
        (velocity, pressure)
    }
}

/// Which linearization of the convective term to assemble.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Linearization {
    /// Fixed advection field only (Picard).
    Picard,
    /// Picard plus the derivative with respect to the transported field.
    Newton,
}

/// Assembles the Navier-Stokes operator linearized about the advection field
/// `v_adv` (one entry per velocity node), without boundary constraints. The
/// outflow condition is natural: boundary terms are dropped there.
pub fn assemble_linearized(
    mesh: &Mesh,
    dofs: &Dofs,
    props: &FluidProperties,
    v_adv: &[Vec2],
    mode: Linearization,
) -> LinearSystem {
    let mut sys = LinearSystem::new(dofs.n_total());
    sys.reserve(mesh.cell_count() * 216);
    let mu = props.viscosity;
    let rho = props.density;
    for cell in 0..mesh.cell_count() {
        let geom = TriGeom::of_cell(mesh, cell);
        let tri = mesh.triangles()[cell];
        let nodes = dofs.tri_vel_nodes(mesh, cell);
        let v_local: [Vec2; 6] = std::array::from_fn(|k| v_adv[nodes[k]]);
        // Element blocks accumulated over the quadrature before insertion,
        // one triplet per coupled pair.
        let mut vel = [[[0.0f64; 2]; 2]; 36]; // (i, j) -> 2x2 component block
        let mut grad_p = [[0.0f64; 2]; 18]; // (i, jp) -> velocity component
        let mut cont = [[0.0f64; 2]; 18]; // (ip, j) -> velocity component
        for (l, wq) in TRI_QUAD {
            let weight = wq * geom.area;
            let nv = p2_values(l);
            let ng = p2_grads(l, geom.grad_l);
            let v_at = (0..6).fold(Vec2::ZERO, |acc, k| acc + v_local[k] * nv[k]);
            // Jacobian rows: grad_rows[alpha] = grad of component alpha.
            let grad_rows = [
                (0..6).fold(Vec2::ZERO, |acc, k| acc + ng[k] * v_local[k].x),
                (0..6).fold(Vec2::ZERO, |acc, k| acc + ng[k] * v_local[k].y),
            ];
            for i in 0..6 {
                for j in 0..6 {
                    let visc_iso = mu * ng[i].dot(ng[j]);
                    let conv = rho * v_at.dot(ng[j]) * nv[i];
                    let diag = weight * (visc_iso + conv);
                    let b = &mut vel[6 * i + j];
                    // delta_{alpha beta} part plus the transposed-gradient
                    // part mu * dNi/dbeta * dNj/dalpha
                    b[0][0] += diag + weight * mu * ng[i].x * ng[j].x;
                    b[0][1] += weight * mu * ng[i].y * ng[j].x;
                    b[1][0] += weight * mu * ng[i].x * ng[j].y;
                    b[1][1] += diag + weight * mu * ng[i].y * ng[j].y;
                    if mode == Linearization::Newton {
                        let m = weight * rho * nv[i] * nv[j];
                        b[0][0] += m * grad_rows[0].x;
                        b[0][1] += m * grad_rows[0].y;
                        b[1][0] += m * grad_rows[1].x;
                        b[1][1] += m * grad_rows[1].y;
                    }
                }
                // pressure gradient: -integral p (div w)
                for jp in 0..3 {
                    grad_p[3 * i + jp][0] -= weight * l[jp] * ng[i].x;
                    grad_p[3 * i + jp][1] -= weight * l[jp] * ng[i].y;
                }
            }
            // continuity: -integral q (div v)
            for ip in 0..3 {
                for j in 0..6 {
                    cont[6 * ip + j][0] -= weight * l[ip] * ng[j].x;
                    cont[6 * ip + j][1] -= weight * l[ip] * ng[j].y;
                }
            }
        }
        for i in 0..6 {
            let rows = [dofs.vel_dof(nodes[i], 0), dofs.vel_dof(nodes[i], 1)];
            for j in 0..6 {
                let cols = [dofs.vel_dof(nodes[j], 0), dofs.vel_dof(nodes[j], 1)];
                let b = &vel[6 * i + j];
                for a in 0..2 {
                    for bb in 0..2 {
                        sys.add(rows[a], cols[bb], b[a][bb]);
                    }
                }
            }
            for jp in 0..3 {
                let pcol = dofs.pressure_dof(tri[jp]);
                sys.add(rows[0], pcol, grad_p[3 * i + jp][0]);
                sys.add(rows[1], pcol, grad_p[3 * i + jp][1]);
            }
        }
        for ip in 0..3 {
            let prow = dofs.pressure_dof(tri[ip]);
            for j in 0..6 {
                sys.add(prow, dofs.vel_dof(nodes[j], 0), cont[6 * ip + j][0]);
                sys.add(prow, dofs.vel_dof(nodes[j], 1), cont[6 * ip + j][1]);
            }
        }
    }
    sys
}

/// Velocity Dirichlet data of the primal problem. Slip walls are constrained
/// in their (axis-aligned) normal component only; inflow and Design edges
/// prescribe the full velocity and take precedence at corners.
pub fn primal_constraints(mesh: &Mesh, dofs: &Dofs, props: &FluidProperties) -> Result<Constraints> {
    velocity_constraints(mesh, dofs, Vec2::ZERO, props.inflow)
}

/// Shared helper: full Dirichlet value on Design (`design_value`) and inflow
/// (`inflow_value`); zero normal component on slip walls.
pub(crate) fn velocity_constraints(
    mesh: &Mesh,
    dofs: &Dofs,
    design_value: Vec2,
    inflow_value: Vec2,
) -> Result<Constraints> {
    let mut bc = Constraints::none(dofs.n_total());
    let edge_nodes = |k: usize| -> [usize; 3] {
        let [a, b] = mesh.boundary_edges()[k].nodes;
        let mid = dofs.edge_node(a, b).expect("boundary edge is a cell edge");
        [a, b, mid]
    };
    for (k, be) in mesh.boundary_edges().iter().enumerate() {
        if be.tag != BoundaryTag::SlipWall {
            continue;
        }
        let [a, b] = be.nodes;
        let d = mesh.node(b) - mesh.node(a);
        let n = d.perp().normalized();
        let comp = if n.x.abs() > 1.0 - 1e-9 {
            0
        } else if n.y.abs() > 1.0 - 1e-9 {
            1
        } else {
            return Err(Error::Mesh(format!(
                "slip wall edge ({a}, {b}) is not axis-aligned"
            )));
        };
        for node in edge_nodes(k) {
            bc.set(dofs.vel_dof(node, comp), 0.0);
        }
    }
    for (k, be) in mesh.boundary_edges().iter().enumerate() {
        let value = match be.tag {
            BoundaryTag::Inflow => inflow_value,
            BoundaryTag::Design => design_value,
            _ => continue,
        };
        for node in edge_nodes(k) {
            bc.set(dofs.vel_dof(node, 0), value.x);
            bc.set(dofs.vel_dof(node, 1), value.y);
        }
    }
    Ok(bc)
}

pub(crate) fn velocity_of_flat(dofs: &Dofs, x: &[f64]) -> Vec<Vec2> {
    (0..dofs.n_vel_nodes())
        .map(|n| Vec2::new(x[dofs.vel_dof(n, 0)], x[dofs.vel_dof(n, 1)]))
        .collect()
}

/// Solves the steady Navier-Stokes system by Picard iteration with a sparse
/// direct linear solve. `warm_start` seeds the iteration.
pub fn solve_primal(
    mesh: &Mesh,
    props: &FluidProperties,
    cfg: &SolverConfig,
    warm_start: Option<&FlowState>,
) -> Result<FlowState> {
    props.validate()?;
    cfg.validate()?;
    let dofs = Dofs::new(mesh);
    let bc = primal_constraints(mesh, &dofs, props)?;
    let mut x = match warm_start {
        Some(ws) => ws.to_flat(&dofs)?,
        None => vec![0.0; dofs.n_total()],
    };
    bc.impose(&mut x);

    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    for it in 0..=cfg.max_picard {
        let v_now = velocity_of_flat(&dofs, &x);
        let mut sys = assemble_linearized(mesh, &dofs, props, &v_now, Linearization::Picard);
        sys.apply_constraints(&bc);
        let r = norm2(sys.residual(&x).into_iter());
        history.push(r);
        if r <= cfg.nonlinear_tol {
            converged = true;
            break;
        }
        if it == cfg.max_picard {
            break;
        }
        let (xn, _) = sys.solve(cfg.linear_tol, cfg.linear_refine)?;
        x = xn;
        iterations += 1;
    }
    if !converged {
        return Err(Error::Solver(format!(
            "Picard did not converge within {} iterations; last residual {:.3e}",
            cfg.max_picard,
            history.last().copied().unwrap_or(f64::NAN)
        )));
    }
    let (velocity, pressure) = FlowState::from_flat(&dofs, &x);
    Ok(FlowState {
        velocity,
        pressure,
        residual_norm: *history.last().unwrap(),
        picard_iterations: iterations,
        residual_history: history,
    })
}

/// Total force the fluid exerts through the Design boundary, as the boundary
/// integral of `(mu (grad v + grad v^T) - p I) . n` with `n` pointing out of
/// the fluid. Gradients come from the finite-element field in the cell
/// owning each edge.
pub fn force(mesh: &Mesh, dofs: &Dofs, state: &FlowState, props: &FluidProperties) -> Vec2 {
    let mut f = Vec2::ZERO;
    for (k, be) in mesh.boundary_edges().iter().enumerate() {
        if be.tag != BoundaryTag::Design {
            continue;
        }
        f += edge_traction_integral(mesh, dofs, state, props, k);
    }
    f
}

fn edge_traction_integral(
    mesh: &Mesh,
    dofs: &Dofs,
    state: &FlowState,
    props: &FluidProperties,
    edge_idx: usize,
) -> Vec2 {
    let be = mesh.boundary_edges()[edge_idx];
    let cell = mesh.boundary_edge_cell(edge_idx);
    let geom = TriGeom::of_cell(mesh, cell);
    let tri = mesh.triangles()[cell];
    let nodes = dofs.tri_vel_nodes(mesh, cell);
    let [a, b] = be.nodes;
    let la = tri.iter().position(|&v| v == a).expect("edge node in cell");
    let lb = tri.iter().position(|&v| v == b).expect("edge node in cell");
    let d = mesh.node(b) - mesh.node(a);
    let len = d.norm();
    let n = d.perp() / len;
    let mu = props.viscosity;
    let mut f = Vec2::ZERO;
    for (t, w) in crate::fem::EDGE_QUAD {
        let mut l = [0.0; 3];
        l[la] = 1.0 - t;
        l[lb] = t;
        let ng = p2_grads(l, geom.grad_l);
        let mut grad_rows = [Vec2::ZERO; 2];
        for k in 0..6 {
            let v = state.velocity[nodes[k]];
            grad_rows[0] += ng[k] * v.x;
            grad_rows[1] += ng[k] * v.y;
        }
        let p_at: f64 = (0..3).map(|i| l[i] * state.pressure[tri[i]]).sum();
        // (mu (G + G^T) - p I) . n
        let traction = Vec2::new(
            mu * (2.0 * grad_rows[0].x * n.x + (grad_rows[0].y + grad_rows[1].x) * n.y) - p_at * n.x,
            mu * ((grad_rows[1].x + grad_rows[0].y) * n.x + 2.0 * grad_rows[1].y * n.y) - p_at * n.y,
        );
        f += traction * (w * len);
    }
    f
}

/// The velocity nodes on the Design boundary (vertices and edge midpoints),
/// ascending.
pub fn design_velocity_nodes(mesh: &Mesh, dofs: &Dofs) -> Vec<usize> {
    let mut set = std::collections::BTreeSet::new();
    for be in mesh.boundary_edges() {
        if be.tag != BoundaryTag::Design {
            continue;
        }
        let [a, b] = be.nodes;
        set.insert(a);
        set.insert(b);
        set.insert(dofs.edge_node(a, b).expect("boundary edge is a cell edge"));
    }
    set.into_iter().collect()
}

/// Force through the Design boundary evaluated as the consistent nodal
/// reaction: the raw momentum residual summed over the Design velocity
/// nodes. Dual to the no-slip condition, hence the evaluation the adjoint
/// differentiates exactly; also superconvergent compared to the boundary
/// gradient integral.
pub fn reaction_force(mesh: &Mesh, dofs: &Dofs, state: &FlowState, props: &FluidProperties) -> Vec2 {
    let sys = assemble_linearized(mesh, dofs, props, &state.velocity, Linearization::Picard);
    let x = state
        .to_flat(dofs)
        .expect("state matches mesh degrees of freedom");
    let r = sys.residual(&x);
    let mut f = Vec2::ZERO;
    for n in design_velocity_nodes(mesh, dofs) {
        // residual() returns b - A x with b = 0; the reaction is +A x.
        f += Vec2::new(-r[dofs.vel_dof(n, 0)], -r[dofs.vel_dof(n, 1)]);
    }
    f
}

/// Objective decomposition, returned alongside the scalar for logging.
#[derive(Clone, Copy, Debug)]
pub struct ObjectiveParts {
    pub drag_term: f64,
    pub barycenter_penalty: f64,
    pub volume_penalty: f64,
    /// Reaction force entering the drag term.
    pub force: Vec2,
    /// Barycenter residual.
    pub b: Vec2,
    /// Volume residual.
    pub c: f64,
}

/// Penalized objective: projected drag plus quadratic constraint penalties.
/// The drag term uses the consistent reaction force.
pub fn objective(
    mesh: &Mesh,
    dofs: &Dofs,
    state: &FlowState,
    props: &FluidProperties,
    al: &AugLagState,
) -> (f64, ObjectiveParts) {
    let f = reaction_force(mesh, dofs, state, props);
    let drag_term = -props.flow_direction().dot(f);
    let b = mesh.barycenter() - al.target_barycenter;
    let c = mesh.volume() - al.target_volume;
    let barycenter_penalty = 0.5 * al.rho_b * b.norm_sq();
    let volume_penalty = 0.5 * al.rho_c * c * c;
    (
        drag_term + barycenter_penalty + volume_penalty,
        ObjectiveParts {
            drag_term,
            barycenter_penalty,
            volume_penalty,
            force: f,
            b,
            c,
        },
    )
}

/// Weak divergence of the velocity against every pressure test function,
/// `integral q div(v)`; a converged state drives this to solver tolerance.
pub fn divergence_moments(mesh: &Mesh, dofs: &Dofs, state: &FlowState) -> Vec<f64> {
    let mut out = vec![0.0; dofs.n_vertices];
    for cell in 0..mesh.cell_count() {
        let geom = TriGeom::of_cell(mesh, cell);
        let tri = mesh.triangles()[cell];
        let nodes = dofs.tri_vel_nodes(mesh, cell);
        for (l, wq) in TRI_QUAD {
            let weight = wq * geom.area;
            let ng = p2_grads(l, geom.grad_l);
            let div: f64 = (0..6)
                .map(|k| {
                    let v = state.velocity[nodes[k]];
                    ng[k].x * v.x + ng[k].y * v.y
                })
                .sum();
            for ip in 0..3 {
                out[tri[ip]] += weight * l[ip] * div;
            }
        }
    }
    out
}
