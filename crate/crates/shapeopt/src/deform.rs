//! Descent directions by p-Laplacian relaxation.
//!
//! The deformation field minimizes
//! `E_p(u) = (1/p) integral (eps + grad u : grad u)^(p/2) dx + J'(u)`
//! over piecewise-linear vector fields vanishing on every non-Design boundary
//! node, where `J'(u)` is the boundary quadrature of `gamma (u . n)`. The
//! minimization form fixes the sign so converged fields are descent
//! directions. Solved by damped Newton with p-continuation; p = 2 is the
//! linear Laplace baseline.

use crate::error::{Error, Result};
use crate::fem::{norm2, Constraints, LinearSystem, TriGeom};
use crate::geom::Vec2;
use crate::mesh::{DesignBoundary, Mesh};
use crate::sensitivity::SensitivityField;

/// Target exponent, regularization and solver knobs for the p-Laplace solve.
#[derive(Clone, Debug)]
pub struct PLaplaceConfig {
    pub p: f64,
    /// Added under the gradient-norm power to keep the Jacobian regular at
    /// vanishing gradients.
    pub eps_reg: f64,
    /// Gradient-norm tolerance at the target exponent.
    pub tol: f64,
    pub max_newton: usize,
    /// Increasing exponent schedule ending at `p`, used on cold starts.
    pub continuation: Vec<f64>,
    /// Looser tolerance for the intermediate continuation stages.
    pub continuation_tol: f64,
}

impl PLaplaceConfig {
    /// Integer-step continuation `2, 3, ..., p` with the reference tolerances.
    pub fn with_exponent(p: f64) -> PLaplaceConfig {
        PLaplaceConfig {
            p,
            eps_reg: 1e-10,
            tol: 1e-10,
            max_newton: 60,
            continuation: default_schedule(p),
            continuation_tol: 1e-4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config {
            key: "plaplace".into(),
            msg,
        });
        if !(self.p >= 2.0) {
            return bad("p must be >= 2".into());
        }
        if !(self.eps_reg >= 0.0) {
            return bad("eps_reg must be non-negative".into());
        }
        if !(self.tol > 0.0 && self.continuation_tol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.continuation.is_empty() {
            return bad("continuation schedule is empty".into());
        }
        for w in self.continuation.windows(2) {
            if !(w[1] > w[0]) {
                return bad(format!(
                    "continuation schedule must be strictly increasing, got {:?}",
                    self.continuation
                ));
            }
        }
        let last = *self.continuation.last().unwrap();
        if (last - self.p).abs() > 1e-12 {
            return bad(format!(
                "continuation schedule must end at p = {}, ends at {last}",
                self.p
            ));
        }
        if self.continuation[0] < 2.0 {
            return bad("continuation schedule must start at p >= 2".into());
        }
        Ok(())
    }
}

/// `2, 3, ..., p`, appending a fractional final stage when needed.
pub fn default_schedule(p: f64) -> Vec<f64> {
    let mut s = Vec::new();
    let mut q = 2.0;
    while q < p - 1e-12 {
        s.push(q);
        q += 1.0;
    }
    s.push(p);
    s
}

/// Piecewise-linear deformation field on the mesh nodes.
#[derive(Clone, Debug)]
pub struct DeformationField {
    pub u: Vec<Vec2>,
    /// False when Newton hit the iteration cap; the field then holds the best
    /// iterate.
    pub converged: bool,
    pub newton_iterations: usize,
    /// Final energy at the target exponent.
    pub energy: f64,
}

impl DeformationField {
    pub fn zero(mesh: &Mesh) -> DeformationField {
        DeformationField {
            u: vec![Vec2::ZERO; mesh.node_count()],
            converged: true,
            newton_iterations: 0,
            energy: 0.0,
        }
    }

    pub fn max_norm(&self) -> f64 {
        self.u.iter().fold(0.0, |m, v| m.max(v.x.abs().max(v.y.abs())))
    }
}

/// Per-edge sensitivity data: one value per Design edge, indexed like
/// `mesh.boundary_edges()`. This is the natural data model when the
/// sensitivity jumps at a boundary corner (e.g. diagnostics on open design
/// chains); the flow pipeline produces nodal data on closed loops.
#[derive(Clone, Debug)]
pub struct EdgeSensitivity {
    /// `(boundary edge index, gamma)` pairs covering every Design edge.
    pub values: Vec<(usize, f64)>,
}

/// Boundary load of the variational problem: per-edge trapezoidal quadrature
/// of `gamma (u . n)` with the exact edge normal, accumulated per Design
/// node. Edge normals (rather than averaged node normals) keep the load
/// consistent where adjacent Design edges meet at a corner.
fn boundary_load(mesh: &Mesh, db: &DesignBoundary, gamma: &SensitivityField) -> Result<Vec<Vec2>> {
    if db.nodes != gamma.nodes {
        return Err(Error::Mesh(
            "sensitivity field does not match the mesh design boundary".into(),
        ));
    }
    let mut load = vec![Vec2::ZERO; db.len()];
    for &k in &db.edges {
        let [a, b] = mesh.boundary_edges()[k].nodes;
        let d = mesh.node(b) - mesh.node(a);
        let len = d.norm();
        let n = d.perp() / len;
        for node in [a, b] {
            let i = db.index_of(node).expect("design node");
            load[i] += n * (0.5 * len * gamma.gamma[i]);
        }
    }
    Ok(load)
}

/// Load for per-edge sensitivity data: each Design edge spreads
/// `gamma_e * L_e / 2` along its normal onto both endpoints.
fn boundary_load_edges(
    mesh: &Mesh,
    db: &DesignBoundary,
    gamma: &EdgeSensitivity,
) -> Result<Vec<Vec2>> {
    let mut covered = vec![false; mesh.boundary_edges().len()];
    let mut load = vec![Vec2::ZERO; db.len()];
    for &(k, g) in &gamma.values {
        let be = mesh
            .boundary_edges()
            .get(k)
            .ok_or_else(|| Error::Mesh(format!("edge index {k} out of range")))?;
        if be.tag != crate::mesh::BoundaryTag::Design {
            return Err(Error::Mesh(format!("edge {k} is not a Design edge")));
        }
        if std::mem::replace(&mut covered[k], true) {
            return Err(Error::Mesh(format!("edge {k} listed twice")));
        }
        let [a, b] = be.nodes;
        let d = mesh.node(b) - mesh.node(a);
        let len = d.norm();
        let n = d.perp() / len;
        for node in [a, b] {
            let i = db.index_of(node).expect("design node");
            load[i] += n * (0.5 * len * g);
        }
    }
    for &k in &db.edges {
        if !covered[k] {
            return Err(Error::Mesh(format!("design edge {k} has no sensitivity value")));
        }
    }
    Ok(load)
}

/// Discrete energy of a deformation field for exponent `p` and regularization
/// `eps_reg`; the quantity the nonlinear solver decreases monotonically.
pub fn plaplace_energy(
    mesh: &Mesh,
    u: &[Vec2],
    gamma: &SensitivityField,
    p: f64,
    eps_reg: f64,
) -> Result<f64> {
    if u.len() != mesh.node_count() {
        return Err(Error::Mesh("deformation field size mismatch".into()));
    }
    let db = mesh.design_boundary()?;
    let load = boundary_load(mesh, &db, gamma)?;
    let mut e = volume_energy(mesh, u, p, eps_reg);
    for (i, &n) in db.nodes.iter().enumerate() {
        e += load[i].dot(u[n]);
    }
    Ok(e)
}

fn volume_energy(mesh: &Mesh, u: &[Vec2], p: f64, eps: f64) -> f64 {
    let mut e = 0.0;
    for cell in 0..mesh.cell_count() {
        let geom = TriGeom::of_cell(mesh, cell);
        let tri = mesh.triangles()[cell];
        let mut g0 = Vec2::ZERO;
        let mut g1 = Vec2::ZERO;
        for k in 0..3 {
            g0 += geom.grad_l[k] * u[tri[k]].x;
            g1 += geom.grad_l[k] * u[tri[k]].y;
        }
        let s = eps + g0.norm_sq() + g1.norm_sq();
        e += geom.area / p * s.powf(0.5 * p);
    }
    e
}

/// Gradient of the energy with respect to the nodal values; constrained
/// entries are zeroed.
fn energy_gradient(
    mesh: &Mesh,
    u: &[Vec2],
    load: &[Vec2],
    db: &DesignBoundary,
    p: f64,
    eps: f64,
) -> Vec<Vec2> {
    let mut g = vec![Vec2::ZERO; mesh.node_count()];
    for cell in 0..mesh.cell_count() {
        let geom = TriGeom::of_cell(mesh, cell);
        let tri = mesh.triangles()[cell];
        let mut g0 = Vec2::ZERO;
        let mut g1 = Vec2::ZERO;
        for k in 0..3 {
            g0 += geom.grad_l[k] * u[tri[k]].x;
            g1 += geom.grad_l[k] * u[tri[k]].y;
        }
        let s = eps + g0.norm_sq() + g1.norm_sq();
        let k1 = if s == 0.0 {
            if p == 2.0 { 1.0 } else { 0.0 }
        } else {
            s.powf(0.5 * p - 1.0)
        };
        for k in 0..3 {
            let gl = geom.grad_l[k];
            g[tri[k]] += Vec2::new(g0.dot(gl), g1.dot(gl)) * (geom.area * k1);
        }
    }
    for (i, &n) in db.nodes.iter().enumerate() {
        g[n] += load[i];
    }
    for i in 0..mesh.node_count() {
        if !mesh.is_movable_node(i) {
            g[i] = Vec2::ZERO;
        }
    }
    g
}

fn hessian(mesh: &Mesh, u: &[Vec2], p: f64, eps: f64) -> LinearSystem {
    let n = mesh.node_count();
    let mut sys = LinearSystem::new(2 * n);
    for cell in 0..mesh.cell_count() {
        let geom = TriGeom::of_cell(mesh, cell);
        let tri = mesh.triangles()[cell];
        let mut g0 = Vec2::ZERO;
        let mut g1 = Vec2::ZERO;
        for k in 0..3 {
            g0 += geom.grad_l[k] * u[tri[k]].x;
            g1 += geom.grad_l[k] * u[tri[k]].y;
        }
        let s = eps + g0.norm_sq() + g1.norm_sq();
        let (k1, k2) = if s == 0.0 {
            (if p == 2.0 { 1.0 } else { 0.0 }, 0.0)
        } else {
            (s.powf(0.5 * p - 1.0), (p - 2.0) * s.powf(0.5 * p - 2.0))
        };
        for a in 0..3 {
            let ga = geom.grad_l[a];
            let gua = Vec2::new(g0.dot(ga), g1.dot(ga));
            for bb in 0..3 {
                let gb = geom.grad_l[bb];
                let gub = Vec2::new(g0.dot(gb), g1.dot(gb));
                let iso = geom.area * k1 * ga.dot(gb);
                let (ra, rb) = (2 * tri[a], 2 * tri[bb]);
                sys.add(ra, rb, iso + geom.area * k2 * gua.x * gub.x);
                sys.add(ra, rb + 1, geom.area * k2 * gua.x * gub.y);
                sys.add(ra + 1, rb, geom.area * k2 * gua.y * gub.x);
                sys.add(ra + 1, rb + 1, iso + geom.area * k2 * gua.y * gub.y);
            }
        }
    }
    sys
}

fn pinned_constraints(mesh: &Mesh) -> Constraints {
    let mut bc = Constraints::none(2 * mesh.node_count());
    for i in 0..mesh.node_count() {
        if !mesh.is_movable_node(i) {
            bc.set(2 * i, 0.0);
            bc.set(2 * i + 1, 0.0);
        }
    }
    bc
}

/// Linear Laplace baseline: one solve of the vector Laplacian with the
/// sensitivity load on the Design boundary and homogeneous Dirichlet data on
/// the fixed boundary.
pub fn solve_laplace(mesh: &Mesh, gamma: &SensitivityField) -> Result<DeformationField> {
    let db = mesh.design_boundary()?;
    let load = boundary_load(mesh, &db, gamma)?;
    laplace_with_load(mesh, &db, &load)
}

fn laplace_with_load(mesh: &Mesh, db: &DesignBoundary, load: &[Vec2]) -> Result<DeformationField> {
    if load.iter().all(|l| l.x == 0.0 && l.y == 0.0) {
        return Ok(DeformationField::zero(mesh));
    }
    let zero = vec![Vec2::ZERO; mesh.node_count()];
    let mut sys = hessian(mesh, &zero, 2.0, 0.0);
    for (i, &n) in db.nodes.iter().enumerate() {
        sys.add_rhs(2 * n, -load[i].x);
        sys.add_rhs(2 * n + 1, -load[i].y);
    }
    let bc = pinned_constraints(mesh);
    sys.apply_constraints(&bc);
    let (x, _) = sys.solve(1e-14, 4)?;
    let u: Vec<Vec2> = (0..mesh.node_count())
        .map(|i| Vec2::new(x[2 * i], x[2 * i + 1]))
        .collect();
    let mut energy = volume_energy(mesh, &u, 2.0, 0.0);
    for (i, &n) in db.nodes.iter().enumerate() {
        energy += load[i].dot(u[n]);
    }
    Ok(DeformationField {
        u,
        converged: true,
        newton_iterations: 1,
        energy,
    })
}

/// Minimizes the p-Laplace energy by damped Newton. Cold starts walk the
/// continuation schedule, each stage warm-starting the next; a caller-provided
/// warm start (typically the previous design step's field) solves the target
/// exponent directly.
pub fn solve_plaplace(
    mesh: &Mesh,
    gamma: &SensitivityField,
    cfg: &PLaplaceConfig,
    warm_start: Option<&DeformationField>,
) -> Result<DeformationField> {
    let db = mesh.design_boundary()?;
    let load = boundary_load(mesh, &db, gamma)?;
    plaplace_with_load(mesh, &db, &load, cfg, warm_start)
}

/// p-Laplace solve for per-edge sensitivity data.
pub fn solve_plaplace_with_edge_data(
    mesh: &Mesh,
    gamma: &EdgeSensitivity,
    cfg: &PLaplaceConfig,
    warm_start: Option<&DeformationField>,
) -> Result<DeformationField> {
    let db = mesh.design_boundary()?;
    let load = boundary_load_edges(mesh, &db, gamma)?;
    plaplace_with_load(mesh, &db, &load, cfg, warm_start)
}

fn plaplace_with_load(
    mesh: &Mesh,
    db: &DesignBoundary,
    load: &[Vec2],
    cfg: &PLaplaceConfig,
    warm_start: Option<&DeformationField>,
) -> Result<DeformationField> {
    cfg.validate()?;
    if load.iter().all(|l| l.x == 0.0 && l.y == 0.0) {
        return Ok(DeformationField::zero(mesh));
    }
    let mut u = vec![Vec2::ZERO; mesh.node_count()];
    let stages: Vec<f64> = match warm_start {
        Some(ws) => {
            if ws.u.len() != mesh.node_count() {
                return Err(Error::Mesh("warm start size mismatch".into()));
            }
            u = ws.u.clone();
            vec![cfg.p]
        }
        None => cfg.continuation.clone(),
    };
    for i in 0..mesh.node_count() {
        if !mesh.is_movable_node(i) {
            u[i] = Vec2::ZERO;
        }
    }

    let mut total_newton = 0;
    let mut converged = true;
    let n_stages = stages.len();
    for (si, &p) in stages.iter().enumerate() {
        let last = si + 1 == n_stages;
        let tol = if last { cfg.tol } else { cfg.continuation_tol };
        let (iters, ok) = newton_stage(mesh, db, load, &mut u, p, cfg.eps_reg, tol, cfg.max_newton)?;
        total_newton += iters;
        if last {
            converged = ok;
        }
    }
    let mut energy = volume_energy(mesh, &u, cfg.p, cfg.eps_reg);
    for (i, &n) in db.nodes.iter().enumerate() {
        energy += load[i].dot(u[n]);
    }
    Ok(DeformationField {
        u,
        converged,
        newton_iterations: total_newton,
        energy,
    })
}

fn newton_stage(
    mesh: &Mesh,
    db: &DesignBoundary,
    load: &[Vec2],
    u: &mut Vec<Vec2>,
    p: f64,
    eps: f64,
    tol: f64,
    max_newton: usize,
) -> Result<(usize, bool)> {
    let bc = pinned_constraints(mesh);
    let total_energy = |u: &[Vec2]| -> f64 {
        let mut e = volume_energy(mesh, u, p, eps);
        for (i, &n) in db.nodes.iter().enumerate() {
            e += load[i].dot(u[n]);
        }
        e
    };
    let mut energy = total_energy(u);
    for it in 0..max_newton {
        let g = energy_gradient(mesh, u, load, db, p, eps);
        let gnorm = norm2(g.iter().flat_map(|v| [v.x, v.y]));
        if gnorm <= tol {
            return Ok((it, true));
        }
        let mut sys = hessian(mesh, u, p, eps);
        for (i, v) in g.iter().enumerate() {
            sys.rhs[2 * i] = -v.x;
            sys.rhs[2 * i + 1] = -v.y;
        }
        sys.apply_constraints(&bc);
        let (dx, _) = sys.solve(1e-14, 3)?;
        let step: Vec<Vec2> = (0..mesh.node_count())
            .map(|i| Vec2::new(dx[2 * i], dx[2 * i + 1]))
            .collect();
        // Backtracking on the energy; accepted steps never increase it.
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<Vec2> = (0..u.len()).map(|i| u[i] + step[i] * alpha).collect();
            let e_trial = total_energy(&trial);
            if e_trial <= energy + 1e-14 * (1.0 + energy.abs()) {
                *u = trial;
                energy = e_trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // No descent left at the smallest step: treat as stalled.
            let ok = gnorm <= tol;
            return Ok((it + 1, ok));
        }
    }
    let g = energy_gradient(mesh, u, load, db, p, eps);
    let gnorm = norm2(g.iter().flat_map(|v| [v.x, v.y]));
    Ok((max_newton, gnorm <= tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{rectangle, BoundaryTag};
    use crate::sensitivity::shape_derivative;

    /// Strip on [0, L] x [0, H]: Dirichlet at x = 0, free (Design, gamma = 0)
    /// laterals, constant gamma on the Design edge x = L.
    fn strip(nx: usize, ny: usize) -> (Mesh, SensitivityField) {
        let mesh = rectangle(
            0.0,
            2.0,
            0.0,
            1.0,
            nx,
            ny,
            [
                BoundaryTag::Inflow,
                BoundaryTag::Design,
                BoundaryTag::Design,
                BoundaryTag::Design,
            ],
        )
        .unwrap();
        let db = mesh.design_boundary().unwrap();
        let gamma: Vec<f64> = db
            .nodes
            .iter()
            .map(|&n| if (mesh.node(n).x - 2.0).abs() < 1e-12 { 0.7 } else { 0.0 })
            .collect();
        (
            mesh.clone(),
            SensitivityField {
                nodes: db.nodes,
                gamma,
            },
        )
    }

    /// Root of (eps + c^2)^((p-2)/2) c = -g, the slope of the exact strip
    /// profile.
    fn strip_slope(g: f64, p: f64, eps: f64) -> f64 {
        let mut c = -g.signum() * g.abs().powf(1.0 / (p - 1.0));
        for _ in 0..200 {
            let s = eps + c * c;
            let f = s.powf(0.5 * p - 1.0) * c + g;
            let df = s.powf(0.5 * p - 1.0) + (p - 2.0) * s.powf(0.5 * p - 2.0) * c * c;
            let step = f / df;
            c -= step;
            if step.abs() < 1e-15 * (1.0 + c.abs()) {
                break;
            }
        }
        c
    }

    #[test]
    fn zero_gamma_returns_zero_field() {
        let (mesh, mut gamma) = strip(8, 4);
        gamma.gamma.iter_mut().for_each(|g| *g = 0.0);
        let cfg = PLaplaceConfig::with_exponent(4.0);
        let f = solve_plaplace(&mesh, &gamma, &cfg, None).unwrap();
        assert!(f.converged);
        assert_eq!(f.max_norm(), 0.0);
    }

    #[test]
    fn laplace_strip_matches_linear_profile() {
        let (mesh, gamma) = strip(10, 5);
        let f = solve_laplace(&mesh, &gamma).unwrap();
        // The normal component follows the exact linear profile; the
        // tangential component picks up a small corner response where the
        // sensitivity jumps to zero.
        let c = -0.7;
        for (i, p) in mesh.nodes().iter().enumerate() {
            assert!(
                (f.u[i].x - c * p.x).abs() < 1e-8,
                "node {i} at {p:?}: {:?} vs {}",
                f.u[i],
                c * p.x
            );
        }
    }

    /// Per-edge data variant of the strip: the jump from the loaded edge to
    /// the free laterals sits between edges, so the linear profile is an
    /// exact discrete solution.
    fn strip_edge_data(mesh: &Mesh) -> EdgeSensitivity {
        let values = mesh
            .boundary_edges()
            .iter()
            .enumerate()
            .filter(|(_, be)| be.tag == BoundaryTag::Design)
            .map(|(k, be)| {
                let on_right = be
                    .nodes
                    .iter()
                    .all(|&n| (mesh.node(n).x - 2.0).abs() < 1e-12);
                (k, if on_right { 0.7 } else { 0.0 })
            })
            .collect();
        EdgeSensitivity { values }
    }

    #[test]
    fn plaplace_strip_matches_analytic_profile_for_several_p() {
        for &p in &[2.0, 3.0, 4.0, 6.0] {
            let (mesh, _) = strip(10, 5);
            let gamma = strip_edge_data(&mesh);
            let mut cfg = PLaplaceConfig::with_exponent(p);
            cfg.eps_reg = 1e-12;
            let f = solve_plaplace_with_edge_data(&mesh, &gamma, &cfg, None).unwrap();
            assert!(f.converged, "p = {p}");
            let c = strip_slope(0.7, p, cfg.eps_reg);
            let mut worst = 0.0f64;
            for (i, pt) in mesh.nodes().iter().enumerate() {
                worst = worst.max((f.u[i] - Vec2::new(c * pt.x, 0.0)).norm());
            }
            assert!(worst < 1e-6, "p = {p}: max deviation {worst}");
        }
    }

    #[test]
    fn p2_equivalence_with_laplace() {
        let (mesh, gamma) = strip(10, 6);
        let mut cfg = PLaplaceConfig::with_exponent(2.0);
        cfg.eps_reg = 0.0;
        let a = solve_plaplace(&mesh, &gamma, &cfg, None).unwrap();
        let b = solve_laplace(&mesh, &gamma).unwrap();
        let mut worst = 0.0f64;
        for i in 0..mesh.node_count() {
            worst = worst.max((a.u[i] - b.u[i]).norm());
        }
        assert!(worst <= 1e-8, "max difference {worst}");
    }

    #[test]
    fn laplace_superposition() {
        let (mesh, g1) = strip(6, 3);
        let db = mesh.design_boundary().unwrap();
        let g2 = SensitivityField {
            nodes: db.nodes.clone(),
            gamma: db
                .nodes
                .iter()
                .map(|&n| 0.3 * mesh.node(n).y - 0.1)
                .collect(),
        };
        let sum = SensitivityField {
            nodes: db.nodes.clone(),
            gamma: g1.gamma.iter().zip(&g2.gamma).map(|(a, b)| a + b).collect(),
        };
        let fa = solve_laplace(&mesh, &g1).unwrap();
        let fb = solve_laplace(&mesh, &g2).unwrap();
        let fs = solve_laplace(&mesh, &sum).unwrap();
        for i in 0..mesh.node_count() {
            let lin = fa.u[i] + fb.u[i];
            assert!((fs.u[i] - lin).norm() < 1e-10, "node {i}");
        }
    }

    #[test]
    fn boundary_values_exactly_zero_on_fixed_nodes() {
        let (mesh, gamma) = strip(9, 4);
        let cfg = PLaplaceConfig::with_exponent(3.0);
        let f = solve_plaplace(&mesh, &gamma, &cfg, None).unwrap();
        for i in 0..mesh.node_count() {
            if !mesh.is_movable_node(i) {
                assert_eq!(f.u[i].x, 0.0);
                assert_eq!(f.u[i].y, 0.0);
            }
        }
    }

    #[test]
    fn descent_certificate_on_strip() {
        for &p in &[2.0, 4.0] {
            let (mesh, gamma) = strip(8, 4);
            let cfg = PLaplaceConfig::with_exponent(p);
            let f = solve_plaplace(&mesh, &gamma, &cfg, None).unwrap();
            let jp = shape_derivative(&mesh, &gamma, &f.u).unwrap();
            assert!(jp < 0.0, "p = {p}: J' = {jp}");
        }
    }

    #[test]
    fn energy_of_constant_gradient_field() {
        let (mesh, gamma) = strip(8, 4);
        let zero_gamma = SensitivityField {
            nodes: gamma.nodes.clone(),
            gamma: vec![0.0; gamma.gamma.len()],
        };
        // u = (0.5 x, -0.25 y): G fixed, |G|^2 = 0.3125, area = 2.
        let u: Vec<Vec2> = mesh
            .nodes()
            .iter()
            .map(|p| Vec2::new(0.5 * p.x, -0.25 * p.y))
            .collect();
        for &p in &[2.0, 3.5] {
            let e = plaplace_energy(&mesh, &u, &zero_gamma, p, 0.0).unwrap();
            let expect = 2.0 / p * 0.3125f64.powf(0.5 * p);
            assert!((e - expect).abs() < 1e-12, "p = {p}: {e} vs {expect}");
        }
        // u = 0 with eps = 0 gives zero energy.
        let z = vec![Vec2::ZERO; mesh.node_count()];
        assert_eq!(plaplace_energy(&mesh, &z, &zero_gamma, 3.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn warm_started_solve_up_a_p_level_is_cheaper() {
        let (mesh, gamma) = strip(12, 6);
        let cfg3 = PLaplaceConfig::with_exponent(3.0);
        let f3 = solve_plaplace(&mesh, &gamma, &cfg3, None).unwrap();
        let cfg4 = PLaplaceConfig {
            continuation: vec![4.0],
            ..PLaplaceConfig::with_exponent(4.0)
        };
        let warm = solve_plaplace(&mesh, &gamma, &cfg4, Some(&f3)).unwrap();
        let cold = solve_plaplace(&mesh, &gamma, &cfg4, None).unwrap();
        assert!(warm.converged && cold.converged);
        assert!(
            warm.newton_iterations <= cold.newton_iterations,
            "warm {} vs cold {}",
            warm.newton_iterations,
            cold.newton_iterations
        );
    }
}
