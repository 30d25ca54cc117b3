//! The augmented Lagrange driver and the inner shape-optimization loop.
//!
//! The inner loop iterates primal solve, adjoint solve, sensitivity assembly,
//! p-Laplace descent direction and mesh morph until the objective stalls
//! relative to the first objective of the run. The outer loop re-runs it with
//! a shrinking tolerance sequence, inflating penalties for violated
//! constraints and updating multipliers for satisfied ones.

use crate::adjoint::solve_adjoint;
use crate::deform::{solve_plaplace, DeformationField, PLaplaceConfig};
use crate::error::{Error, Result};
use crate::fem::Dofs;
use crate::flow::{objective, solve_primal, FluidProperties, SolverConfig};
use crate::geom::Vec2;
use crate::mesh::{write_vtk, FieldData, Mesh};
use crate::sensitivity::{shape_derivative, shape_sensitivity, AugLagState};
use crate::util::{fmt_e9, write_atomic};
use std::io::Write as _;
use std::path::PathBuf;
use std::time::Instant;

/// Solver knobs shared by one optimization run.
#[derive(Clone, Debug)]
pub struct SolverConfigs {
    pub props: FluidProperties,
    pub flow: SolverConfig,
    pub plaplace: PLaplaceConfig,
}

/// Outer-loop driver configuration.
#[derive(Clone, Debug)]
pub struct OptimizerConfig {
    /// Initial multipliers, penalties, targets, tolerances and step size.
    pub auglag: AugLagState,
    /// Decreasing inner-loop tolerance sequence; the last entry repeats.
    pub eps_seq: Vec<f64>,
    /// Cap on design steps per inner loop.
    pub max_inner_steps: usize,
    /// Cap on augmented-Lagrange outer rounds.
    pub max_outer_steps: usize,
    /// Cap on design steps across the whole run.
    pub max_total_steps: usize,
    /// Morph retries with halved step size before giving up.
    pub max_step_retries: usize,
}

impl OptimizerConfig {
    pub fn new(auglag: AugLagState) -> OptimizerConfig {
        OptimizerConfig {
            auglag,
            eps_seq: (1..=7).map(|k| 10.0f64.powi(-k)).collect(),
            max_inner_steps: 600,
            max_outer_steps: 20,
            max_total_steps: 600,
            max_step_retries: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.auglag.validate()?;
        if self.eps_seq.is_empty() {
            return Err(Error::Config {
                key: "optimizer.eps_seq".into(),
                msg: "tolerance sequence is empty".into(),
            });
        }
        for w in self.eps_seq.windows(2) {
            if !(w[1] < w[0]) {
                return Err(Error::Config {
                    key: "optimizer.eps_seq".into(),
                    msg: "tolerance sequence must be strictly decreasing".into(),
                });
            }
        }
        if self.eps_seq.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::Config {
                key: "optimizer.eps_seq".into(),
                msg: "tolerances must be positive".into(),
            });
        }
        if self.max_inner_steps == 0 || self.max_outer_steps == 0 || self.max_total_steps == 0 {
            return Err(Error::Config {
                key: "optimizer.caps".into(),
                msg: "step caps must be positive".into(),
            });
        }
        Ok(())
    }
}

/// One design-step record.
#[derive(Clone, Debug)]
pub struct HistoryRow {
    pub step: usize,
    pub j: f64,
    pub j_over_j0: f64,
    pub drag: f64,
    pub b_norm: f64,
    pub c_abs: f64,
    pub gamma_inf: f64,
    pub energy: f64,
    pub max_aspect_ratio: f64,
    pub min_angle: f64,
    pub tip_angle: f64,
    pub half_axis_ratio: f64,
    /// Directional derivative along the accepted deformation; zero on the
    /// terminal row. Diagnostic, not part of the CSV schema.
    pub j_prime: f64,
    /// Seconds spent on this step. Kept out of the CSV so identical runs
    /// produce identical files.
    pub wall_time: f64,
}

/// Multiplier/penalty bookkeeping after each outer round.
#[derive(Clone, Debug)]
pub struct OuterEvent {
    pub outer_step: usize,
    pub at_design_step: usize,
    pub b_norm: f64,
    pub c_abs: f64,
    pub inflated_b: bool,
    pub inflated_c: bool,
    pub lambda_b: Vec2,
    pub lambda_c: f64,
    pub rho_b: f64,
    pub rho_c: f64,
}

/// Append-only run history with contiguous step indices.
#[derive(Clone, Debug, Default)]
pub struct History {
    pub rows: Vec<HistoryRow>,
    pub outer_events: Vec<OuterEvent>,
    /// Set when an inner loop was cut short by a mesh-quality failure.
    pub mesh_quality_failure: bool,
}

impl History {
    pub fn last_j(&self) -> Option<f64> {
        self.rows.last().map(|r| r.j)
    }

    /// Row at a given design-step index.
    pub fn row_at_step(&self, step: usize) -> Option<&HistoryRow> {
        self.rows.iter().find(|r| r.step == step)
    }

    /// Serializes the deterministic columns as CSV.
    pub fn csv(&self) -> String {
        let mut s = String::from(
            "step,j,j_over_j0,drag,b_norm,c_abs,gamma_inf,energy,max_aspect_ratio,min_angle,tip_angle,half_axis_ratio\n",
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.step,
                fmt_e9(r.j),
                fmt_e9(r.j_over_j0),
                fmt_e9(r.drag),
                fmt_e9(r.b_norm),
                fmt_e9(r.c_abs),
                fmt_e9(r.gamma_inf),
                fmt_e9(r.energy),
                fmt_e9(r.max_aspect_ratio),
                fmt_e9(r.min_angle),
                fmt_e9(r.tip_angle),
                fmt_e9(r.half_axis_ratio),
            ));
        }
        s
    }
}

/// Streams history and checkpoints to an output directory.
#[derive(Debug)]
pub struct OutputSink {
    pub out_dir: PathBuf,
    /// Checkpoint cadence in design steps; 0 disables checkpoints.
    pub checkpoint_every: usize,
}

impl OutputSink {
    fn record(&mut self, mesh: &Mesh, history: &History, snapshot: &StepSnapshot) -> Result<()> {
        write_atomic(&self.out_dir.join("history.csv"), |w| {
            w.write_all(history.csv().as_bytes())?;
            Ok(())
        })?;
        let step = history.rows.last().map(|r| r.step).unwrap_or(0);
        if self.checkpoint_every > 0 && step % self.checkpoint_every == 0 {
            let path = self.out_dir.join(format!("checkpoint_{step:05}.vtk"));
            checkpoint_vtk(mesh, snapshot, &path)?;
        }
        Ok(())
    }
}

/// Nodal fields of one design step, for checkpoints.
pub struct StepSnapshot {
    pub velocity: Vec<Vec2>,
    pub pressure: Vec<f64>,
    pub gamma_nodal: Vec<f64>,
    pub deformation: Vec<Vec2>,
}

pub fn checkpoint_vtk(mesh: &Mesh, snap: &StepSnapshot, path: &std::path::Path) -> Result<()> {
    write_vtk(
        mesh,
        path,
        &[
            ("velocity", FieldData::Vector(&snap.velocity)),
            ("pressure", FieldData::Scalar(&snap.pressure)),
            ("sensitivity", FieldData::Scalar(&snap.gamma_nodal)),
            ("deformation", FieldData::Vector(&snap.deformation)),
        ],
        &[],
    )
}

/// Multiplier and penalty update after one inner optimization round: a
/// violated constraint inflates its penalty, a satisfied one updates its
/// multiplier. The two constraints are handled independently.
pub fn update_multipliers(al: &AugLagState, b: Vec2, c: f64) -> AugLagState {
    let mut next = *al;
    if b.norm() > al.tau_b {
        next.rho_b = al.rho_b * al.rho_inc;
    } else {
        next.lambda_b = al.lambda_b + b * al.rho_b;
    }
    if c.abs() > al.tau_c {
        next.rho_c = al.rho_c * al.rho_inc;
    } else {
        next.lambda_c = al.lambda_c + al.rho_c * c;
    }
    next
}

struct Driver<'a> {
    cfgs: &'a SolverConfigs,
    history: History,
    j0: Option<f64>,
    /// Scale of the first step's sensitivity. The p-Laplace data is fed
    /// normalized by this value and the step size carries it instead, so the
    /// deformation approximates the unit-norm steepest-descent direction at
    /// every exponent while p = 2 reproduces the unnormalized update exactly.
    gamma_ref: Option<f64>,
    total_steps: usize,
    max_total_steps: usize,
    max_step_retries: usize,
    warm_primal: Option<crate::flow::FlowState>,
    warm_u: Option<DeformationField>,
    sink: Option<&'a mut OutputSink>,
}

enum InnerExit {
    Converged,
    StepBudget,
    MeshQuality,
}

impl<'a> Driver<'a> {
    fn new(cfgs: &'a SolverConfigs, max_total: usize, retries: usize, sink: Option<&'a mut OutputSink>) -> Driver<'a> {
        Driver {
            cfgs,
            history: History::default(),
            j0: None,
            gamma_ref: None,
            total_steps: 0,
            max_total_steps: max_total,
            max_step_retries: retries,
            warm_primal: None,
            warm_u: None,
            sink,
        }
    }

    /// One inner optimization round at tolerance `eps`.
    fn inner_loop(
        &mut self,
        mut mesh: Mesh,
        al: &AugLagState,
        eps: f64,
        max_steps: usize,
    ) -> Result<(Mesh, InnerExit)> {
        let mut j_prev: Option<f64> = None;
        let mut steps_here = 0usize;
        loop {
            let t0 = Instant::now();
            let dofs = Dofs::new(&mesh);
            let primal = solve_primal(&mesh, &self.cfgs.props, &self.cfgs.flow, self.warm_primal.as_ref())?;
            let (j, parts) = objective(&mesh, &dofs, &primal, &self.cfgs.props, al);
            let j0 = *self.j0.get_or_insert(j);
            let adjointstate = solve_adjoint(&mesh, &primal, &self.cfgs.props, &self.cfgs.flow)?;
            let gamma = shape_sensitivity(&mesh, &dofs, &primal, &adjointstate, &self.cfgs.props, al)?;
            self.warm_primal = Some(primal.clone());

            let converged = j_prev.map_or(false, |jp| (j - jp).abs() < eps * j0.abs());
            let out_of_budget =
                steps_here >= max_steps || self.total_steps >= self.max_total_steps;

            if converged || out_of_budget {
                self.push_row(&mesh, al, j, j0, parts.drag_term, gamma.max_abs(), 0.0, 0.0, t0);
                self.stream(&mesh, &primal, &gamma, None)?;
                let exit = if converged { InnerExit::Converged } else { InnerExit::StepBudget };
                return Ok((mesh, exit));
            }

            let gamma_ref = *self
                .gamma_ref
                .get_or_insert_with(|| gamma.max_abs().max(f64::MIN_POSITIVE));
            let data = crate::sensitivity::SensitivityField {
                nodes: gamma.nodes.clone(),
                gamma: gamma.gamma.iter().map(|g| g / gamma_ref).collect(),
            };
            let u = solve_plaplace(&mesh, &data, &self.cfgs.plaplace, self.warm_u.as_ref())?;
            let jp = shape_derivative(&mesh, &gamma, &u.u)?;
            if !gamma.is_zero() && !(jp < 0.0) {
                return Err(Error::Solver(format!(
                    "descent certificate violated: J' = {jp:.3e} at step {}",
                    self.total_steps
                )));
            }

            // Perturbation of identity with inversion-triggered step halving;
            // the step size resets every design step.
            let mut t = al.step_size * gamma_ref;
            let mut morphed = None;
            for _ in 0..=self.max_step_retries {
                match mesh.morph(&u.u, t) {
                    Ok(m) => {
                        morphed = Some(m);
                        break;
                    }
                    Err(Error::MorphInversion { .. }) => t *= 0.5,
                    Err(e) => return Err(e),
                }
            }
            let Some(next_mesh) = morphed else {
                self.push_row(&mesh, al, j, j0, parts.drag_term, gamma.max_abs(), u.energy, jp, t0);
                self.stream(&mesh, &primal, &gamma, Some(&u))?;
                self.history.mesh_quality_failure = true;
                return Ok((mesh, InnerExit::MeshQuality));
            };

            self.push_row(&mesh, al, j, j0, parts.drag_term, gamma.max_abs(), u.energy, jp, t0);
            self.stream(&mesh, &primal, &gamma, Some(&u))?;
            self.warm_u = Some(u);
            mesh = next_mesh;
            j_prev = Some(j);
            self.total_steps += 1;
            steps_here += 1;
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn push_row(
        &mut self,
        mesh: &Mesh,
        al: &AugLagState,
        j: f64,
        j0: f64,
        drag: f64,
        gamma_inf: f64,
        energy: f64,
        j_prime: f64,
        t0: Instant,
    ) {
        let q = mesh.quality();
        let (tip_angle, half_axis_ratio) = match (q.tip_opening_angle, q.half_axis_ratio) {
            (Some(a), Some(r)) => (a, r),
            _ => (f64::NAN, f64::NAN),
        };
        let last = self.history.rows.last().map(|r| r.step + 1).unwrap_or(0);
        self.history.rows.push(HistoryRow {
            step: last,
            j,
            j_over_j0: j / j0,
            drag,
            b_norm: (mesh.barycenter() - al.target_barycenter).norm(),
            c_abs: (mesh.volume() - al.target_volume).abs(),
            gamma_inf,
            energy,
            max_aspect_ratio: q.max_aspect_ratio,
            min_angle: q.min_angle,
            tip_angle,
            half_axis_ratio,
            j_prime,
            wall_time: t0.elapsed().as_secs_f64(),
        });
    }

    fn stream(
        &mut self,
        mesh: &Mesh,
        primal: &crate::flow::FlowState,
        gamma: &crate::sensitivity::SensitivityField,
        u: Option<&DeformationField>,
    ) -> Result<()> {
        let Some(sink) = self.sink.as_mut() else {
            return Ok(());
        };
        let mut gamma_nodal = vec![0.0; mesh.node_count()];
        for (i, &n) in gamma.nodes.iter().enumerate() {
            gamma_nodal[n] = gamma.gamma[i];
        }
        let snapshot = StepSnapshot {
            velocity: primal.velocity[..mesh.node_count()].to_vec(),
            pressure: primal.pressure.clone(),
            gamma_nodal,
            deformation: u
                .map(|f| f.u.clone())
                .unwrap_or_else(|| vec![Vec2::ZERO; mesh.node_count()]),
        };
        sink.record(mesh, &self.history, &snapshot)
    }
}

/// Runs one inner shape-optimization round on its own: the first objective of
/// the call serves as the run reference.
pub fn run_shape_loop(
    mesh: Mesh,
    al: &AugLagState,
    eps: f64,
    cfgs: &SolverConfigs,
    max_steps: usize,
) -> Result<(Mesh, History)> {
    al.validate()?;
    let mut driver = Driver::new(cfgs, max_steps, 5, None);
    let (mesh, exit) = driver.inner_loop(mesh, al, eps, max_steps)?;
    if matches!(exit, InnerExit::MeshQuality) {
        return Err(Error::MeshQuality(format!(
            "morph inverted cells and step halving was exhausted at step {}",
            driver.history.rows.last().map(|r| r.step).unwrap_or(0)
        )));
    }
    Ok((mesh, driver.history))
}

/// The full augmented Lagrange optimization. Returns the final mesh, the
/// concatenated history, and the final multiplier state.
pub fn run_augmented_lagrange(
    initial_mesh: Mesh,
    cfg: &OptimizerConfig,
    cfgs: &SolverConfigs,
    mut sink: Option<&mut OutputSink>,
) -> Result<(Mesh, History, AugLagState)> {
    cfg.validate()?;
    cfgs.props.validate()?;
    let mut driver = Driver::new(
        cfgs,
        cfg.max_total_steps,
        cfg.max_step_retries,
        sink.take(),
    );
    let mut mesh = initial_mesh;
    let mut al = cfg.auglag;
    let mut j_end_prev: Option<f64> = None;
    for k in 0..cfg.max_outer_steps {
        let eps = cfg.eps_seq[k.min(cfg.eps_seq.len() - 1)];
        let (m, exit) = driver.inner_loop(mesh, &al, eps, cfg.max_inner_steps)?;
        mesh = m;
        let b = mesh.barycenter() - al.target_barycenter;
        let c = mesh.volume() - al.target_volume;
        let j_end = driver.history.last_j().expect("inner loop records rows");
        let next = update_multipliers(&al, b, c);
        driver.history.outer_events.push(OuterEvent {
            outer_step: k,
            at_design_step: driver.history.rows.last().map(|r| r.step).unwrap_or(0),
            b_norm: b.norm(),
            c_abs: c.abs(),
            inflated_b: next.rho_b > al.rho_b,
            inflated_c: next.rho_c > al.rho_c,
            lambda_b: next.lambda_b,
            lambda_c: next.lambda_c,
            rho_b: next.rho_b,
            rho_c: next.rho_c,
        });
        al = next;

        match exit {
            InnerExit::MeshQuality => break,
            InnerExit::StepBudget => {
                if driver.total_steps >= cfg.max_total_steps {
                    break;
                }
            }
            InnerExit::Converged => {
                // Early rounds exist to settle the multipliers; the outer
                // stall test only applies once the tolerance sequence has
                // been walked down to its final value.
                let j0 = driver.j0.expect("objective evaluated");
                let sequence_done = k + 1 >= cfg.eps_seq.len();
                let outer_converged = j_end_prev
                    .map_or(false, |jp| (j_end - jp).abs() < eps * j0.abs());
                let constraints_ok = b.norm() <= al.tau_b && c.abs() <= al.tau_c;
                if sequence_done && outer_converged && constraints_ok {
                    break;
                }
            }
        }
        j_end_prev = Some(j_end);
    }
    Ok((mesh, driver.history, al))
}
