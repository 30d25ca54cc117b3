//! CLI entry points: run orchestration, gradient checking, mesh quality
//! reporting and a primal-only solve for debugging.

use crate::adjoint::solve_adjoint;
use crate::config::{parse_config, RunConfig};
use crate::error::{Error, Result};
use crate::fem::Dofs;
use crate::flow::{force, objective, solve_primal};
use crate::mesh::{load_mesh, save_native, write_vtk, FieldData, Mesh, MeshFormat};
use crate::optimizer::{run_augmented_lagrange, History, OutputSink};
use crate::sensitivity::{shape_derivative, shape_sensitivity, AugLagState};
use crate::util::{fmt_e9, write_atomic};
use crate::Vec2;
use clap::{Parser, Subcommand};
use std::io::Write as _;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "shapeopt",
    about = "Drag-minimizing shape optimization of an obstacle in 2D channel flow",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full augmented-Lagrange shape optimization.
    Optimize {
        /// Configuration file (dotted-key text format).
        #[arg(long)]
        config: PathBuf,
        /// Output directory override.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Validate the configuration and mesh, write the step-0 state, exit.
        #[arg(long)]
        dry_run: bool,
        /// Run several exponents concurrently, e.g. "2,3,4"; each sweep value
        /// writes to its own subdirectory.
        #[arg(long)]
        p_sweep: Option<String>,
        /// Checkpoint cadence in design steps (0 disables).
        #[arg(long)]
        checkpoint_every: Option<usize>,
        /// Reserved for future stochastic features; accepted and recorded.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare the adjoint shape derivative against finite differences.
    CheckGradient {
        #[arg(long)]
        config: PathBuf,
        /// Design node index to bump; may repeat.
        #[arg(long = "node", required = true)]
        nodes: Vec<usize>,
        /// Finite-difference step.
        #[arg(long, default_value_t = 1e-6)]
        h: f64,
        /// Also sweep h over {1e-4, 1e-5, 1e-6} and report the trend.
        #[arg(long)]
        h_sweep: bool,
    },
    /// Report quality metrics of a mesh file.
    MeshQuality {
        /// Mesh file (native text format unless --gmsh).
        mesh: PathBuf,
        #[arg(long)]
        gmsh: bool,
        /// Write per-cell metrics to this VTK file.
        #[arg(long)]
        vtk: Option<PathBuf>,
    },
    /// Solve the primal flow only and write the state as VTK.
    SolveFlow {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Entry point for the `shapeopt` binary; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Optimize {
            config,
            out,
            dry_run,
            p_sweep,
            checkpoint_every,
            seed,
        } => {
            let mut cfg = parse_config(&config)?;
            if let Some(out) = out {
                cfg.out_dir = out;
            }
            if let Some(every) = checkpoint_every {
                cfg.checkpoint_every = every;
            }
            if let Some(seed) = seed {
                eprintln!("note: --seed {seed} is reserved; the pipeline is deterministic");
            }
            match p_sweep {
                Some(list) => {
                    let mut ps = Vec::new();
                    for part in list.split(',') {
                        let p: f64 = part.trim().parse().map_err(|_| Error::Config {
                            key: "--p-sweep".into(),
                            msg: format!("bad exponent `{part}`"),
                        })?;
                        ps.push(p);
                    }
                    cmd_p_sweep(&cfg, &ps, dry_run)
                }
                None => cmd_optimize(&cfg, dry_run).map(|_| ()),
            }
        }
        Command::CheckGradient {
            config,
            nodes,
            h,
            h_sweep,
        } => {
            let cfg = parse_config(&config)?;
            let hs: Vec<f64> = if h_sweep {
                vec![1e-4, 1e-5, 1e-6]
            } else {
                vec![h]
            };
            let mut all_pass = true;
            for node in nodes {
                for &h in &hs {
                    let rep = cmd_check_gradient(&cfg, node, h)?;
                    println!(
                        "node {node} h={h:.1e}: J'_adjoint={} J'_fd={} rel_err={:.4e} {}",
                        fmt_e9(rep.jp_adjoint),
                        fmt_e9(rep.jp_fd),
                        rep.rel_err,
                        if rep.pass { "PASS" } else { "FAIL" }
                    );
                    all_pass &= rep.pass;
                }
            }
            if all_pass {
                Ok(())
            } else {
                Err(Error::Solver("gradient check failed".into()))
            }
        }
        Command::MeshQuality { mesh, gmsh, vtk } => {
            let format = if gmsh {
                MeshFormat::GmshV2
            } else {
                MeshFormat::NativeText
            };
            let report = cmd_mesh_quality(&mesh, format, vtk.as_deref())?;
            print!("{report}");
            Ok(())
        }
        Command::SolveFlow { config, out } => {
            let mut cfg = parse_config(&config)?;
            if let Some(out) = out {
                cfg.out_dir = out;
            }
            cmd_solve_flow(&cfg)
        }
    }
}

/// Final performance indicators of one optimization run.
#[derive(Clone, Debug)]
pub struct Summary {
    pub steps: usize,
    pub j0: f64,
    pub j_final: f64,
    pub j_over_j0: f64,
    pub tip_angle: f64,
    pub half_axis_ratio: f64,
    pub max_aspect_ratio: f64,
    pub min_angle: f64,
    pub b_norm: f64,
    pub c_abs: f64,
    pub outer_steps: usize,
    pub wall_time: f64,
}

impl Summary {
    fn render(&self) -> String {
        let mut s = String::new();
        s.push_str("final performance indicators\n");
        s.push_str(&format!("design steps        {}\n", self.steps));
        s.push_str(&format!("outer steps         {}\n", self.outer_steps));
        s.push_str(&format!("J0                  {}\n", fmt_e9(self.j0)));
        s.push_str(&format!("J final             {}\n", fmt_e9(self.j_final)));
        s.push_str(&format!("J/J0                {}\n", fmt_e9(self.j_over_j0)));
        s.push_str(&format!("tip angle [deg]     {}\n", fmt_e9(self.tip_angle)));
        s.push_str(&format!("a/b                 {}\n", fmt_e9(self.half_axis_ratio)));
        s.push_str(&format!("max aspect ratio    {}\n", fmt_e9(self.max_aspect_ratio)));
        s.push_str(&format!("min angle [deg]     {}\n", fmt_e9(self.min_angle)));
        s.push_str(&format!("|b|                 {}\n", fmt_e9(self.b_norm)));
        s.push_str(&format!("|c|                 {}\n", fmt_e9(self.c_abs)));
        s.push_str(&format!("wall time [s]       {:.1}\n", self.wall_time));
        s
    }
}

/// Runs the optimization described by `cfg`, writing history, checkpoints,
/// the final mesh and a summary report into the output directory.
pub fn cmd_optimize(cfg: &RunConfig, dry_run: bool) -> Result<Summary> {
    let t0 = std::time::Instant::now();
    let mesh = cfg.load_mesh()?;
    std::fs::create_dir_all(&cfg.out_dir)?;

    if dry_run {
        write_vtk(&mesh, &cfg.out_dir.join("step_0000.vtk"), &[], &[])?;
        let q = mesh.quality();
        println!(
            "dry run: mesh ok ({} cells, {} nodes, max AR {:.3}), config ok",
            mesh.cell_count(),
            mesh.node_count(),
            q.max_aspect_ratio
        );
        return Ok(Summary {
            steps: 0,
            j0: f64::NAN,
            j_final: f64::NAN,
            j_over_j0: f64::NAN,
            tip_angle: q.tip_opening_angle.unwrap_or(f64::NAN),
            half_axis_ratio: q.half_axis_ratio.unwrap_or(f64::NAN),
            max_aspect_ratio: q.max_aspect_ratio,
            min_angle: q.min_angle,
            b_norm: 0.0,
            c_abs: 0.0,
            outer_steps: 0,
            wall_time: t0.elapsed().as_secs_f64(),
        });
    }

    let opt_cfg = cfg.optimizer_config(&mesh);
    let cfgs = cfg.solver_configs();
    let mut sink = OutputSink {
        out_dir: cfg.out_dir.clone(),
        checkpoint_every: cfg.checkpoint_every,
    };
    let (final_mesh, history, al) = run_augmented_lagrange(mesh, &opt_cfg, &cfgs, Some(&mut sink))?;

    save_native(&final_mesh, &cfg.out_dir.join("final.mesh"))?;
    write_vtk(&final_mesh, &cfg.out_dir.join("final.vtk"), &[], &[])?;
    let summary = summarize(&final_mesh, &history, &al, t0.elapsed().as_secs_f64())?;
    write_atomic(&cfg.out_dir.join("summary.txt"), |w| {
        w.write_all(summary.render().as_bytes())?;
        Ok(())
    })?;
    println!("{}", summary.render());
    if history.mesh_quality_failure {
        return Err(Error::MeshQuality(
            "run terminated early: repeated cell inversion during morph".into(),
        ));
    }
    Ok(summary)
}

fn summarize(mesh: &Mesh, history: &History, al: &AugLagState, wall: f64) -> Result<Summary> {
    let last = history
        .rows
        .last()
        .ok_or_else(|| Error::Solver("empty history".into()))?;
    Ok(Summary {
        steps: last.step,
        j0: history.rows[0].j,
        j_final: last.j,
        j_over_j0: last.j_over_j0,
        tip_angle: last.tip_angle,
        half_axis_ratio: last.half_axis_ratio,
        max_aspect_ratio: last.max_aspect_ratio,
        min_angle: last.min_angle,
        b_norm: (mesh.barycenter() - al.target_barycenter).norm(),
        c_abs: (mesh.volume() - al.target_volume).abs(),
        outer_steps: history.outer_events.len(),
        wall_time: wall,
    })
}

fn cmd_p_sweep(cfg: &RunConfig, ps: &[f64], dry_run: bool) -> Result<()> {
    let mut handles = Vec::new();
    for &p in ps {
        let mut sub = cfg.clone();
        sub.plaplace.p = p;
        sub.plaplace.continuation = crate::deform::default_schedule(p);
        sub.out_dir = cfg.out_dir.join(format!("p{p}"));
        handles.push(std::thread::spawn(move || {
            cmd_optimize(&sub, dry_run).map(|s| (p, s))
        }));
    }
    let mut failed = false;
    for h in handles {
        match h.join() {
            Ok(Ok((p, s))) => {
                println!("p = {p}: J/J0 = {:.6} after {} steps", s.j_over_j0, s.steps)
            }
            Ok(Err(e)) => {
                eprintln!("sweep member failed: {e}");
                failed = true;
            }
            Err(_) => {
                eprintln!("sweep thread panicked");
                failed = true;
            }
        }
    }
    if failed {
        Err(Error::Solver("p-sweep had failures".into()))
    } else {
        Ok(())
    }
}

/// Gradient check report for one design node.
#[derive(Clone, Copy, Debug)]
pub struct GradientReport {
    pub node: usize,
    pub h: f64,
    pub jp_adjoint: f64,
    pub jp_fd: f64,
    pub rel_err: f64,
    pub pass: bool,
}

/// Central finite-difference check of the adjoint shape derivative under a
/// single-node normal bump, re-solving the primal on both sides. The merit
/// function is the penalized objective plus the multiplier terms, the
/// quantity whose derivative the sensitivity represents; with freshly
/// initialized multipliers it coincides with the objective.
pub fn cmd_check_gradient(cfg: &RunConfig, node: usize, h: f64) -> Result<GradientReport> {
    let mesh = cfg.load_mesh()?;
    let al = cfg.resolved_auglag(&mesh);
    let dofs = Dofs::new(&mesh);
    let db = mesh.design_boundary()?;
    let Some(i) = db.index_of(node) else {
        return Err(Error::Mesh(format!("node {node} is not a design node")));
    };

    let primal = solve_primal(&mesh, &cfg.props, &cfg.flow, None)?;
    let adj = solve_adjoint(&mesh, &primal, &cfg.props, &cfg.flow)?;
    let gamma = shape_sensitivity(&mesh, &dofs, &primal, &adj, &cfg.props, &al)?;

    let mut u = vec![Vec2::ZERO; mesh.node_count()];
    u[node] = db.normals[i];
    let jp_adjoint = shape_derivative(&mesh, &gamma, &u)?;

    let merit = |m: &Mesh| -> Result<f64> {
        let d = Dofs::new(m);
        let st = solve_primal(m, &cfg.props, &cfg.flow, Some(&primal))?;
        let (j, parts) = objective(m, &d, &st, &cfg.props, &al);
        Ok(j + al.lambda_b.dot(parts.b) + al.lambda_c * parts.c)
    };
    let jp_fd = (merit(&mesh.morph(&u, h)?)? - merit(&mesh.morph(&u, -h)?)?) / (2.0 * h);
    let rel_err = (jp_adjoint - jp_fd).abs() / jp_fd.abs().max(f64::MIN_POSITIVE);
    Ok(GradientReport {
        node,
        h,
        jp_adjoint,
        jp_fd,
        rel_err,
        pass: rel_err < 0.02,
    })
}

/// Loads a mesh, renders global quality numbers and optionally writes
/// per-cell metrics as VTK cell fields.
pub fn cmd_mesh_quality(path: &Path, format: MeshFormat, vtk: Option<&Path>) -> Result<String> {
    let mesh = load_mesh(path, format)?;
    let q = mesh.quality();
    let mut report = String::new();
    report.push_str(&format!("cells               {}\n", mesh.cell_count()));
    report.push_str(&format!("nodes               {}\n", mesh.node_count()));
    report.push_str(&format!("max aspect ratio    {}\n", fmt_e9(q.max_aspect_ratio)));
    report.push_str(&format!("min angle [deg]     {}\n", fmt_e9(q.min_angle)));
    if let (Some(t), Some(r)) = (q.tip_opening_angle, q.half_axis_ratio) {
        report.push_str(&format!("tip angle [deg]     {}\n", fmt_e9(t)));
        report.push_str(&format!("a/b                 {}\n", fmt_e9(r)));
    }
    if let Some(vtk_path) = vtk {
        write_vtk(
            &mesh,
            vtk_path,
            &[],
            &[
                ("aspect_ratio", &q.aspect_ratio),
                ("min_interior_angle", &q.min_interior_angle),
            ],
        )?;
    }
    Ok(report)
}

/// Primal-only solve for debugging boundary conditions and convergence.
pub fn cmd_solve_flow(cfg: &RunConfig) -> Result<()> {
    let mesh = cfg.load_mesh()?;
    let dofs = Dofs::new(&mesh);
    let state = solve_primal(&mesh, &cfg.props, &cfg.flow, None)?;
    let al = cfg.resolved_auglag(&mesh);
    let (j, parts) = objective(&mesh, &dofs, &state, &cfg.props, &al);
    let f_boundary = force(&mesh, &dofs, &state, &cfg.props);
    println!(
        "converged in {} Picard iterations, residual {:.3e}",
        state.picard_iterations, state.residual_norm
    );
    println!(
        "reaction force   ({}, {})",
        fmt_e9(parts.force.x),
        fmt_e9(parts.force.y)
    );
    println!(
        "boundary force   ({}, {})",
        fmt_e9(f_boundary.x),
        fmt_e9(f_boundary.y)
    );
    println!("objective        {}", fmt_e9(j));
    std::fs::create_dir_all(&cfg.out_dir)?;
    let velocity: Vec<Vec2> = state.velocity[..mesh.node_count()].to_vec();
    write_vtk(
        &mesh,
        &cfg.out_dir.join("flow.vtk"),
        &[
            ("velocity", FieldData::Vector(&velocity)),
            ("pressure", FieldData::Scalar(&state.pressure)),
        ],
        &[],
    )?;
    Ok(())
}
