//! Run configuration: a flat text format with dotted keys.
//!
//! ```text
//! # case setup
//! mesh.source = builtin
//! mesh.target_cells = 3000
//! flow.viscosity = 1.0
//! plaplace.p = 4
//! auglag.rho_b = 5e7
//! ```
//!
//! Unknown keys are rejected so typos in penalty names fail loudly.

use crate::deform::{default_schedule, PLaplaceConfig};
use crate::error::{Error, Result};
use crate::flow::{FluidProperties, SolverConfig};
use crate::geom::Vec2;
use crate::mesh::{ChannelSpec, Mesh, MeshFormat, Obstacle};
use crate::optimizer::{OptimizerConfig, SolverConfigs};
use crate::sensitivity::AugLagState;
use std::collections::HashMap;
use std::path::{Path, PathBuf};

/// Where the initial mesh comes from.
#[derive(Clone, Debug)]
pub enum MeshSource {
    /// Built-in channel-with-obstacle generator.
    Builtin(ChannelSpec),
    /// Mesh file on disk.
    File { path: PathBuf, format: MeshFormat },
}

/// Fully validated run configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub mesh: MeshSource,
    pub props: FluidProperties,
    pub flow: SolverConfig,
    pub plaplace: PLaplaceConfig,
    /// Barycenter target; `None` uses the initial mesh barycenter.
    pub target_barycenter: Option<Vec2>,
    /// Volume target; `None` uses the initial mesh volume.
    pub target_volume: Option<f64>,
    pub auglag: AugLagState,
    pub eps_seq: Vec<f64>,
    pub max_inner_steps: usize,
    pub max_outer_steps: usize,
    pub max_total_steps: usize,
    pub out_dir: PathBuf,
    pub checkpoint_every: usize,
}

impl RunConfig {
    /// The 2D low-Reynolds reference case with default solver settings.
    pub fn reference_case() -> RunConfig {
        RunConfig {
            mesh: MeshSource::Builtin(ChannelSpec {
                length: 50.0,
                height: 10.0,
                obstacle: Obstacle::Circle { diameter: 1.0 },
                target_cells: 3000,
            }),
            props: FluidProperties {
                density: 1.0,
                viscosity: 1.0,
                inflow: Vec2::new(1.0, 0.0),
            },
            flow: SolverConfig::default(),
            plaplace: PLaplaceConfig::with_exponent(4.0),
            target_barycenter: None,
            target_volume: None,
            auglag: AugLagState::new(Vec2::ZERO, 1.0),
            eps_seq: (1..=7).map(|k| 10.0f64.powi(-k)).collect(),
            max_inner_steps: 600,
            max_outer_steps: 20,
            max_total_steps: 600,
            out_dir: PathBuf::from("out"),
            checkpoint_every: 50,
        }
    }

    /// Loads the initial mesh from the configured source.
    pub fn load_mesh(&self) -> Result<Mesh> {
        match &self.mesh {
            MeshSource::Builtin(spec) => crate::mesh::channel_with_obstacle(spec),
            MeshSource::File { path, format } => crate::mesh::load_mesh(path, *format),
        }
    }

    /// Augmented-Lagrange state with targets resolved against the initial mesh.
    pub fn resolved_auglag(&self, mesh: &Mesh) -> AugLagState {
        let mut al = self.auglag;
        al.target_barycenter = self.target_barycenter.unwrap_or_else(|| mesh.barycenter());
        al.target_volume = self.target_volume.unwrap_or_else(|| mesh.volume());
        al
    }

    pub fn optimizer_config(&self, mesh: &Mesh) -> OptimizerConfig {
        let mut cfg = OptimizerConfig::new(self.resolved_auglag(mesh));
        cfg.eps_seq = self.eps_seq.clone();
        cfg.max_inner_steps = self.max_inner_steps;
        cfg.max_outer_steps = self.max_outer_steps;
        cfg.max_total_steps = self.max_total_steps;
        cfg
    }

    pub fn solver_configs(&self) -> SolverConfigs {
        SolverConfigs {
            props: self.props,
            flow: self.flow,
            plaplace: self.plaplace.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.props.validate()?;
        self.flow.validate()?;
        self.plaplace.validate()?;
        if let Some(v) = self.target_volume {
            if !(v > 0.0) {
                return Err(bad("auglag.target_volume", "must be positive"));
            }
        }
        // Remaining invariants are checked by OptimizerConfig/AugLagState
        // when the run starts (targets may still be unresolved here).
        Ok(())
    }
}

fn bad(key: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        msg: msg.into(),
    }
}

/// Parses a configuration file. Every key must be known; values are
/// validated as they are set.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let mut kv: HashMap<String, String> = HashMap::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(bad(
                &format!("line {}", ln + 1),
                format!("expected `key = value`, got `{line}`"),
            ));
        };
        let key = k.trim().to_string();
        if kv.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(bad(&key, "key set twice"));
        }
    }
    build_config(kv)
}

fn build_config(mut kv: HashMap<String, String>) -> Result<RunConfig> {
    let mut cfg = RunConfig::reference_case();

    let mut take = |key: &str| kv.remove(key);
    let f64_of = |key: &str, v: &str| -> Result<f64> {
        v.parse::<f64>()
            .map_err(|_| bad(key, format!("expected a number, got `{v}`")))
    };
    let usize_of = |key: &str, v: &str| -> Result<usize> {
        v.parse::<usize>()
            .map_err(|_| bad(key, format!("expected a non-negative integer, got `{v}`")))
    };

    // mesh.*
    let source = take("mesh.source").unwrap_or_else(|| "builtin".into());
    let mut spec = ChannelSpec {
        length: 50.0,
        height: 10.0,
        obstacle: Obstacle::Circle { diameter: 1.0 },
        target_cells: 3000,
    };
    if let Some(v) = take("mesh.channel_length") {
        spec.length = f64_of("mesh.channel_length", &v)?;
    }
    if let Some(v) = take("mesh.channel_height") {
        spec.height = f64_of("mesh.channel_height", &v)?;
    }
    if let Some(v) = take("mesh.target_cells") {
        spec.target_cells = usize_of("mesh.target_cells", &v)?;
    }
    let obstacle_kind = take("mesh.obstacle").unwrap_or_else(|| "circle".into());
    let diameter = take("mesh.diameter")
        .map(|v| f64_of("mesh.diameter", &v))
        .transpose()?;
    let ax = take("mesh.ellipse_a")
        .map(|v| f64_of("mesh.ellipse_a", &v))
        .transpose()?;
    let ay = take("mesh.ellipse_b")
        .map(|v| f64_of("mesh.ellipse_b", &v))
        .transpose()?;
    spec.obstacle = match obstacle_kind.as_str() {
        "circle" => Obstacle::Circle {
            diameter: diameter.unwrap_or(1.0),
        },
        "ellipse" => Obstacle::Ellipse {
            semi_axis_x: ax.ok_or_else(|| bad("mesh.ellipse_a", "required for ellipse"))?,
            semi_axis_y: ay.ok_or_else(|| bad("mesh.ellipse_b", "required for ellipse"))?,
        },
        other => return Err(bad("mesh.obstacle", format!("unknown obstacle `{other}`"))),
    };
    let mesh_path = take("mesh.path");
    let mesh_format = take("mesh.format");
    cfg.mesh = match source.as_str() {
        "builtin" => MeshSource::Builtin(spec),
        "file" => {
            let path = mesh_path.ok_or_else(|| bad("mesh.path", "required when mesh.source = file"))?;
            let format = match mesh_format.as_deref().unwrap_or("native") {
                "native" => MeshFormat::NativeText,
                "gmsh" => MeshFormat::GmshV2,
                other => return Err(bad("mesh.format", format!("unknown format `{other}`"))),
            };
            MeshSource::File {
                path: PathBuf::from(path),
                format,
            }
        }
        other => return Err(bad("mesh.source", format!("unknown source `{other}`"))),
    };

    // flow.*
    if let Some(v) = take("flow.density") {
        cfg.props.density = f64_of("flow.density", &v)?;
    }
    if let Some(v) = take("flow.viscosity") {
        cfg.props.viscosity = f64_of("flow.viscosity", &v)?;
    }
    if let Some(v) = take("flow.inflow_x") {
        cfg.props.inflow.x = f64_of("flow.inflow_x", &v)?;
    }
    if let Some(v) = take("flow.inflow_y") {
        cfg.props.inflow.y = f64_of("flow.inflow_y", &v)?;
    }
    if let Some(v) = take("flow.nonlinear_tol") {
        cfg.flow.nonlinear_tol = f64_of("flow.nonlinear_tol", &v)?;
    }
    if let Some(v) = take("flow.max_picard") {
        cfg.flow.max_picard = usize_of("flow.max_picard", &v)?;
    }
    if let Some(v) = take("flow.linear_tol") {
        cfg.flow.linear_tol = f64_of("flow.linear_tol", &v)?;
    }
    if let Some(v) = take("flow.linear_refine") {
        cfg.flow.linear_refine = usize_of("flow.linear_refine", &v)?;
    }

    // plaplace.*
    if let Some(v) = take("plaplace.p") {
        let p = f64_of("plaplace.p", &v)?;
        if !(p >= 2.0) {
            return Err(bad("plaplace.p", "p must be >= 2"));
        }
        cfg.plaplace.p = p;
        cfg.plaplace.continuation = default_schedule(p);
    }
    if let Some(v) = take("plaplace.eps_reg") {
        cfg.plaplace.eps_reg = f64_of("plaplace.eps_reg", &v)?;
    }
    if let Some(v) = take("plaplace.tol") {
        cfg.plaplace.tol = f64_of("plaplace.tol", &v)?;
    }
    if let Some(v) = take("plaplace.max_newton") {
        cfg.plaplace.max_newton = usize_of("plaplace.max_newton", &v)?;
    }
    if let Some(v) = take("plaplace.continuation") {
        let mut sched = Vec::new();
        for part in v.split(',') {
            sched.push(f64_of("plaplace.continuation", part.trim())?);
        }
        cfg.plaplace.continuation = sched;
    }
    if let Some(v) = take("plaplace.continuation_tol") {
        cfg.plaplace.continuation_tol = f64_of("plaplace.continuation_tol", &v)?;
    }

    // auglag.*
    if let Some(v) = take("auglag.rho_b") {
        cfg.auglag.rho_b = f64_of("auglag.rho_b", &v)?;
    }
    if let Some(v) = take("auglag.rho_c") {
        cfg.auglag.rho_c = f64_of("auglag.rho_c", &v)?;
    }
    if let Some(v) = take("auglag.rho_inc") {
        cfg.auglag.rho_inc = f64_of("auglag.rho_inc", &v)?;
    }
    if let Some(v) = take("auglag.tau_b") {
        cfg.auglag.tau_b = f64_of("auglag.tau_b", &v)?;
    }
    if let Some(v) = take("auglag.tau_c") {
        cfg.auglag.tau_c = f64_of("auglag.tau_c", &v)?;
    }
    if let Some(v) = take("auglag.step_size") {
        cfg.auglag.step_size = f64_of("auglag.step_size", &v)?;
    }
    let tbx = take("auglag.target_barycenter_x")
        .map(|v| f64_of("auglag.target_barycenter_x", &v))
        .transpose()?;
    let tby = take("auglag.target_barycenter_y")
        .map(|v| f64_of("auglag.target_barycenter_y", &v))
        .transpose()?;
    cfg.target_barycenter = match (tbx, tby) {
        (None, None) => None,
        (x, y) => Some(Vec2::new(x.unwrap_or(0.0), y.unwrap_or(0.0))),
    };
    cfg.target_volume = take("auglag.target_volume")
        .map(|v| f64_of("auglag.target_volume", &v))
        .transpose()?;

    // optimizer.*
    if let Some(v) = take("optimizer.eps_seq") {
        let mut seq = Vec::new();
        for part in v.split(',') {
            seq.push(f64_of("optimizer.eps_seq", part.trim())?);
        }
        cfg.eps_seq = seq;
    }
    if let Some(v) = take("optimizer.max_inner_steps") {
        cfg.max_inner_steps = usize_of("optimizer.max_inner_steps", &v)?;
    }
    if let Some(v) = take("optimizer.max_outer_steps") {
        cfg.max_outer_steps = usize_of("optimizer.max_outer_steps", &v)?;
    }
    if let Some(v) = take("optimizer.max_total_steps") {
        cfg.max_total_steps = usize_of("optimizer.max_total_steps", &v)?;
    }

    // output.*
    if let Some(v) = take("output.dir") {
        cfg.out_dir = PathBuf::from(v);
    }
    if let Some(v) = take("output.checkpoint_every") {
        cfg.checkpoint_every = usize_of("output.checkpoint_every", &v)?;
    }

    if let Some(unknown) = kv.keys().next() {
        return Err(bad(unknown, "unknown key"));
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE: &str = "
# 2D low-Reynolds reference values
mesh.source = builtin
mesh.target_cells = 3000
flow.density = 1.0
flow.viscosity = 1.0
flow.inflow_x = 1.0
plaplace.p = 4
auglag.rho_b = 5e7
auglag.rho_c = 1e2
auglag.rho_inc = 2
auglag.tau_b = 1e-6
auglag.tau_c = 2e-2
auglag.step_size = 2e-3
auglag.target_barycenter_x = 0
auglag.target_barycenter_y = 0
optimizer.eps_seq = 1e-1,1e-2,1e-3,1e-4,1e-5,1e-6,1e-7
";

    #[test]
    fn reference_values_parse() {
        let cfg = parse_config_str(REFERENCE).unwrap();
        assert_eq!(cfg.auglag.rho_b, 5e7);
        assert_eq!(cfg.auglag.tau_c, 2e-2);
        assert_eq!(cfg.auglag.step_size, 2e-3);
        assert_eq!(cfg.plaplace.p, 4.0);
        assert_eq!(cfg.plaplace.continuation, vec![2.0, 3.0, 4.0]);
        assert_eq!(cfg.eps_seq.len(), 7);
        assert_eq!(cfg.target_barycenter, Some(Vec2::ZERO));
    }

    #[test]
    fn small_p_rejected() {
        let err = parse_config_str("plaplace.p = 1.5").unwrap_err();
        assert!(err.to_string().contains("p must be >= 2"), "{err}");
    }

    #[test]
    fn unknown_key_named() {
        let err = parse_config_str("auglag.rho_bb = 2").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("rho_bb") && msg.contains("unknown key"), "{msg}");
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let cfg = parse_config_str("# hi\n\nflow.viscosity = 2.5 # inline\n").unwrap();
        assert_eq!(cfg.props.viscosity, 2.5);
    }

    #[test]
    fn exit_code_for_config_errors_is_two() {
        let err = parse_config_str("nope = 1").unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
