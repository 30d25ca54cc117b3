//! Python bindings: meshes, flow/adjoint solves, sensitivities, p-Laplace
//! descent directions and the optimization driver.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use shapeopt::adjoint::AdjointState;
use shapeopt::deform::{DeformationField, PLaplaceConfig};
use shapeopt::fem::Dofs;
use shapeopt::flow::{FlowState, FluidProperties, SolverConfig};
use shapeopt::mesh::{ChannelSpec, Mesh, MeshFormat, Obstacle};
use shapeopt::optimizer::{OptimizerConfig, SolverConfigs};
use shapeopt::sensitivity::{AugLagState, SensitivityField};
use shapeopt::{Error, Vec2};
use std::path::{Path, PathBuf};

fn to_py(e: Error) -> PyErr {
    match &e {
        Error::Config { .. } | Error::Parse { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn vec2_list(v: &[Vec2]) -> Vec<(f64, f64)> {
    v.iter().map(|p| (p.x, p.y)).collect()
}

fn parse_field(mesh: &Mesh, u: Vec<(f64, f64)>) -> PyResult<Vec<Vec2>> {
    if u.len() != mesh.node_count() {
        return Err(PyValueError::new_err(format!(
            "field has {} entries for {} nodes",
            u.len(),
            mesh.node_count()
        )));
    }
    Ok(u.into_iter().map(|(x, y)| Vec2::new(x, y)).collect())
}

/// Unstructured triangle mesh with tagged boundary loops.
#[pyclass(name = "Mesh")]
#[derive(Clone)]
struct PyMesh {
    inner: Mesh,
}

#[pymethods]
impl PyMesh {
    /// Loads a mesh file; `format` is "native" or "gmsh".
    #[staticmethod]
    #[pyo3(signature = (path, format = "native"))]
    fn load(path: PathBuf, format: &str) -> PyResult<Self> {
        let fmt = match format {
            "native" => MeshFormat::NativeText,
            "gmsh" => MeshFormat::GmshV2,
            other => return Err(PyValueError::new_err(format!("unknown format `{other}`"))),
        };
        Ok(PyMesh {
            inner: shapeopt::mesh::load_mesh(&path, fmt).map_err(to_py)?,
        })
    }

    /// Generates the channel-with-obstacle case. Passing `ellipse=(a, b)`
    /// overrides the circular obstacle.
    #[staticmethod]
    #[pyo3(signature = (length = 50.0, height = 10.0, diameter = 1.0, target_cells = 3000, ellipse = None))]
    fn generate_channel(
        length: f64,
        height: f64,
        diameter: f64,
        target_cells: usize,
        ellipse: Option<(f64, f64)>,
    ) -> PyResult<Self> {
        let obstacle = match ellipse {
            Some((a, b)) => Obstacle::Ellipse {
                semi_axis_x: a,
                semi_axis_y: b,
            },
            None => Obstacle::Circle { diameter },
        };
        let spec = ChannelSpec {
            length,
            height,
            obstacle,
            target_cells,
        };
        Ok(PyMesh {
            inner: shapeopt::mesh::channel_with_obstacle(&spec).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        shapeopt::mesh::save_native(&self.inner, &path).map_err(to_py)
    }

    fn write_vtk(&self, path: PathBuf) -> PyResult<()> {
        shapeopt::mesh::write_vtk(&self.inner, &path, &[], &[]).map_err(to_py)
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn cell_count(&self) -> usize {
        self.inner.cell_count()
    }

    fn nodes(&self) -> Vec<(f64, f64)> {
        vec2_list(self.inner.nodes())
    }

    fn volume(&self) -> f64 {
        self.inner.volume()
    }

    fn barycenter(&self) -> (f64, f64) {
        let b = self.inner.barycenter();
        (b.x, b.y)
    }

    fn design_nodes(&self) -> PyResult<Vec<usize>> {
        Ok(self.inner.design_boundary().map_err(to_py)?.nodes)
    }

    fn design_normals(&self) -> PyResult<Vec<(usize, (f64, f64))>> {
        Ok(self
            .inner
            .design_normals()
            .map_err(to_py)?
            .into_iter()
            .map(|(n, v)| (n, (v.x, v.y)))
            .collect())
    }

    /// Global quality metrics as a dict.
    fn quality(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let q = self.inner.quality();
        let d = pyo3::types::PyDict::new(py);
        d.set_item("max_aspect_ratio", q.max_aspect_ratio)?;
        d.set_item("min_angle", q.min_angle)?;
        d.set_item("tip_opening_angle", q.tip_opening_angle)?;
        d.set_item("half_axis_ratio", q.half_axis_ratio)?;
        Ok(d.into_any().unbind())
    }

    fn tip_metrics(&self) -> PyResult<(f64, f64)> {
        self.inner.tip_metrics().map_err(to_py)
    }

    /// Perturbation of identity: returns the morphed mesh.
    fn morph(&self, u: Vec<(f64, f64)>, t: f64) -> PyResult<PyMesh> {
        let field = parse_field(&self.inner, u)?;
        Ok(PyMesh {
            inner: self.inner.morph(&field, t).map_err(to_py)?,
        })
    }
}

/// Fluid constants.
#[pyclass(name = "Fluid")]
#[derive(Clone)]
struct PyFluid {
    inner: FluidProperties,
}

#[pymethods]
impl PyFluid {
    #[new]
    #[pyo3(signature = (density = 1.0, viscosity = 1.0, inflow = (1.0, 0.0)))]
    fn new(density: f64, viscosity: f64, inflow: (f64, f64)) -> Self {
        PyFluid {
            inner: FluidProperties {
                density,
                viscosity,
                inflow: Vec2::new(inflow.0, inflow.1),
            },
        }
    }
}

/// Converged primal flow state.
#[pyclass(name = "FlowState")]
#[derive(Clone)]
struct PyFlowState {
    inner: FlowState,
    n_mesh_nodes: usize,
}

#[pymethods]
impl PyFlowState {
    /// Velocity at the mesh nodes (vertex part of the quadratic field).
    fn velocity(&self) -> Vec<(f64, f64)> {
        vec2_list(&self.inner.velocity[..self.n_mesh_nodes])
    }

    fn pressure(&self) -> Vec<f64> {
        self.inner.pressure.clone()
    }

    #[getter]
    fn residual_norm(&self) -> f64 {
        self.inner.residual_norm
    }

    #[getter]
    fn picard_iterations(&self) -> usize {
        self.inner.picard_iterations
    }
}

/// Adjoint state for the drag objective.
#[pyclass(name = "AdjointState")]
#[derive(Clone)]
struct PyAdjointState {
    inner: AdjointState,
    n_mesh_nodes: usize,
}

#[pymethods]
impl PyAdjointState {
    fn velocity(&self) -> Vec<(f64, f64)> {
        vec2_list(&self.inner.velocity[..self.n_mesh_nodes])
    }

    fn pressure(&self) -> Vec<f64> {
        self.inner.pressure.clone()
    }

    #[getter]
    fn residual_norm(&self) -> f64 {
        self.inner.residual_norm
    }
}

/// Sensitivity density on the design nodes.
#[pyclass(name = "Sensitivity")]
#[derive(Clone)]
struct PySensitivity {
    inner: SensitivityField,
}

#[pymethods]
impl PySensitivity {
    fn nodes(&self) -> Vec<usize> {
        self.inner.nodes.clone()
    }

    fn gamma(&self) -> Vec<f64> {
        self.inner.gamma.clone()
    }

    fn max_abs(&self) -> f64 {
        self.inner.max_abs()
    }
}

/// Deformation field from the p-Laplace solve.
#[pyclass(name = "Deformation")]
#[derive(Clone)]
struct PyDeformation {
    inner: DeformationField,
}

#[pymethods]
impl PyDeformation {
    fn u(&self) -> Vec<(f64, f64)> {
        vec2_list(&self.inner.u)
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    #[getter]
    fn energy(&self) -> f64 {
        self.inner.energy
    }

    #[getter]
    fn newton_iterations(&self) -> usize {
        self.inner.newton_iterations
    }
}

/// Multipliers, penalties and targets of the augmented Lagrange method.
#[pyclass(name = "AugLag")]
#[derive(Clone)]
struct PyAugLag {
    inner: AugLagState,
}

#[pymethods]
impl PyAugLag {
    #[new]
    #[pyo3(signature = (target_barycenter, target_volume, rho_b = 5e7, rho_c = 1e2, rho_inc = 2.0, tau_b = 1e-6, tau_c = 2e-2, step_size = 2e-3))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        target_barycenter: (f64, f64),
        target_volume: f64,
        rho_b: f64,
        rho_c: f64,
        rho_inc: f64,
        tau_b: f64,
        tau_c: f64,
        step_size: f64,
    ) -> Self {
        let mut al = AugLagState::new(
            Vec2::new(target_barycenter.0, target_barycenter.1),
            target_volume,
        );
        al.rho_b = rho_b;
        al.rho_c = rho_c;
        al.rho_inc = rho_inc;
        al.tau_b = tau_b;
        al.tau_c = tau_c;
        al.step_size = step_size;
        PyAugLag { inner: al }
    }

    #[getter]
    fn lambda_c(&self) -> f64 {
        self.inner.lambda_c
    }

    #[getter]
    fn lambda_b(&self) -> (f64, f64) {
        (self.inner.lambda_b.x, self.inner.lambda_b.y)
    }

    #[getter]
    fn rho_b(&self) -> f64 {
        self.inner.rho_b
    }

    #[getter]
    fn rho_c(&self) -> f64 {
        self.inner.rho_c
    }
}

fn default_solver() -> SolverConfig {
    SolverConfig::default()
}

/// Solves the steady Navier-Stokes system.
#[pyfunction]
#[pyo3(signature = (mesh, fluid, warm_start = None, nonlinear_tol = 1e-10, max_picard = 40))]
fn solve_primal(
    mesh: &PyMesh,
    fluid: &PyFluid,
    warm_start: Option<&PyFlowState>,
    nonlinear_tol: f64,
    max_picard: usize,
) -> PyResult<PyFlowState> {
    let cfg = SolverConfig {
        nonlinear_tol,
        max_picard,
        ..default_solver()
    };
    let state = shapeopt::flow::solve_primal(
        &mesh.inner,
        &fluid.inner,
        &cfg,
        warm_start.map(|w| &w.inner),
    )
    .map_err(to_py)?;
    Ok(PyFlowState {
        inner: state,
        n_mesh_nodes: mesh.inner.node_count(),
    })
}

/// Force through the design boundary (boundary-traction integral).
#[pyfunction]
fn force(mesh: &PyMesh, state: &PyFlowState, fluid: &PyFluid) -> (f64, f64) {
    let dofs = Dofs::new(&mesh.inner);
    let f = shapeopt::flow::force(&mesh.inner, &dofs, &state.inner, &fluid.inner);
    (f.x, f.y)
}

/// Penalized objective and its decomposition.
#[pyfunction]
fn objective(
    py: Python<'_>,
    mesh: &PyMesh,
    state: &PyFlowState,
    fluid: &PyFluid,
    auglag: &PyAugLag,
) -> PyResult<(f64, Py<PyAny>)> {
    let dofs = Dofs::new(&mesh.inner);
    let (j, parts) =
        shapeopt::flow::objective(&mesh.inner, &dofs, &state.inner, &fluid.inner, &auglag.inner);
    let d = pyo3::types::PyDict::new(py);
    d.set_item("drag_term", parts.drag_term)?;
    d.set_item("barycenter_penalty", parts.barycenter_penalty)?;
    d.set_item("volume_penalty", parts.volume_penalty)?;
    d.set_item("force", (parts.force.x, parts.force.y))?;
    d.set_item("b", (parts.b.x, parts.b.y))?;
    d.set_item("c", parts.c)?;
    Ok((j, d.into_any().unbind()))
}

/// Solves the adjoint system on the frozen primal state.
#[pyfunction]
fn solve_adjoint(mesh: &PyMesh, primal: &PyFlowState, fluid: &PyFluid) -> PyResult<PyAdjointState> {
    let state = shapeopt::adjoint::solve_adjoint(
        &mesh.inner,
        &primal.inner,
        &fluid.inner,
        &default_solver(),
    )
    .map_err(to_py)?;
    Ok(PyAdjointState {
        inner: state,
        n_mesh_nodes: mesh.inner.node_count(),
    })
}

/// Boundary shape sensitivity from converged primal/adjoint states.
#[pyfunction]
fn shape_sensitivity(
    mesh: &PyMesh,
    primal: &PyFlowState,
    adjoint: &PyAdjointState,
    fluid: &PyFluid,
    auglag: &PyAugLag,
) -> PyResult<PySensitivity> {
    let dofs = Dofs::new(&mesh.inner);
    let gamma = shapeopt::sensitivity::shape_sensitivity(
        &mesh.inner,
        &dofs,
        &primal.inner,
        &adjoint.inner,
        &fluid.inner,
        &auglag.inner,
    )
    .map_err(to_py)?;
    Ok(PySensitivity { inner: gamma })
}

/// Directional shape derivative of the objective along a deformation field.
#[pyfunction]
fn shape_derivative(mesh: &PyMesh, gamma: &PySensitivity, u: Vec<(f64, f64)>) -> PyResult<f64> {
    let field = parse_field(&mesh.inner, u)?;
    shapeopt::sensitivity::shape_derivative(&mesh.inner, &gamma.inner, &field).map_err(to_py)
}

/// p-Laplace descent direction for the given sensitivity.
#[pyfunction]
#[pyo3(signature = (mesh, gamma, p, warm_start = None, eps_reg = 1e-10))]
fn solve_plaplace(
    mesh: &PyMesh,
    gamma: &PySensitivity,
    p: f64,
    warm_start: Option<&PyDeformation>,
    eps_reg: f64,
) -> PyResult<PyDeformation> {
    let mut cfg = PLaplaceConfig::with_exponent(p);
    cfg.eps_reg = eps_reg;
    let u = shapeopt::deform::solve_plaplace(
        &mesh.inner,
        &gamma.inner,
        &cfg,
        warm_start.map(|w| &w.inner),
    )
    .map_err(to_py)?;
    Ok(PyDeformation { inner: u })
}

/// Linear (p = 2) Laplace descent direction.
#[pyfunction]
fn solve_laplace(mesh: &PyMesh, gamma: &PySensitivity) -> PyResult<PyDeformation> {
    let u = shapeopt::deform::solve_laplace(&mesh.inner, &gamma.inner).map_err(to_py)?;
    Ok(PyDeformation { inner: u })
}

/// Discrete p-Laplace energy of a deformation field.
#[pyfunction]
#[pyo3(signature = (mesh, u, gamma, p, eps_reg = 0.0))]
fn plaplace_energy(
    mesh: &PyMesh,
    u: Vec<(f64, f64)>,
    gamma: &PySensitivity,
    p: f64,
    eps_reg: f64,
) -> PyResult<f64> {
    let field = parse_field(&mesh.inner, u)?;
    shapeopt::deform::plaplace_energy(&mesh.inner, &field, &gamma.inner, p, eps_reg).map_err(to_py)
}

/// One augmented-Lagrange multiplier/penalty update.
#[pyfunction]
fn update_multipliers(auglag: &PyAugLag, b: (f64, f64), c: f64) -> PyAugLag {
    PyAugLag {
        inner: shapeopt::optimizer::update_multipliers(&auglag.inner, Vec2::new(b.0, b.1), c),
    }
}

/// Full augmented-Lagrange optimization. Returns the final mesh, the history
/// rows as dicts, and the final multiplier state.
#[pyfunction]
#[pyo3(signature = (mesh, fluid, auglag, p = 4.0, max_total_steps = 100, out_dir = None))]
fn run_optimization(
    py: Python<'_>,
    mesh: &PyMesh,
    fluid: &PyFluid,
    auglag: &PyAugLag,
    p: f64,
    max_total_steps: usize,
    out_dir: Option<PathBuf>,
) -> PyResult<(PyMesh, Vec<Py<PyAny>>, PyAugLag)> {
    let cfgs = SolverConfigs {
        props: fluid.inner,
        flow: default_solver(),
        plaplace: PLaplaceConfig::with_exponent(p),
    };
    let mut cfg = OptimizerConfig::new(auglag.inner);
    cfg.max_total_steps = max_total_steps;
    let mut sink = out_dir.map(|dir| shapeopt::optimizer::OutputSink {
        out_dir: dir,
        checkpoint_every: 0,
    });
    if let Some(s) = &sink {
        std::fs::create_dir_all(&s.out_dir).map_err(|e| to_py(Error::Io(e)))?;
    }
    let (final_mesh, history, al) =
        shapeopt::optimizer::run_augmented_lagrange(mesh.inner.clone(), &cfg, &cfgs, sink.as_mut())
            .map_err(to_py)?;
    let mut rows = Vec::with_capacity(history.rows.len());
    for r in &history.rows {
        let d = pyo3::types::PyDict::new(py);
        d.set_item("step", r.step)?;
        d.set_item("j", r.j)?;
        d.set_item("j_over_j0", r.j_over_j0)?;
        d.set_item("drag", r.drag)?;
        d.set_item("b_norm", r.b_norm)?;
        d.set_item("c_abs", r.c_abs)?;
        d.set_item("gamma_inf", r.gamma_inf)?;
        d.set_item("energy", r.energy)?;
        d.set_item("max_aspect_ratio", r.max_aspect_ratio)?;
        d.set_item("min_angle", r.min_angle)?;
        d.set_item("tip_angle", r.tip_angle)?;
        d.set_item("half_axis_ratio", r.half_axis_ratio)?;
        rows.push(d.into_any().unbind());
    }
    Ok((
        PyMesh { inner: final_mesh },
        rows,
        PyAugLag { inner: al },
    ))
}

/// Gradient check against central finite differences at one design node.
#[pyfunction]
#[pyo3(signature = (mesh, fluid, node, h = 1e-6))]
fn check_gradient(
    py: Python<'_>,
    mesh: &PyMesh,
    fluid: &PyFluid,
    node: usize,
    h: f64,
) -> PyResult<Py<PyAny>> {
    let mut cfg = shapeopt::config::RunConfig::reference_case();
    cfg.props = fluid.inner;
    // Route the check through a temporary mesh file so the command sees the
    // caller's mesh exactly.
    let dir = std::env::temp_dir().join(format!("shapeopt-py-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| to_py(Error::Io(e)))?;
    let path = dir.join("mesh.txt");
    shapeopt::mesh::save_native(&mesh.inner, &path).map_err(to_py)?;
    cfg.mesh = shapeopt::config::MeshSource::File {
        path,
        format: MeshFormat::NativeText,
    };
    let rep = shapeopt::commands::cmd_check_gradient(&cfg, node, h).map_err(to_py)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("node", rep.node)?;
    d.set_item("jp_adjoint", rep.jp_adjoint)?;
    d.set_item("jp_fd", rep.jp_fd)?;
    d.set_item("rel_err", rep.rel_err)?;
    d.set_item("pass", rep.pass)?;
    Ok(d.into_any().unbind())
}

#[pymodule]
fn shapeopt_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMesh>()?;
    m.add_class::<PyFluid>()?;
    m.add_class::<PyFlowState>()?;
    m.add_class::<PyAdjointState>()?;
    m.add_class::<PySensitivity>()?;
    m.add_class::<PyDeformation>()?;
    m.add_class::<PyAugLag>()?;
    m.add_function(wrap_pyfunction!(solve_primal, m)?)?;
    m.add_function(wrap_pyfunction!(force, m)?)?;
    m.add_function(wrap_pyfunction!(objective, m)?)?;
    m.add_function(wrap_pyfunction!(solve_adjoint, m)?)?;
    m.add_function(wrap_pyfunction!(shape_sensitivity, m)?)?;
    m.add_function(wrap_pyfunction!(shape_derivative, m)?)?;
    m.add_function(wrap_pyfunction!(solve_plaplace, m)?)?;
    m.add_function(wrap_pyfunction!(solve_laplace, m)?)?;
    m.add_function(wrap_pyfunction!(plaplace_energy, m)?)?;
    m.add_function(wrap_pyfunction!(update_multipliers, m)?)?;
    m.add_function(wrap_pyfunction!(run_optimization, m)?)?;
    m.add_function(wrap_pyfunction!(check_gradient, m)?)?;
    Ok(())
}
