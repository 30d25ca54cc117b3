//! Drag-minimizing shape optimization of an obstacle in 2D channel flow.
//!
//! The toolkit morphs an unstructured triangle mesh along descent directions
//! obtained from a p-Laplacian relaxation of the steepest-descent problem in
//! the space of Lipschitz transformations. Sensitivities come from a
//! continuous adjoint of the steady incompressible Navier-Stokes equations;
//! barycenter and volume constraints are enforced with an augmented Lagrange
//! method.
//!
//! Modules follow the pipeline:
//! - [`mesh`]: the design variable — geometry, quality metrics, morphing, I/O
//! - [`flow`]: primal Navier-Stokes solve, force and objective evaluation
//! - [`adjoint`]: continuous-adjoint solve on the frozen primal state
//! - [`sensitivity`]: boundary shape sensitivity and shape derivatives
//! - [`deform`]: p-Laplacian descent directions with p-continuation
//! - [`optimizer`]: augmented Lagrange driver and the design-step loop
//! - [`config`] / [`commands`]: run configuration and the CLI entry points

pub mod adjoint;
pub mod commands;
pub mod config;
pub mod deform;
pub mod error;
pub mod fem;
pub mod flow;
pub mod geom;
pub mod mesh;
pub mod optimizer;
pub mod sensitivity;
mod util;

pub use error::{Error, Result};
pub use geom::Vec2;

pub(crate) use util::{fmt_e9, write_atomic};
