use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("solver failure: {0}")]
    Solver(String),

    /// A morph produced a non-positive cell; carries the worst cell so the
    /// caller can decide on a retry policy.
    #[error("morph inverted cell {cell} (signed area {area:.3e})")]
    MorphInversion { cell: usize, area: f64 },

    #[error("mesh-quality failure: {0}")]
    MeshQuality(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 config, 3 solver, 4 mesh quality.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Parse { .. } => 2,
            Error::Solver(_) => 3,
            Error::MorphInversion { .. } | Error::MeshQuality(_) => 4,
            _ => 1,
        }
    }
}
