use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes shared across the solver modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("state outside invariant domain: {0}")]
    InvariantDomain(String),

    #[error("linearization failed: {0}")]
    Linearization(String),

    #[error("time-step restriction violated: {0}")]
    TimeStep(String),

    #[error("conservation defect at node {node}: |defect| = {defect:.3e}")]
    Conservation { node: usize, defect: f64 },

    #[error("incompatible residual set: sum defect {defect:.3e} exceeds tolerance")]
    Incompatible { defect: f64 },

    #[error("nodal solver failed at node {node}: {reason}")]
    NodalSolver { node: usize, reason: String },

    #[error("graph is disconnected: components {0:?}")]
    Disconnected(Vec<Vec<usize>>),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("mesh format error: {0}")]
    MeshFormat(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
