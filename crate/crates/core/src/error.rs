use thiserror::Error;

use crate::exprlang::ExprError;
use crate::funcspace::FuncSpaceError;
use crate::geometry::GeometryError;
use crate::manufactured::ManufacturedError;
use crate::relaxation::RelaxationError;
use crate::solver::SolverError;
use crate::verify::VerifyError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("expression error: {0}")]
    Expr(#[from] ExprError),
    #[error("{kind}: {0}", kind = .0.kind())]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    FuncSpace(#[from] FuncSpaceError),
    #[error(transparent)]
    Relaxation(#[from] RelaxationError),
    #[error(transparent)]
    Manufactured(#[from] ManufacturedError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Json(_) | Error::Config(_) | Error::Expr(_) => 1,
            Error::Geometry(_) | Error::Relaxation(_) | Error::Manufactured(_) | Error::FuncSpace(_) => 2,
            Error::Solver(SolverError::IncompatibleRhs { .. }) => 3,
            Error::Solver(SolverError::Eval { .. } | SolverError::ComponentCount { .. }) => 1,
            Error::Solver(SolverError::Relaxation(_)) => 2,
            Error::Solver(_) => 4,
            Error::Verify(_) => 5,
        }
    }
}
