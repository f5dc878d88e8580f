use std::path::PathBuf;

use blowuplab_core::Error as CoreError;

/// Errors surfaced by the runner. Each maps to a stable process exit code.
#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),
    #[error("unknown suite `{0}` (expected kernels, jumps, bie, representation, fdm-properties or all)")]
    UnknownSuite(String),
    #[error("CFL violated: k = {k} > h^2/(2n) = {limit}")]
    Cfl { k: f64, limit: f64 },
    #[error("solver fault: {0}")]
    Solver(CoreError),
    #[error("{failed} verification check(s) failed")]
    Verification { failed: usize },
    #[error("no run records under {0}")]
    NoRecords(PathBuf),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl LabError {
    /// 0 ok, 1 I/O, 2 config or unknown suite, 3 CFL, 4 solver fault,
    /// 5 verification failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            LabError::Config(_) | LabError::UnknownSuite(_) | LabError::NoRecords(_) => 2,
            LabError::Cfl { .. } => 3,
            LabError::Solver(_) => 4,
            LabError::Verification { .. } => 5,
            LabError::Io { .. } | LabError::Json(_) | LabError::Csv(_) => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> LabError {
        let path = path.into();
        move |source| LabError::Io { path, source }
    }
}

impl From<CoreError> for LabError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Cfl { k, limit } => LabError::Cfl { k, limit },
            other => LabError::Solver(other),
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
