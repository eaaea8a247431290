use thiserror::Error;

pub type Result<T> = std::result::Result<T, SolverError>;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("constraint set provably infeasible: {0}")]
    Infeasible(String),
    #[error("layout repair failed after {attempts} resampling attempts")]
    RepairFailed { attempts: usize },
    #[error("narrowest gap {gap:.4e} m under-resolved: needs >= {need:.4e} m (3 cells)")]
    GapUnderResolved { gap: f64, need: f64 },
    #[error("temperature solve requires a converged flow solution")]
    FlowNotConverged,
    #[error("linear solver stalled at relative residual {residual:.3e}")]
    LinearSolveStalled { residual: f64 },
    #[error("negative time span {0}")]
    NegativeTimeSpan(f64),
    #[error("invalid argument: {0}")]
    InvalidArg(String),
    #[error(transparent)]
    Data(#[from] cht_data::DataError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
