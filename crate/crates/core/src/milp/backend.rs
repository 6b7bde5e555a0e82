use super::MilpModel;
use serde::{Deserialize, Serialize};
use std::time::Duration;

/// Environment variable naming the default backend.
pub const BACKEND_ENV: &str = "ORPOOL_SOLVER";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// Proven optimal within the configured relative gap.
    Optimal,
    /// Stopped early with an incumbent whose gap exceeds the target.
    FeasibleWithGap,
    Infeasible,
    /// Stopped early without any incumbent.
    TimeLimit,
}

impl SolveStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::FeasibleWithGap)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveLimits {
    pub rel_gap: f64,
    /// Wall-clock budget in seconds.
    pub time_limit: f64,
}

impl Default for SolveLimits {
    fn default() -> Self {
        Self {
            rel_gap: 1e-4,
            time_limit: 3600.0,
        }
    }
}

impl SolveLimits {
    pub fn duration(&self) -> Duration {
        Duration::from_secs_f64(self.time_limit.max(0.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub mip_gap_control: bool,
    pub time_limit: bool,
    pub warm_start: bool,
}

/// What a backend returns: a status, the column values of the incumbent and
/// the best proven bound.
#[derive(Clone, Debug, PartialEq)]
pub struct RawSolution {
    pub status: SolveStatus,
    pub values: Option<Vec<f64>>,
    pub objective: Option<f64>,
    pub bound: Option<f64>,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("solver backend {0:?} is not available (known: highs, microlp)")]
    BackendUnavailable(String),
    #[error("{backend} failed: {message}")]
    Backend { backend: &'static str, message: String },
    #[error("model is infeasible")]
    Infeasible,
    #[error("{0} stopped at its time limit without a feasible solution")]
    NoIncumbent(&'static str),
    #[error(transparent)]
    Build(#[from] super::build::BuildError),
}

/// A MILP solver. Implementations create a fresh solver session per call, so
/// one backend value may be shared between threads.
pub trait SolverBackend: Send + Sync {
    fn name(&self) -> &'static str;
    fn capabilities(&self) -> Capabilities;
    /// `warm_start` is a full column vector of a feasible point; backends
    /// without warm-start support ignore it.
    fn solve(&self, model: &MilpModel, limits: &SolveLimits, warm_start: Option<&[f64]>) -> Result<RawSolution, SolverError>;
}

pub fn backend_from_name(name: &str) -> Result<Box<dyn SolverBackend>, SolverError> {
    match name.trim().to_ascii_lowercase().as_str() {
        "highs" => Ok(Box::new(super::HighsBackend)),
        "microlp" => Ok(Box::new(super::MicrolpBackend)),
        other => Err(SolverError::BackendUnavailable(other.to_string())),
    }
}

/// Backend named by `ORPOOL_SOLVER`, HiGHS when unset.
pub fn backend_from_env() -> Result<Box<dyn SolverBackend>, SolverError> {
    match std::env::var(BACKEND_ENV) {
        Ok(name) if !name.trim().is_empty() => backend_from_name(&name),
        _ => backend_from_name("highs"),
    }
}
