//! MILP backends and solution decoding.

mod builtin;
mod decode;
mod external;

use std::time::Duration;

pub use builtin::{BuiltinOptions, DEFAULT_MAX_BINARIES};
pub use decode::{decode_solution, DecodedRoute, DecodedSolution};
pub use external::SOLVER_ENV;

use crate::error::Result;
use crate::model::MilpModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Feasible,
    Infeasible,
    TimeLimit,
    Unknown,
}

impl SolveStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::Feasible)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    /// One value per model variable; empty without a solution.
    pub values: Vec<f64>,
    pub wall_time: Duration,
    pub nodes: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Backend {
    BuiltIn(BuiltinOptions),
    /// Shell command template with `{lp}`, `{sol}` and optional `{time_limit}`.
    External { command: String },
}

impl Default for Backend {
    fn default() -> Self {
        Backend::BuiltIn(BuiltinOptions::default())
    }
}

impl Backend {
    /// External backend from the environment if set, else the built-in one.
    pub fn from_env() -> Self {
        match std::env::var(SOLVER_ENV) {
            Ok(cmd) if !cmd.trim().is_empty() => Backend::External { command: cmd },
            _ => Backend::default(),
        }
    }
}

pub fn solve(model: &MilpModel, backend: &Backend, time_limit: Duration) -> Result<SolveResult> {
    model.lint()?;
    let res = match backend {
        Backend::BuiltIn(opts) => builtin::builtin_solve(model, *opts, time_limit)?,
        Backend::External { command } => external::external_solve(model, command, time_limit)?,
    };
    log::debug!(
        "{}: {:?} obj={:?} nodes={} in {:.3}s",
        model.name,
        res.status,
        res.objective,
        res.nodes,
        res.wall_time.as_secs_f64()
    );
    Ok(res)
}
