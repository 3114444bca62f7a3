use thiserror::Error;

use crate::roadnet::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("node {dst} is unreachable from node {src}")]
    Unreachable { src: NodeId, dst: NodeId },
    #[error("required node {0} cannot be reached from the depot")]
    InfeasibleStsp(NodeId),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing section {0}")]
    MissingSection(String),
    #[error("nodes {0} and {1} share the same coordinates")]
    DuplicateCoordinates(usize, usize),
    #[error("infeasible instance: {0}")]
    InfeasibleInstance(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("required nodes {0} and {1} are not connected")]
    Disconnected(NodeId, NodeId),
    #[error("LP names collide after sanitizing: {0}")]
    NameCollision(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("solver backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("solver crashed: {message}\n{output}")]
    SolverCrash { message: String, output: String },
    #[error("model too large for the built-in solver: {binaries} binaries (limit {limit})")]
    ModelTooLarge { binaries: usize, limit: usize },
    #[error("cannot decode solution: {0}")]
    Decode(String),
    #[error("fleet exhausted: {needed} routes needed, {available} vehicles available")]
    FleetExhausted { needed: usize, available: usize },
    #[error("instance deemed infeasible: {0}")]
    Infeasible(String),
    #[error("solution failed validation: {0}")]
    ValidationFailed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
