use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("agent index {index} out of range for {n} agents")]
    AgentOutOfRange { index: usize, n: usize },

    #[error("agent count mismatch: expected {expected}, got {got}")]
    AgentCountMismatch { expected: usize, got: usize },

    #[error("opinion dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("a state needs at least one agent and dimension at least 1")]
    EmptyState,

    #[error("opinion coordinate of agent {agent} is not finite")]
    NonFiniteOpinion { agent: usize },

    #[error("confidence bounds must be positive and finite (bound {index} = {value})")]
    NonPositiveBound { index: usize, value: f64 },

    #[error("confidence bounds must be nonincreasing (bound {index} = {value} exceeds its predecessor {previous})")]
    UnsortedBounds { index: usize, value: f64, previous: f64 },

    #[error("agent subset must not be empty")]
    EmptySubset,

    #[error("cluster relation is not transitive at tolerance {eps}: agents {a} and {c} are linked through {b} but lie {distance} apart")]
    NonTransitiveClusters { a: usize, b: usize, c: usize, eps: f64, distance: f64 },

    #[error("{what} must lie strictly between 0 and 1, got {value}")]
    InvalidProbability { what: String, value: f64 },

    #[error("exhaustive enumeration over {pairs} ordered pairs is infeasible (limit {limit})")]
    EnumerationTooLarge { pairs: usize, limit: usize },

    #[error("domain violation: {0}")]
    Domain(String),

    #[error("clusters are not connected: distance {distance} exceeds largest bound {max_bound}")]
    NotConnected { distance: f64, max_bound: f64 },

    #[error("merge construction failed: {0}")]
    ConstructionFailed(String),

    #[error("control loop exceeded its safety cap of {cap} steps")]
    SafetyCapExceeded { cap: u64 },

    #[error("trial {trial}: absorbed state moved during post-absorption step {step}")]
    AbsorptionViolated { trial: u64, step: u64 },

    #[error("{0}")]
    InvalidRecords(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },

    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}
