//! Bounded-confidence opinion dynamics with heterogeneous confidence bounds and random pairwise
//! interactions, plus the controlled-interaction companion system used to bound its
//! convergence time.
//!
//! The simulation core is generic over the floating-point [`Scalar`] type; the aliases below
//! fix it to `f64`, which the Monte Carlo harness and the file formats use.

pub mod bounds;
pub mod cluster;
pub mod controller;
pub mod dynamics;
pub mod edges;
pub mod error;
pub mod experiments;
pub mod init;
pub mod interaction;
pub mod io;
pub mod merge;
pub mod scalar;
pub mod state;
pub mod verify;

pub use bounds::{compute_s_t, compute_tn, compute_tn_star, mse_envelope, tau_tail_bound, tn_floor, MergeBound};
pub use cluster::{detect_clusters, is_e1, subset_diameter, ClusterPartition};
pub use controller::{algorithm1_run, ControlRun, Controller, GeneratedCluster, StepTrace};
pub use dynamics::{neighbor_set, step};
pub use edges::EdgeSet;
pub use error::{Error, Result};
pub use experiments::{
    consensus_experiment, counterexample_init, isolation_check, mse_curve, run_experiment, run_trial, sphere_volume,
    tau_survival_curve, ExperimentConfig, InitialState, TrialRecord,
};
pub use interaction::{sample_edge_set, verify_lowbound_exhaustive, InteractionModel, SeededStream};
pub use merge::{merge_schedule, MergeOutcome, MergeTask, PhaseKind, PhaseRecord};
pub use scalar::Scalar;
pub use state::{ConfidenceProfile, SystemState};

pub type State = SystemState<f64>;
pub type Profile = ConfidenceProfile<f64>;
pub type Partition = ClusterPartition<f64>;
pub type State32 = SystemState<f32>;
pub type Profile32 = ConfidenceProfile<f32>;
