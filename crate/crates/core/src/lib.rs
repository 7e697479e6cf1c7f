//! One-pass streaming maximization of non-negative (possibly
//! non-monotone) submodular functions under cardinality and d-knapsack
//! constraints.
//!
//! The crate provides:
//! - threshold-sieve streaming algorithms in three knowledge regimes per
//!   constraint type ([`cardinality`], [`knapsack`]);
//! - unconstrained maximization used for post-pass refinement
//!   ([`unconstrained`]);
//! - concrete oracles with text file formats ([`oracles`]) and seeded
//!   instance generators ([`gen`]);
//! - a brute-force optimum and ratio checks for desk-scale verification
//!   ([`exact`], [`verify`]);
//! - a run harness with reproducible JSON reports ([`harness`]) behind
//!   the `sievestream` command-line tool.
//!
//! Every algorithm is deterministic for a fixed configuration: stream
//! order, tie-breaking, and randomized-solver seeds are all pinned, so
//! two runs of the same config agree byte for byte.

pub mod cardinality;
pub mod error;
pub mod exact;
pub mod gen;
pub mod grid;
pub mod harness;
pub mod knapsack;
pub mod model;
pub mod oracles;
pub mod unconstrained;
pub mod verify;

pub use error::{Error, Result};
pub use harness::{
    execute_run, execute_with, parse_oracle_spec, AlgorithmKind, OracleKind, OracleSpec,
    OrderKind, RunConfig, RunReport,
};
pub use model::{
    CandidateSet, Constraint, CostMatrix, ElementId, GroundElement, InstanceSnapshot,
    Instrumentation, MeteredOracle, SetFunction, SieveRun, Solution, StreamOrder,
};
