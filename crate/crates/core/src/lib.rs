//! Service function chain placement and routing on a substrate network,
//! solved by a Benders decomposition with connectivity and link-capacity
//! strengthening of the master problem.

// Range checks are written as `!(x > 0.0)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod benders;
pub mod experiment;
pub mod formulations;
pub mod instance;
pub mod lp;
pub mod milp;
pub mod oracle;
pub mod reachability;
pub mod solution;

pub use baselines::{
    solve_direct, solve_lp_dynamic_rounding, solve_lp_one_shot_rounding, BaselineOutcome,
    BaselineResult,
};
pub use benders::{
    gap_improvement, solve_cbd, write_trace_csv, CbdConfig, CbdError, CbdResult, CbdSolution,
    CbdStatus, GapReport, IterationRecord, TrStatus,
};
pub use experiment::{
    run_experiment, Algorithm, ExperimentConfig, ExperimentError, ExperimentOutput,
};
pub use formulations::{
    build_fp, build_ns, build_tr, connectivity_rows, materialize_cut, BendersCut, ConnectivityForm,
    FpVariant, Model, PlacementKey, RouteKey,
};
pub use instance::{
    generate, validate, Capacity, CloudNode, GeneratorConfig, Instance, Link, Network, Placement,
    Service, Stage,
};
pub use lp::{
    solve_lp, verify_certificate, FarkasCertificate, LinearProgram, LpConfig, LpOutcome, LpSolution,
};
pub use milp::{solve_milp, MilpConfig, MilpOutcome, MilpStatus, MixedBinaryProgram};
pub use oracle::{brute_force_ns, OracleResult};
pub use reachability::{analyze, UnreachableSets};
pub use solution::{verify, NsSolution, VerificationReport};
