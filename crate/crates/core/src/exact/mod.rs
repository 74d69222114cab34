//! Exact smoothing: flattened forwards-backwards, the frontier algorithm and
//! brute-force enumeration.

pub mod brute;
pub mod flat;
pub mod frontier;

pub use brute::brute_force_joint;
pub use flat::{flat_smoother, flatten_to_hmm, forwards_backwards, hmm_forwards_backwards, FlatHmm, FlatPosterior};
pub use frontier::{
    choose_frontier_schedule, frontier_smoother, FrontierAction, FrontierRun, FrontierSchedule, FrontierState,
    FrontierStep, TraceStep,
};
