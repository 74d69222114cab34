//! Error metrics, oscillation detection and experiment harnesses.

pub mod experiment;
pub mod l1;
pub mod oscillation;
pub mod timing;

pub use experiment::{
    exact_reference, run_algorithm, run_error_experiment, write_error_csv, AlgorithmSpec, ErrorCell, ErrorExperiment, ErrorRow,
    ModelSpec,
};
pub use l1::{l1_error, L1Report};
pub use oscillation::oscillation_detector;
pub use timing::{linear_fit, run_timing_experiment, LinearFit, TimingConfig, TimingRecord, TimingReport};
