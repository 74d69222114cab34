//! Smoothing engine for discrete dynamic Bayesian networks.
//!
//! Exact routes (flattened forwards-backwards, the frontier algorithm and a
//! brute-force enumeration oracle), the factored-frontier and Boyen-Koller
//! approximations, damped loopy belief propagation on unrolled and clustered
//! networks, plus L1 metrics and seeded experiment/timing harnesses.

pub mod approx;
pub mod elimination;
pub mod error;
pub mod exact;
pub mod factor;
pub mod lbp;
pub mod marginals;
pub mod metrics;
pub mod model;
pub mod rng;

pub use error::{Caps, DbnError, Result};
pub use marginals::{FactoredBelief, SmoothedMarginals};
