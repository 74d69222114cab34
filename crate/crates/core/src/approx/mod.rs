//! Factored-frontier and Boyen-Koller smoothers.

pub mod bk;
pub mod clusters;
pub mod ff;
pub mod trajectory;

pub use bk::{bk_smoother, bk_trajectory, iterated_bk, project_to_clusters};
pub use clusters::ClusterSpec;
pub use ff::{ff_smoother, ff_trajectory};
pub use trajectory::ApproxBeliefTrajectory;
