//! Loopy belief propagation on unrolled and clustered networks.

pub mod bethe;
pub mod messages;
pub mod network;
pub mod smoother;

pub use bethe::{belief_set, bethe_free_energy, BeliefSet};
pub use messages::{detect_fixed_point, send_lambda_message, send_pi_message, MessageStore};
pub use network::{build_clustered_graph, unrolled_network, BeliefNetwork, Coupling, NetNode};
pub use smoother::{
    fb_sweep, flooding_sweep, lbp_smoother, read_marginals, IterationRecord, LbpConfig, LbpOptions, LbpRun, LbpTrace,
    Schedule,
};
