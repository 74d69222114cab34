//! Standard model builders: coupled HMMs, factorial HMMs and the water network.
//!
//! Every builder draws CPTs from [`rng::MODEL_STREAM`](crate::rng::MODEL_STREAM)
//! of the given seed. Nodes are visited in declaration order; a hidden node
//! draws its prior table then its transition table, an observed node draws a
//! single emission table shared by both roles. Each row is `child_arity`
//! independent uniforms on `[0, 1)` divided by their sum.

use rand::Rng;
use serde::Deserialize;

use super::{ConditionalTable, DiscreteDbn, NodeCpt, NodeSpec, ParentRef};
use crate::error::{DbnError, Result};
use crate::rng::{stream_rng, MODEL_STREAM};

const WATER_TOPOLOGY: &str = include_str!("../../assets/water_topology.json");

/// Coupled HMM: hidden chain `i` depends on chains `i-1, i, i+1` of the
/// previous slice and emits one private observation of arity `hidden_arity`.
pub fn build_chmm(num_chains: usize, hidden_arity: usize, seed: u64) -> Result<DiscreteDbn> {
    build_chmm_with_observation_arity(num_chains, hidden_arity, hidden_arity, seed)
}

pub fn build_chmm_with_observation_arity(
    num_chains: usize,
    hidden_arity: usize,
    observed_arity: usize,
    seed: u64,
) -> Result<DiscreteDbn> {
    check_chain_args(num_chains, hidden_arity)?;
    let inter = (0..num_chains)
        .flat_map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(num_chains - 1);
            (lo..=hi).map(move |p| (p, i))
        })
        .collect();
    chain_model(num_chains, hidden_arity, observed_arity, inter, seed)
}

/// Factorial HMM: independent chains, each with a private observation.
pub fn build_factorial_hmm(num_chains: usize, hidden_arity: usize, seed: u64) -> Result<DiscreteDbn> {
    check_chain_args(num_chains, hidden_arity)?;
    let inter = (0..num_chains).map(|i| (i, i)).collect();
    chain_model(num_chains, hidden_arity, hidden_arity, inter, seed)
}

/// A single hidden chain with one observation stream.
pub fn build_hmm(hidden_arity: usize, observed_arity: usize, seed: u64) -> Result<DiscreteDbn> {
    build_chmm_with_observation_arity(1, hidden_arity, observed_arity, seed)
}

fn check_chain_args(num_chains: usize, hidden_arity: usize) -> Result<()> {
    if num_chains == 0 {
        return Err(DbnError::InvalidConfig("number of chains must be at least 1".into()));
    }
    if hidden_arity < 2 {
        return Err(DbnError::InvalidConfig(format!("hidden arity must be at least 2, got {hidden_arity}")));
    }
    Ok(())
}

fn chain_model(
    num_chains: usize,
    hidden_arity: usize,
    observed_arity: usize,
    inter: Vec<(usize, usize)>,
    seed: u64,
) -> Result<DiscreteDbn> {
    if observed_arity < 2 {
        return Err(DbnError::InvalidConfig(format!("observation arity must be at least 2, got {observed_arity}")));
    }
    let mut nodes: Vec<NodeSpec> = (0..num_chains).map(|i| NodeSpec::hidden(format!("X{}", i + 1), hidden_arity)).collect();
    nodes.extend((0..num_chains).map(|i| NodeSpec::observed(format!("Y{}", i + 1), observed_arity)));
    let intra = (0..num_chains).map(|i| (i, num_chains + i)).collect();
    random_dbn(nodes, intra, inter, seed)
}

#[derive(Deserialize)]
struct WaterTopology {
    hidden: Vec<String>,
    observed: Vec<WaterObservation>,
    inter_edges: Vec<(String, String)>,
}

#[derive(Deserialize)]
struct WaterObservation {
    name: String,
    parent: String,
}

/// The 8-hidden-node water treatment network with binary nodes and seeded
/// random parameters. The edge list lives in `assets/water_topology.json`.
pub fn build_water_network(seed: u64) -> Result<DiscreteDbn> {
    build_water_network_truncated(seed, usize::MAX)
}

/// The water network restricted to its first `keep_hidden` hidden nodes, the
/// evidence leaves attached to them and the edges among them.
pub fn build_water_network_truncated(seed: u64, keep_hidden: usize) -> Result<DiscreteDbn> {
    let topo: WaterTopology = serde_json::from_str(WATER_TOPOLOGY)
        .map_err(|e| DbnError::InvalidModel(format!("water topology asset: {e}")))?;
    if keep_hidden == 0 {
        return Err(DbnError::InvalidConfig("must keep at least one hidden node".into()));
    }
    let hidden: Vec<&String> = topo.hidden.iter().take(keep_hidden).collect();
    let index_of = |name: &str| hidden.iter().position(|h| h.as_str() == name);

    let mut nodes: Vec<NodeSpec> = hidden.iter().map(|h| NodeSpec::hidden(h.as_str(), 2)).collect();
    let mut intra = Vec::new();
    for obs in &topo.observed {
        if let Some(p) = index_of(&obs.parent) {
            intra.push((p, nodes.len()));
            nodes.push(NodeSpec::observed(obs.name.as_str(), 2));
        }
    }
    let mut inter = Vec::new();
    for (p, c) in &topo.inter_edges {
        if let (Some(p), Some(c)) = (index_of(p), index_of(c)) {
            inter.push((p, c));
        }
    }
    random_dbn(nodes, intra, inter, seed)
}

/// Draws seeded random CPTs for a given structure. Transition parents are
/// ordered previous-slice parents first, then current-slice parents, each
/// ascending by node index.
pub fn random_dbn(
    nodes: Vec<NodeSpec>,
    intra: Vec<(usize, usize)>,
    inter: Vec<(usize, usize)>,
    seed: u64,
) -> Result<DiscreteDbn> {
    let mut rng = stream_rng(seed, MODEL_STREAM);
    let mut prior = Vec::with_capacity(nodes.len());
    let mut transition = Vec::with_capacity(nodes.len());
    for (i, node) in nodes.iter().enumerate() {
        let mut intra_parents: Vec<usize> = intra.iter().filter(|e| e.1 == i).map(|e| e.0).collect();
        intra_parents.sort_unstable();
        let mut inter_parents: Vec<usize> = inter.iter().filter(|e| e.1 == i).map(|e| e.0).collect();
        inter_parents.sort_unstable();

        let prior_parents: Vec<ParentRef> = intra_parents.iter().map(|&p| ParentRef::current(p)).collect();
        let trans_parents: Vec<ParentRef> = inter_parents
            .iter()
            .map(|&p| ParentRef::previous(p))
            .chain(intra_parents.iter().map(|&p| ParentRef::current(p)))
            .collect();
        let arities = |ps: &[ParentRef]| ps.iter().map(|p| nodes[p.node].arity).collect::<Vec<_>>();

        let prior_table = random_table(&mut rng, node.arity, arities(&prior_parents))?;
        let prior_cpt = NodeCpt { parents: prior_parents, table: prior_table };
        let trans_cpt = if node.is_hidden() || !inter_parents.is_empty() {
            let table = random_table(&mut rng, node.arity, arities(&trans_parents))?;
            NodeCpt { parents: trans_parents, table }
        } else {
            prior_cpt.clone()
        };
        prior.push(prior_cpt);
        transition.push(trans_cpt);
    }
    DiscreteDbn::new(nodes, intra, inter, prior, transition)
}

/// One table with rows of normalized uniforms.
pub fn random_table<R: Rng>(rng: &mut R, child_arity: usize, parent_arities: Vec<usize>) -> Result<ConditionalTable> {
    let configs: usize = parent_arities.iter().product();
    let weights: Vec<f64> = (0..configs * child_arity).map(|_| rng.gen::<f64>()).collect();
    ConditionalTable::from_weights(child_arity, parent_arities, weights)
}
