use super::{topological_order, CptRole, DiscreteDbn, Lag, NodeCpt};
use crate::error::{DbnError, Result};

/// One node of the unrolled network; `slice` is 1-based.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnrolledNode {
    pub slice: usize,
    pub index: usize,
    pub role: CptRole,
    /// Unrolled ids of the parents, in CPT parent order.
    pub parents: Vec<usize>,
}

/// Static directed network over `T * num_nodes` nodes; node `(t, i)` has id
/// `(t - 1) * num_nodes + i`.
#[derive(Clone, Debug)]
pub struct UnrolledNetwork<'a> {
    dbn: &'a DiscreteDbn,
    horizon: usize,
    nodes: Vec<UnrolledNode>,
}

pub fn unroll(dbn: &DiscreteDbn, horizon: usize) -> Result<UnrolledNetwork<'_>> {
    if horizon == 0 {
        return Err(DbnError::InvalidConfig("horizon must be at least 1".into()));
    }
    let n = dbn.num_nodes();
    let mut nodes = Vec::with_capacity(horizon * n);
    for t in 1..=horizon {
        let role = CptRole::for_slice(t);
        for i in 0..n {
            let parents = dbn
                .cpt(i, role)
                .parents
                .iter()
                .map(|p| match p.lag {
                    Lag::Current => (t - 1) * n + p.node,
                    Lag::Previous => (t - 2) * n + p.node,
                })
                .collect();
            nodes.push(UnrolledNode { slice: t, index: i, role, parents });
        }
    }
    Ok(UnrolledNetwork { dbn, horizon, nodes })
}

impl<'a> UnrolledNetwork<'a> {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn nodes(&self) -> &[UnrolledNode] {
        &self.nodes
    }

    pub fn id(&self, t: usize, index: usize) -> usize {
        (t - 1) * self.dbn.num_nodes() + index
    }

    pub fn cpt(&self, id: usize) -> &'a NodeCpt {
        let node = &self.nodes[id];
        self.dbn.cpt(node.index, node.role)
    }

    /// All `(parent id, child id)` edges.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.nodes
            .iter()
            .enumerate()
            .flat_map(|(c, node)| node.parents.iter().map(move |&p| (p, c)))
            .collect()
    }

    pub fn topological_order(&self) -> Option<Vec<usize>> {
        topological_order(self.nodes.len(), &self.edges())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_chmm, build_water_network};

    #[test]
    fn hmm_unrolls_to_a_chain() {
        let dbn = build_chmm(1, 2, 0).unwrap();
        let net = unroll(&dbn, 3).unwrap();
        let mut edges = net.edges();
        edges.sort_unstable();
        // X ids 0, 2, 4; Y ids 1, 3, 5
        assert_eq!(edges, vec![(0, 1), (0, 2), (2, 3), (2, 4), (4, 5)]);
    }

    #[test]
    fn two_chain_counts() {
        let dbn = build_chmm(2, 2, 0).unwrap();
        let net = unroll(&dbn, 2).unwrap();
        assert_eq!(net.nodes().len(), 8);
        let hidden_edges = net
            .edges()
            .into_iter()
            .filter(|&(p, c)| dbn.node(net.nodes()[p].index).is_hidden() && dbn.node(net.nodes()[c].index).is_hidden())
            .count();
        assert_eq!(hidden_edges, 4);
    }

    #[test]
    fn single_slice_uses_prior_tables() {
        let dbn = build_water_network(2).unwrap();
        let net = unroll(&dbn, 1).unwrap();
        assert!(net.nodes().iter().all(|n| n.role == CptRole::Prior));
        assert!(net.edges().iter().all(|&(p, c)| net.nodes()[p].slice == net.nodes()[c].slice));
    }

    #[test]
    fn zero_horizon_rejected() {
        assert!(unroll(&build_chmm(1, 2, 0).unwrap(), 0).is_err());
    }

    #[test]
    fn unrolled_graphs_are_acyclic() {
        for n in 1..5 {
            let dbn = build_chmm(n, 2, n as u64).unwrap();
            for t in 1..5 {
                assert!(unroll(&dbn, t).unwrap().topological_order().is_some());
            }
        }
    }
}
