//! Directed networks for message passing: the unrolled DBN and its clustered variants.

use crate::approx::ClusterSpec;
use crate::error::{Caps, DbnError, Result};
use crate::model::{decode_mixed_radix, CptRole, DiscreteDbn, EvidenceSequence, Lag};

/// How cluster nodes of consecutive slices are connected.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coupling {
    /// Each cluster's parents are the previous-slice clusters owning its
    /// members' parents; the CPT is the product of member CPTs.
    Direct,
    /// A mega node per slice holds the exact joint update from all
    /// previous-slice clusters plus all of the slice's evidence; each cluster
    /// is a deterministic projection of it.
    MegaNode,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetNode {
    pub label: String,
    pub slice: usize,
    pub arity: usize,
    pub parents: Vec<usize>,
    /// Index into [`BeliefNetwork::tables`], laid out `config * arity + state`.
    pub table: usize,
    /// Hidden nodes represented (by node index), mixed radix first-most-significant.
    pub members: Vec<usize>,
    pub member_arities: Vec<usize>,
    pub carries_evidence: bool,
    pub evidence: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BeliefNetwork {
    nodes: Vec<NetNode>,
    tables: Vec<Vec<f64>>,
    /// `(parent, child)`
    edges: Vec<(usize, usize)>,
    parent_edges: Vec<Vec<usize>>,
    child_edges: Vec<Vec<usize>>,
    horizon: usize,
    hidden_arities: Vec<usize>,
    /// `readout[t - 1][ordinal] = (net node, member position)`
    readout: Vec<Vec<(usize, usize)>>,
}

impl BeliefNetwork {
    fn empty(dbn: &DiscreteDbn, horizon: usize) -> Self {
        BeliefNetwork {
            nodes: Vec::new(),
            tables: Vec::new(),
            edges: Vec::new(),
            parent_edges: Vec::new(),
            child_edges: Vec::new(),
            horizon,
            hidden_arities: dbn.hidden_arities(),
            readout: vec![vec![(usize::MAX, 0); dbn.num_hidden()]; horizon],
        }
    }

    fn push_table(&mut self, table: Vec<f64>) -> usize {
        self.tables.push(table);
        self.tables.len() - 1
    }

    fn push_node(&mut self, node: NetNode) -> usize {
        let id = self.nodes.len();
        assert!(node.parents.iter().all(|&p| p < id), "parents precede children");
        let mut pe = Vec::with_capacity(node.parents.len());
        for &p in &node.parents {
            self.edges.push((p, id));
            let e = self.edges.len() - 1;
            self.child_edges[p].push(e);
            pe.push(e);
        }
        self.parent_edges.push(pe);
        self.child_edges.push(Vec::new());
        self.nodes.push(node);
        id
    }

    pub fn nodes(&self) -> &[NetNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &NetNode {
        &self.nodes[id]
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn parent_edges(&self, id: usize) -> &[usize] {
        &self.parent_edges[id]
    }

    pub fn child_edges(&self, id: usize) -> &[usize] {
        &self.child_edges[id]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn hidden_arities(&self) -> &[usize] {
        &self.hidden_arities
    }

    pub fn table(&self, id: usize) -> &[f64] {
        &self.tables[self.nodes[id].table]
    }

    pub fn parent_arities(&self, id: usize) -> Vec<usize> {
        self.nodes[id].parents.iter().map(|&p| self.nodes[p].arity).collect()
    }

    pub fn readout(&self, t: usize, ordinal: usize) -> (usize, usize) {
        self.readout[t - 1][ordinal]
    }

    /// Node ids in topological order (construction order).
    pub fn order(&self) -> std::ops::Range<usize> {
        0..self.nodes.len()
    }

    /// Recomputes every node's local evidence from `evidence`. Each
    /// observation goes to the evidence-carrying node of its slice whose
    /// members include all of the observation's parents.
    pub fn set_evidence(&mut self, dbn: &DiscreteDbn, evidence: &EvidenceSequence) -> Result<()> {
        evidence.check_compatible(dbn)?;
        if evidence.horizon() != self.horizon {
            return Err(DbnError::InvalidEvidence(format!(
                "evidence horizon {} does not match network horizon {}",
                evidence.horizon(),
                self.horizon
            )));
        }
        for node in &mut self.nodes {
            node.evidence.iter_mut().for_each(|e| *e = 1.0);
        }
        let mut slice_nodes: Vec<Vec<usize>> = vec![Vec::new(); self.horizon + 1];
        for (id, node) in self.nodes.iter().enumerate() {
            if node.carries_evidence {
                slice_nodes[node.slice].push(id);
            }
        }
        let mut values = vec![0usize; dbn.num_nodes()];
        let mut decoded = Vec::new();
        let mut parent_values = Vec::new();
        for (t, o, y) in evidence.observations() {
            let cpt = dbn.cpt(o, CptRole::for_slice(t));
            let carrier = slice_nodes[t]
                .iter()
                .copied()
                .find(|&id| cpt.parents.iter().all(|p| self.nodes[id].members.contains(&p.node)))
                .ok_or_else(|| {
                    DbnError::NotRegular(format!(
                        "observation {} has parents in more than one cluster",
                        dbn.node(o).name
                    ))
                })?;
            let node = &mut self.nodes[carrier];
            decoded.resize(node.members.len(), 0);
            for state in 0..node.arity {
                decode_mixed_radix(state, &node.member_arities, &mut decoded);
                for (&m, &v) in node.members.iter().zip(&decoded) {
                    values[m] = v;
                }
                parent_values.clear();
                parent_values.extend(cpt.parents.iter().map(|p| values[p.node]));
                node.evidence[state] *= cpt.table.prob(y, cpt.table.config_index(&parent_values));
            }
        }
        Ok(())
    }
}

/// Writes cluster `members`' values for joint `state` into `out[node]`.
fn spread(dbn: &DiscreteDbn, members: &[usize], state: usize, scratch: &mut Vec<usize>, out: &mut [usize]) {
    let arities: Vec<usize> = members.iter().map(|&m| dbn.arity(m)).collect();
    scratch.resize(members.len(), 0);
    decode_mixed_radix(state, &arities, scratch);
    for (&m, &v) in members.iter().zip(scratch.iter()) {
        out[m] = v;
    }
}

/// `Π_i P(cur_i | parents)` over `members`, reading parent values from `prev` / `cur`.
fn members_prob(dbn: &DiscreteDbn, members: &[usize], role: CptRole, prev: &[usize], cur: &[usize], pv: &mut Vec<usize>) -> f64 {
    members.iter().fold(1.0, |acc, &i| {
        let cpt = dbn.cpt(i, role);
        pv.clear();
        pv.extend(cpt.parents.iter().map(|p| match p.lag {
            Lag::Previous => prev[p.node],
            Lag::Current => cur[p.node],
        }));
        acc * cpt.table.prob(cur[i], cpt.table.config_index(pv))
    })
}

fn normalize_rows(table: &mut [f64], arity: usize) {
    for row in table.chunks_mut(arity) {
        let z: f64 = row.iter().sum();
        if z > 0.0 {
            row.iter_mut().for_each(|v| *v /= z);
        }
    }
}

fn check_table(size: u128, what: impl FnOnce() -> String, caps: &Caps) -> Result<()> {
    if size > caps.elimination_factor as u128 {
        return Err(DbnError::CapExceeded { what: what(), size, cap: caps.elimination_factor as u128 });
    }
    Ok(())
}

/// Builds the clustered network over `horizon` slices. Per-node clusters with
/// [`Coupling::Direct`] reproduce the unrolled DBN (observations folded into
/// their parents as local evidence).
pub fn build_clustered_graph(
    dbn: &DiscreteDbn,
    horizon: usize,
    clusters: &ClusterSpec,
    coupling: Coupling,
    caps: &Caps,
) -> Result<BeliefNetwork> {
    dbn.require_regular()?;
    dbn.require_leaf_observations()?;
    if horizon == 0 {
        return Err(DbnError::InvalidConfig("horizon must be at least 1".into()));
    }
    let n = dbn.num_nodes();
    let mut net = BeliefNetwork::empty(dbn, horizon);
    let mut prev = vec![0usize; n];
    let mut cur = vec![0usize; n];
    let mut scratch = Vec::new();
    let mut pv = Vec::new();
    let sizes: Vec<usize> = (0..clusters.len()).map(|c| clusters.size(dbn, c)).collect();
    let label = |c: usize| -> String {
        clusters.clusters()[c].iter().map(|&i| dbn.node(i).name.as_str()).collect::<Vec<_>>().join("+")
    };

    match coupling {
        Coupling::Direct => {
            // parent clusters of each cluster, ascending
            let parent_clusters: Vec<Vec<usize>> = clusters
                .clusters()
                .iter()
                .map(|members| {
                    let mut ps: Vec<usize> = members
                        .iter()
                        .flat_map(|&i| dbn.inter_parents(i).collect::<Vec<_>>())
                        .map(|p| clusters.owner(p).expect("covered"))
                        .collect();
                    ps.sort_unstable();
                    ps.dedup();
                    ps
                })
                .collect();
            let mut prior_tables = Vec::with_capacity(clusters.len());
            let mut trans_tables = Vec::with_capacity(clusters.len());
            for (c, members) in clusters.clusters().iter().enumerate() {
                let size = sizes[c];
                let mut prior = vec![0.0; size];
                for (x, p) in prior.iter_mut().enumerate() {
                    spread(dbn, members, x, &mut scratch, &mut cur);
                    *p = members_prob(dbn, members, CptRole::Prior, &prev, &cur, &mut pv);
                }
                normalize_rows(&mut prior, size);
                prior_tables.push(net.push_table(prior));
                if horizon == 1 {
                    continue;
                }
                let parent_sizes: Vec<usize> = parent_clusters[c].iter().map(|&k| sizes[k]).collect();
                let configs: u128 = parent_sizes.iter().map(|&s| s as u128).product();
                check_table(configs * size as u128, || format!("transition table of cluster {{{}}}", label(c)), caps)?;
                let configs = configs as usize;
                let mut table = vec![0.0; configs * size];
                let mut digits = vec![0usize; parent_sizes.len()];
                for config in 0..configs {
                    decode_mixed_radix(config, &parent_sizes, &mut digits);
                    for (&k, &s) in parent_clusters[c].iter().zip(&digits) {
                        spread(dbn, &clusters.clusters()[k], s, &mut scratch, &mut prev);
                    }
                    for x in 0..size {
                        spread(dbn, members, x, &mut scratch, &mut cur);
                        table[config * size + x] = members_prob(dbn, members, CptRole::Transition, &prev, &cur, &mut pv);
                    }
                }
                normalize_rows(&mut table, size);
                trans_tables.push(net.push_table(table));
            }
            let mut previous_ids: Vec<usize> = Vec::new();
            for t in 1..=horizon {
                let mut ids = Vec::with_capacity(clusters.len());
                for (c, members) in clusters.clusters().iter().enumerate() {
                    let (parents, table) = if t == 1 {
                        (Vec::new(), prior_tables[c])
                    } else {
                        (parent_clusters[c].iter().map(|&k| previous_ids[k]).collect(), trans_tables[c])
                    };
                    let id = net.push_node(NetNode {
                        label: format!("{}[{t}]", label(c)),
                        slice: t,
                        arity: sizes[c],
                        parents,
                        table,
                        members: members.clone(),
                        member_arities: clusters.arities(dbn, c),
                        carries_evidence: true,
                        evidence: vec![1.0; sizes[c]],
                    });
                    for (pos, &m) in members.iter().enumerate() {
                        net.readout[t - 1][dbn.hidden_ordinal(m).unwrap()] = (id, pos);
                    }
                    ids.push(id);
                }
                previous_ids = ids;
            }
        }
        Coupling::MegaNode => {
            let hidden = dbn.hidden().to_vec();
            let s: u128 = dbn.hidden_arities().iter().map(|&a| a as u128).product();
            if s > caps.cluster_states as u128 {
                return Err(DbnError::CapExceeded { what: "mega node state space".into(), size: s, cap: caps.cluster_states as u128 });
            }
            check_table(s * s, || "mega node transition table".into(), caps)?;
            let s = s as usize;
            let mut prior = vec![0.0; s];
            for (x, p) in prior.iter_mut().enumerate() {
                spread(dbn, &hidden, x, &mut scratch, &mut cur);
                *p = members_prob(dbn, &hidden, CptRole::Prior, &prev, &cur, &mut pv);
            }
            normalize_rows(&mut prior, s);
            let prior_table = net.push_table(prior);
            let trans_table = if horizon > 1 {
                let mut digits = vec![0usize; clusters.len()];
                let mut table = vec![0.0; s * s];
                for config in 0..s {
                    decode_mixed_radix(config, &sizes, &mut digits);
                    for (k, &d) in digits.iter().enumerate() {
                        spread(dbn, &clusters.clusters()[k], d, &mut scratch, &mut prev);
                    }
                    for x in 0..s {
                        spread(dbn, &hidden, x, &mut scratch, &mut cur);
                        table[config * s + x] = members_prob(dbn, &hidden, CptRole::Transition, &prev, &cur, &mut pv);
                    }
                }
                normalize_rows(&mut table, s);
                Some(net.push_table(table))
            } else {
                None
            };
            let projections: Vec<usize> = clusters
                .clusters()
                .iter()
                .enumerate()
                .map(|(c, members)| {
                    let mut table = vec![0.0; s * sizes[c]];
                    let member_arities = clusters.arities(dbn, c);
                    for m in 0..s {
                        spread(dbn, &hidden, m, &mut scratch, &mut cur);
                        let values: Vec<usize> = members.iter().map(|&i| cur[i]).collect();
                        let x = crate::model::mixed_radix_index(&values, &member_arities);
                        table[m * sizes[c] + x] = 1.0;
                    }
                    net.push_table(table)
                })
                .collect();
            let mut previous_ids: Vec<usize> = Vec::new();
            for t in 1..=horizon {
                let mega = net.push_node(NetNode {
                    label: format!("M[{t}]"),
                    slice: t,
                    arity: s,
                    parents: previous_ids.clone(),
                    table: if t == 1 { prior_table } else { trans_table.unwrap() },
                    members: hidden.clone(),
                    member_arities: dbn.hidden_arities(),
                    carries_evidence: true,
                    evidence: vec![1.0; s],
                });
                let mut ids = Vec::with_capacity(clusters.len());
                for (c, members) in clusters.clusters().iter().enumerate() {
                    let id = net.push_node(NetNode {
                        label: format!("{}[{t}]", label(c)),
                        slice: t,
                        arity: sizes[c],
                        parents: vec![mega],
                        table: projections[c],
                        members: members.clone(),
                        member_arities: clusters.arities(dbn, c),
                        carries_evidence: false,
                        evidence: vec![1.0; sizes[c]],
                    });
                    for (pos, &m) in members.iter().enumerate() {
                        net.readout[t - 1][dbn.hidden_ordinal(m).unwrap()] = (id, pos);
                    }
                    ids.push(id);
                }
                previous_ids = ids;
            }
        }
    }
    Ok(net)
}

/// The unrolled DBN as a belief network with evidence attached.
pub fn unrolled_network(dbn: &DiscreteDbn, evidence: &EvidenceSequence, caps: &Caps) -> Result<BeliefNetwork> {
    let mut net = build_clustered_graph(dbn, evidence.horizon(), &ClusterSpec::per_node(dbn), Coupling::Direct, caps)?;
    net.set_evidence(dbn, evidence)?;
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_chmm, unroll};
    use std::collections::BTreeSet;

    #[test]
    fn per_node_clusters_match_unrolled_hidden_graph() {
        let dbn = build_chmm(3, 2, 5).unwrap();
        let caps = Caps::default();
        let net = build_clustered_graph(&dbn, 4, &ClusterSpec::per_node(&dbn), Coupling::Direct, &caps).unwrap();
        let un = unroll(&dbn, 4).unwrap();
        let hidden_edges: BTreeSet<(usize, usize, usize, usize)> = un
            .edges()
            .into_iter()
            .filter(|&(a, b)| dbn.node(un.nodes()[a].index).is_hidden() && dbn.node(un.nodes()[b].index).is_hidden())
            .map(|(a, b)| (un.nodes()[a].slice, un.nodes()[a].index, un.nodes()[b].slice, un.nodes()[b].index))
            .collect();
        let net_edges: BTreeSet<(usize, usize, usize, usize)> = net
            .edges()
            .iter()
            .map(|&(a, b)| (net.node(a).slice, net.node(a).members[0], net.node(b).slice, net.node(b).members[0]))
            .collect();
        assert_eq!(hidden_edges, net_edges);
        for id in net.order() {
            let node = net.node(id);
            let cpt = dbn.cpt(node.members[0], CptRole::for_slice(node.slice));
            for (a, b) in net.table(id).iter().zip(cpt.table.values()) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn whole_slice_cluster_is_a_chain_of_mega_nodes() {
        let dbn = build_chmm(2, 2, 5).unwrap();
        let caps = Caps::default();
        let net = build_clustered_graph(&dbn, 3, &ClusterSpec::whole_slice(&dbn, &caps).unwrap(), Coupling::Direct, &caps).unwrap();
        assert_eq!(net.num_nodes(), 3);
        assert!(net.nodes().iter().all(|n| n.arity == 4));
        assert_eq!(net.edges(), &[(0, 1), (1, 2)]);
        for row in net.table(1).chunks(4) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn mega_node_graph_shape() {
        let dbn = build_chmm(2, 2, 5).unwrap();
        let net = build_clustered_graph(&dbn, 3, &ClusterSpec::per_node(&dbn), Coupling::MegaNode, &Caps::default()).unwrap();
        // per slice: M_t plus two cluster nodes
        assert_eq!(net.num_nodes(), 9);
        assert_eq!(net.node(3).parents, vec![1, 2]);
        assert_eq!(net.node(4).parents, vec![3]);
        assert_eq!(net.readout(2, 1), (5, 0));
    }
}
