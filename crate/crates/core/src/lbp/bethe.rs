//! Node and family beliefs and the Bethe free energy.

use super::messages::{node_lambda, MessageStore};
use super::network::BeliefNetwork;
use super::smoother::node_beliefs;
use crate::marginals::normalize;
use crate::model::decode_mixed_radix;

/// Beliefs over every network node and every family (node with its parents).
/// Family tables share the CPT layout: `config * arity + state`.
#[derive(Clone, Debug, PartialEq)]
pub struct BeliefSet {
    pub node: Vec<Vec<f64>>,
    pub family: Vec<Vec<f64>>,
}

impl BeliefSet {
    /// Largest gap between a family belief's child marginal and the node belief.
    pub fn max_inconsistency(&self, net: &BeliefNetwork) -> f64 {
        let mut worst: f64 = 0.0;
        for x in net.order() {
            let arity = net.node(x).arity;
            let mut m = vec![0.0; arity];
            for row in self.family[x].chunks(arity) {
                for (a, b) in m.iter_mut().zip(row) {
                    *a += b;
                }
            }
            for (a, b) in m.iter().zip(&self.node[x]) {
                worst = worst.max((a - b).abs());
            }
        }
        worst
    }
}

/// `b(x, u) ∝ P(x | u) λ_X(x) Π_k π_{U_k→X}(u_k)`.
pub fn belief_set(net: &BeliefNetwork, store: &MessageStore) -> BeliefSet {
    let node = node_beliefs(net, store);
    let mut digits = Vec::new();
    let family = net
        .order()
        .map(|x| {
            let arity = net.node(x).arity;
            let lambda = node_lambda(net, store, x);
            let pe = net.parent_edges(x);
            let parent_arities = net.parent_arities(x);
            digits.resize(pe.len(), 0);
            let mut b: Vec<f64> = net.table(x).to_vec();
            for (config, row) in b.chunks_mut(arity).enumerate() {
                decode_mixed_radix(config, &parent_arities, &mut digits);
                let w: f64 = pe.iter().zip(&digits).map(|(&e, &d)| store.pi[e][d]).product();
                for (v, l) in row.iter_mut().zip(&lambda) {
                    *v *= w * l;
                }
            }
            normalize(&mut b);
            b
        })
        .collect();
    BeliefSet { node, family }
}

fn entropy_term(b: f64) -> f64 {
    if b > 0.0 {
        b * b.ln()
    } else {
        0.0
    }
}

/// `Σ_fam Σ b_fam ln(b_fam / ψ_fam) − Σ_i (d_i − 1) Σ b_i ln b_i` with
/// `ψ_fam = P(x | u) e_X(x)` and `d_i` the number of families containing
/// node `i`. Zero beliefs contribute 0; a positive belief on a zero factor
/// gives `+inf`.
pub fn bethe_free_energy(net: &BeliefNetwork, beliefs: &BeliefSet) -> f64 {
    let mut energy = 0.0;
    for x in net.order() {
        let node = net.node(x);
        let table = net.table(x);
        for (k, &b) in beliefs.family[x].iter().enumerate() {
            if b <= 0.0 {
                continue;
            }
            let psi = table[k] * node.evidence[k % node.arity];
            if psi <= 0.0 {
                return f64::INFINITY;
            }
            energy += b * (b.ln() - psi.ln());
        }
        let extra_families = net.child_edges(x).len() as f64;
        energy -= extra_families * beliefs.node[x].iter().map(|&b| entropy_term(b)).sum::<f64>();
    }
    energy
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Caps;
    use crate::exact::flat_smoother;
    use crate::lbp::network::unrolled_network;
    use crate::lbp::smoother::{lbp_smoother, LbpConfig, LbpOptions};
    use crate::model::{build_hmm, sample_evidence, ConditionalTable, DiscreteDbn, EvidenceSequence, NodeCpt, NodeSpec, ParentRef};

    #[test]
    fn tree_fixed_point_gives_log_evidence() {
        let dbn = build_hmm(3, 2, 11).unwrap();
        let (ev, _) = sample_evidence(&dbn, 10, 11).unwrap();
        let net = unrolled_network(&dbn, &ev, &Caps::default()).unwrap();
        let run = lbp_smoother(&net, &LbpConfig::default(), LbpOptions::default()).unwrap();
        assert!(run.trace.converged);
        let beliefs = belief_set(&net, &run.store);
        assert!(beliefs.max_inconsistency(&net) < 1e-10);
        let exact = flat_smoother(&dbn, &ev, &Caps::default()).unwrap();
        let f = bethe_free_energy(&net, &beliefs);
        assert!((f + exact.log_evidence.unwrap()).abs() < 1e-6, "{f}");
    }

    #[test]
    fn uniform_chain_matches_direct_summation() {
        // two binary hidden nodes, uniform CPTs, no evidence
        let u1 = ConditionalTable::new(2, vec![], vec![0.5, 0.5]).unwrap();
        let u2 = ConditionalTable::new(2, vec![2], vec![0.5; 4]).unwrap();
        let dbn = DiscreteDbn::new(
            vec![NodeSpec::hidden("X", 2), NodeSpec::observed("Y", 2)],
            vec![(0, 1)],
            vec![(0, 0)],
            vec![NodeCpt { parents: vec![], table: u1 }, NodeCpt { parents: vec![ParentRef::current(0)], table: u2.clone() }],
            vec![
                NodeCpt { parents: vec![ParentRef::previous(0)], table: u2.clone() },
                NodeCpt { parents: vec![ParentRef::current(0)], table: u2 },
            ],
        )
        .unwrap();
        let ev = EvidenceSequence::new(&dbn, 2).unwrap();
        let net = unrolled_network(&dbn, &ev, &Caps::default()).unwrap();
        let beliefs = BeliefSet { node: vec![vec![0.5; 2]; 2], family: vec![vec![0.5; 2], vec![0.25; 4]] };
        // family 1: 0.5 ln(0.5/0.5) * 2 = 0; family 2: 4 * 0.25 ln(0.25 / 0.5);
        // node 1 sits in two families: - (2 - 1) * 2 * 0.5 ln 0.5
        let direct = 4.0 * 0.25 * (0.25f64 / 0.5).ln() - 2.0 * 0.5 * 0.5f64.ln();
        assert!((bethe_free_energy(&net, &beliefs) - direct).abs() < 1e-15);
        assert!(direct.abs() < 1e-15);
    }

    #[test]
    fn belief_on_zero_factor_is_infinite() {
        let id = ConditionalTable::new(2, vec![2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let dbn = DiscreteDbn::new(
            vec![NodeSpec::hidden("X", 2), NodeSpec::observed("Y", 2)],
            vec![(0, 1)],
            vec![(0, 0)],
            vec![
                NodeCpt { parents: vec![], table: ConditionalTable::new(2, vec![], vec![0.5, 0.5]).unwrap() },
                NodeCpt { parents: vec![ParentRef::current(0)], table: id.clone() },
            ],
            vec![
                NodeCpt { parents: vec![ParentRef::previous(0)], table: id.clone() },
                NodeCpt { parents: vec![ParentRef::current(0)], table: id },
            ],
        )
        .unwrap();
        let ev = EvidenceSequence::new(&dbn, 2).unwrap();
        let net = unrolled_network(&dbn, &ev, &Caps::default()).unwrap();
        let spread = BeliefSet { node: vec![vec![0.5; 2]; 2], family: vec![vec![0.5; 2], vec![0.25; 4]] };
        assert_eq!(bethe_free_energy(&net, &spread), f64::INFINITY);
        let diagonal = BeliefSet { node: vec![vec![0.5; 2]; 2], family: vec![vec![0.5; 2], vec![0.5, 0.0, 0.0, 0.5]] };
        assert!(bethe_free_energy(&net, &diagonal).abs() < 1e-15);
    }
}
