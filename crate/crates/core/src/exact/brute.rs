//! Definitional ground truth: enumerate every hidden trajectory.

use crate::error::{Caps, DbnError, Result};
use crate::marginals::{normalize, FactoredBelief, SmoothedMarginals};
use crate::model::evidence::slice_likelihood;
use crate::model::{CptRole, DiscreteDbn, EvidenceSequence, Lag};

struct Enumerator<'a> {
    dbn: &'a DiscreteDbn,
    evidence: &'a EvidenceSequence,
    /// `(t, node)` in enumeration order
    vars: Vec<(usize, usize)>,
    /// `values[t][node]`, index 0 unused
    values: Vec<Vec<usize>>,
    /// `acc[depth][state]`
    acc: Vec<Vec<f64>>,
    parent_values: Vec<usize>,
}

impl Enumerator<'_> {
    fn local_factor(&mut self, depth: usize) -> f64 {
        let (t, node) = self.vars[depth];
        let cpt = self.dbn.cpt(node, CptRole::for_slice(t));
        self.parent_values.clear();
        for p in &cpt.parents {
            let slice = match p.lag {
                Lag::Current => t,
                Lag::Previous => t - 1,
            };
            self.parent_values.push(self.values[slice][p.node]);
        }
        let mut f = cpt.table.prob(self.values[t][node], cpt.table.config_index(&self.parent_values));
        let last_of_slice = self.vars.get(depth + 1).is_none_or(|&(next_t, _)| next_t != t);
        if last_of_slice && f > 0.0 {
            f *= slice_likelihood(self.dbn, self.evidence, t, &self.values[t]);
        }
        f
    }

    /// Sum over completions of the factors at `depth..`, accumulating
    /// `prefix * factor * rest` into the marginal of each variable.
    fn visit(&mut self, depth: usize, prefix: f64) -> f64 {
        if depth == self.vars.len() {
            return 1.0;
        }
        let (t, node) = self.vars[depth];
        let mut total = 0.0;
        for v in 0..self.dbn.arity(node) {
            self.values[t][node] = v;
            let f = self.local_factor(depth);
            if f == 0.0 {
                continue;
            }
            let rest = self.visit(depth + 1, prefix * f);
            self.acc[depth][v] += prefix * f * rest;
            total += f * rest;
        }
        total
    }
}

/// Enumerates all joint hidden trajectories. Returns normalized per-node
/// marginals and `log P(y_{1:T})`.
pub fn brute_force_joint(dbn: &DiscreteDbn, evidence: &EvidenceSequence, caps: &Caps) -> Result<SmoothedMarginals> {
    evidence.check_compatible(dbn)?;
    dbn.require_leaf_observations()?;
    let horizon = evidence.horizon();
    let per_slice: u128 = dbn.hidden_arities().iter().map(|&a| a as u128).product();
    let total = (0..horizon).try_fold(1u128, |acc, _| acc.checked_mul(per_slice)).unwrap_or(u128::MAX);
    if total > caps.brute_force_assignments as u128 {
        return Err(DbnError::CapExceeded {
            what: format!("joint enumeration over {} hidden variables", dbn.num_hidden() * horizon),
            size: total,
            cap: caps.brute_force_assignments as u128,
        });
    }
    let order: Vec<usize> = dbn.slice_order().iter().copied().filter(|&i| dbn.node(i).is_hidden()).collect();
    let vars: Vec<(usize, usize)> = (1..=horizon).flat_map(|t| order.iter().map(move |&i| (t, i))).collect();
    let acc = vars.iter().map(|&(_, i)| vec![0.0; dbn.arity(i)]).collect();
    let mut e = Enumerator {
        dbn,
        evidence,
        vars,
        values: vec![vec![0; dbn.num_nodes()]; horizon + 1],
        acc,
        parent_values: Vec::new(),
    };
    let z = e.visit(0, 1.0);
    if !(z > 0.0) {
        return Err(DbnError::ImpossibleEvidence);
    }
    let mut slices: Vec<FactoredBelief> = (0..horizon)
        .map(|_| FactoredBelief { marginals: vec![Vec::new(); dbn.num_hidden()] })
        .collect();
    for ((t, node), mut m) in e.vars.iter().copied().zip(e.acc) {
        normalize(&mut m);
        let ord = dbn.hidden_ordinal(node).expect("hidden");
        slices[t - 1].marginals[ord] = m;
    }
    Ok(SmoothedMarginals { slices, log_evidence: Some(z.ln()) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_hmm, ConditionalTable, NodeCpt, NodeSpec, ParentRef};

    fn uniform_hmm() -> DiscreteDbn {
        let u = |parents: Vec<usize>| ConditionalTable::from_weights(2, parents.clone(), vec![1.0; 2 * parents.iter().product::<usize>()]).unwrap();
        DiscreteDbn::new(
            vec![NodeSpec::hidden("X", 2), NodeSpec::observed("Y", 2)],
            vec![(0, 1)],
            vec![(0, 0)],
            vec![NodeCpt { parents: vec![], table: u(vec![]) }, NodeCpt { parents: vec![ParentRef::current(0)], table: u(vec![2]) }],
            vec![
                NodeCpt { parents: vec![ParentRef::previous(0)], table: u(vec![2]) },
                NodeCpt { parents: vec![ParentRef::current(0)], table: u(vec![2]) },
            ],
        )
        .unwrap()
    }

    #[test]
    fn uniform_model_gives_uniform_marginals() {
        let dbn = uniform_hmm();
        let mut ev = EvidenceSequence::new(&dbn, 4).unwrap();
        ev.set(2, 1, Some(1)).unwrap();
        let m = brute_force_joint(&dbn, &ev, &Caps::default()).unwrap();
        for t in 1..=4 {
            assert_eq!(m.get(t, 0), &[0.5, 0.5]);
        }
        assert!((m.log_evidence.unwrap() - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn impossible_evidence_is_reported() {
        let dbn = build_hmm(2, 2, 0).unwrap();
        // observation CPT with a zero column
        let mut raw: serde_json::Value = serde_json::from_str(&crate::model::io::to_json_string(&dbn)).unwrap();
        for k in [2, 3] {
            raw["cpts"][k]["values"] = serde_json::json!([1.0, 0.0, 1.0, 0.0]);
        }
        let dbn = crate::model::io::from_json_str(&raw.to_string()).unwrap();
        let mut ev = EvidenceSequence::new(&dbn, 2).unwrap();
        ev.set(1, 1, Some(1)).unwrap();
        assert!(matches!(brute_force_joint(&dbn, &ev, &Caps::default()), Err(DbnError::ImpossibleEvidence)));
    }

    #[test]
    fn cap_is_enforced() {
        let dbn = build_hmm(4, 2, 0).unwrap();
        let ev = EvidenceSequence::new(&dbn, 13).unwrap();
        assert!(brute_force_joint(&dbn, &ev, &Caps::default()).unwrap_err().is_cap_exceeded());
    }
}
