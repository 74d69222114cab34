//! Flattening a DBN into an HMM over joint hidden states, and the
//! matrix-vector forwards-backwards recursions on it.

use crate::error::{Caps, DbnError, Result};
use crate::marginals::{normalize, FactoredBelief, SmoothedMarginals};
use crate::model::{decode_mixed_radix, ConditionalTable, CptRole, DiscreteDbn, EvidenceSequence, Lag};

#[derive(Clone, Debug, PartialEq)]
struct Emission {
    node: usize,
    parent_ordinals: Vec<usize>,
    prior: ConditionalTable,
    transition: ConditionalTable,
}

/// HMM over `S = prod Q_i` joint states, encoded mixed-radix over the hidden
/// nodes in declaration order (first node most significant).
#[derive(Clone, Debug, PartialEq)]
pub struct FlatHmm {
    hidden_arities: Vec<usize>,
    prior: Vec<f64>,
    /// `transition[i * S + j] = P(X_{t+1} = j | X_t = i)`
    transition: Vec<f64>,
    emissions: Vec<Emission>,
}

impl FlatHmm {
    /// An HMM given directly by its prior and row-stochastic transition
    /// matrix, with no observation model (likelihoods are supplied to
    /// [`forwards_backwards`]).
    pub fn from_parts(prior: Vec<f64>, transition: Vec<f64>) -> Result<Self> {
        let s = prior.len();
        if s == 0 || transition.len() != s * s {
            return Err(DbnError::InvalidModel(format!("transition must be {s}x{s}")));
        }
        if (prior.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(DbnError::InvalidModel("prior does not sum to 1".into()));
        }
        for (i, row) in transition.chunks(s).enumerate() {
            if (row.iter().sum::<f64>() - 1.0).abs() > 1e-10 {
                return Err(DbnError::InvalidModel(format!("transition row {i} does not sum to 1")));
            }
        }
        Ok(FlatHmm { hidden_arities: vec![s], prior, transition, emissions: vec![] })
    }

    pub fn num_states(&self) -> usize {
        self.prior.len()
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn transition(&self) -> &[f64] {
        &self.transition
    }

    pub fn hidden_arities(&self) -> &[usize] {
        &self.hidden_arities
    }

    /// `W_t` diagonals for `t = 1..=T`: `P(y_t | state)`.
    pub fn likelihoods(&self, evidence: &EvidenceSequence) -> Vec<Vec<f64>> {
        let s = self.num_states();
        let mut decoded = vec![0usize; self.hidden_arities.len()];
        let mut parent_values = Vec::new();
        (1..=evidence.horizon())
            .map(|t| {
                let mut w = vec![1.0; s];
                for e in &self.emissions {
                    let Some(y) = evidence.get(t, e.node) else { continue };
                    let table = if t == 1 { &e.prior } else { &e.transition };
                    for (state, wj) in w.iter_mut().enumerate() {
                        decode_mixed_radix(state, &self.hidden_arities, &mut decoded);
                        parent_values.clear();
                        parent_values.extend(e.parent_ordinals.iter().map(|&k| decoded[k]));
                        *wj *= table.prob(y, table.config_index(&parent_values));
                    }
                }
                w
            })
            .collect()
    }
}

/// Builds the joint-state HMM. Rejects models whose state count exceeds `caps.flat_states`.
pub fn flatten_to_hmm(dbn: &DiscreteDbn, caps: &Caps) -> Result<FlatHmm> {
    dbn.require_leaf_observations()?;
    let arities = dbn.hidden_arities();
    let s_wide: u128 = arities.iter().map(|&a| a as u128).product();
    if s_wide > caps.flat_states as u128 {
        return Err(DbnError::CapExceeded {
            what: format!("flattened state space S = {s_wide}"),
            size: s_wide,
            cap: caps.flat_states as u128,
        });
    }
    let s = s_wide as usize;
    let n = dbn.num_nodes();
    let hidden = dbn.hidden();
    // slice values indexed by node id; observed entries unused
    let mut prev_vals = vec![0usize; n];
    let mut cur_vals = vec![0usize; n];
    let mut decoded = vec![0usize; hidden.len()];
    let mut parent_values = Vec::new();

    let joint_prob = |role: CptRole, prev: &[usize], cur: &[usize], pv: &mut Vec<usize>| -> f64 {
        hidden.iter().fold(1.0, |acc, &h| {
            let cpt = dbn.cpt(h, role);
            pv.clear();
            pv.extend(cpt.parents.iter().map(|p| match p.lag {
                Lag::Current => cur[p.node],
                Lag::Previous => prev[p.node],
            }));
            acc * cpt.table.prob(cur[h], cpt.table.config_index(pv))
        })
    };

    let mut prior = vec![0.0; s];
    for (state, p) in prior.iter_mut().enumerate() {
        decode_mixed_radix(state, &arities, &mut decoded);
        for (k, &h) in hidden.iter().enumerate() {
            cur_vals[h] = decoded[k];
        }
        *p = joint_prob(CptRole::Prior, &prev_vals, &cur_vals, &mut parent_values);
    }

    let mut transition = vec![0.0; s * s];
    for i in 0..s {
        decode_mixed_radix(i, &arities, &mut decoded);
        for (k, &h) in hidden.iter().enumerate() {
            prev_vals[h] = decoded[k];
        }
        for j in 0..s {
            decode_mixed_radix(j, &arities, &mut decoded);
            for (k, &h) in hidden.iter().enumerate() {
                cur_vals[h] = decoded[k];
            }
            transition[i * s + j] = joint_prob(CptRole::Transition, &prev_vals, &cur_vals, &mut parent_values);
        }
    }

    let emissions = dbn
        .observed()
        .iter()
        .map(|&o| {
            let ordinals = |role: CptRole| -> Vec<usize> {
                dbn.cpt(o, role).parents.iter().map(|p| dbn.hidden_ordinal(p.node).expect("hidden parent")).collect()
            };
            debug_assert_eq!(ordinals(CptRole::Prior), ordinals(CptRole::Transition));
            Emission {
                node: o,
                parent_ordinals: ordinals(CptRole::Transition),
                prior: dbn.cpt(o, CptRole::Prior).table.clone(),
                transition: dbn.cpt(o, CptRole::Transition).table.clone(),
            }
        })
        .collect();
    Ok(FlatHmm { hidden_arities: arities, prior, transition, emissions })
}

/// Output of the forwards-backwards recursions over flat states.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatPosterior {
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<f64>>,
    pub log_evidence: f64,
}

impl FlatPosterior {
    /// Per-node marginals of `gamma` under the mixed-radix encoding of `arities`.
    pub fn node_marginals(&self, arities: &[usize]) -> SmoothedMarginals {
        let mut decoded = vec![0usize; arities.len()];
        let slices = self
            .gamma
            .iter()
            .map(|g| {
                let mut marginals: Vec<Vec<f64>> = arities.iter().map(|&a| vec![0.0; a]).collect();
                for (state, &p) in g.iter().enumerate() {
                    decode_mixed_radix(state, arities, &mut decoded);
                    for (m, &x) in marginals.iter_mut().zip(&decoded) {
                        m[x] += p;
                    }
                }
                marginals.iter_mut().for_each(|m| {
                    normalize(m);
                });
                FactoredBelief { marginals }
            })
            .collect();
        SmoothedMarginals { slices, log_evidence: Some(self.log_evidence) }
    }
}

/// `alpha_t ∝ W_t M^T alpha_{t-1}` with `alpha_1 = W_1 pi`, `beta_t ∝ M W_{t+1}
/// beta_{t+1}` with `beta_T = 1`, `gamma_t ∝ alpha_t ∘ beta_t`. The log of the
/// product of the alpha normalizers is `log P(y_{1:T})`.
pub fn forwards_backwards(hmm: &FlatHmm, likelihoods: &[Vec<f64>]) -> Result<FlatPosterior> {
    let s = hmm.num_states();
    let horizon = likelihoods.len();
    if horizon == 0 {
        return Err(DbnError::InvalidEvidence("horizon must be at least 1".into()));
    }
    let m = &hmm.transition;
    let mut alpha: Vec<Vec<f64>> = Vec::with_capacity(horizon);
    let mut log_evidence = 0.0;
    for (t, w) in likelihoods.iter().enumerate() {
        let mut a = match alpha.last() {
            None => hmm.prior.iter().zip(w).map(|(p, l)| p * l).collect::<Vec<_>>(),
            Some(prev) => {
                let mut next = vec![0.0; s];
                for (i, &pi) in prev.iter().enumerate() {
                    if pi == 0.0 {
                        continue;
                    }
                    for (nj, &mij) in next.iter_mut().zip(&m[i * s..(i + 1) * s]) {
                        *nj += mij * pi;
                    }
                }
                next.iter_mut().zip(w).for_each(|(x, l)| *x *= l);
                next
            }
        };
        let z = normalize(&mut a);
        if !(z > 0.0) {
            return Err(DbnError::ZeroProbabilityEvidence { t: t + 1 });
        }
        log_evidence += z.ln();
        alpha.push(a);
    }

    let mut beta = vec![vec![1.0; s]; horizon];
    for t in (0..horizon - 1).rev() {
        let weighted: Vec<f64> = beta[t + 1].iter().zip(&likelihoods[t + 1]).map(|(b, l)| b * l).collect();
        let mut b: Vec<f64> = (0..s)
            .map(|i| m[i * s..(i + 1) * s].iter().zip(&weighted).map(|(x, y)| x * y).sum())
            .collect();
        if !(normalize(&mut b) > 0.0) {
            return Err(DbnError::ZeroProbabilityEvidence { t: t + 2 });
        }
        beta[t] = b;
    }

    let gamma = alpha
        .iter()
        .zip(&beta)
        .enumerate()
        .map(|(t, (a, b))| {
            let mut g: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
            if normalize(&mut g) > 0.0 {
                Ok(g)
            } else {
                Err(DbnError::ZeroProbabilityEvidence { t: t + 1 })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FlatPosterior { alpha, beta, gamma, log_evidence })
}

/// Forwards-backwards on a flattened model with the model's own observation model.
pub fn hmm_forwards_backwards(hmm: &FlatHmm, evidence: &EvidenceSequence) -> Result<FlatPosterior> {
    forwards_backwards(hmm, &hmm.likelihoods(evidence))
}

/// Flatten, run forwards-backwards and return per-node marginals.
pub fn flat_smoother(dbn: &DiscreteDbn, evidence: &EvidenceSequence, caps: &Caps) -> Result<SmoothedMarginals> {
    evidence.check_compatible(dbn)?;
    let hmm = flatten_to_hmm(dbn, caps)?;
    Ok(hmm_forwards_backwards(&hmm, evidence)?.node_marginals(hmm.hidden_arities()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_chmm;

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn identity_transition_without_information() {
        let hmm = FlatHmm::from_parts(vec![0.5, 0.5], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let post = forwards_backwards(&hmm, &vec![vec![1.0, 1.0]; 4]).unwrap();
        for g in &post.gamma {
            assert_close(g, &[0.5, 0.5], 1e-15);
        }
        assert!(post.log_evidence.abs() < 1e-15);
    }

    #[test]
    fn single_step_is_weighted_prior() {
        let hmm = FlatHmm::from_parts(vec![0.3, 0.7], vec![0.9, 0.1, 0.2, 0.8]).unwrap();
        let post = forwards_backwards(&hmm, &[vec![0.8, 0.2]]).unwrap();
        let z = 0.3 * 0.8 + 0.7 * 0.2;
        assert_close(&post.gamma[0], &[0.24 / z, 0.14 / z], 1e-15);
        assert!((post.log_evidence - z.ln()).abs() < 1e-15);
    }

    #[test]
    fn two_step_matches_trajectory_enumeration() {
        let m = [[0.9, 0.1], [0.1, 0.9]];
        let w = [0.8, 0.2];
        let hmm = FlatHmm::from_parts(vec![0.5, 0.5], m.concat()).unwrap();
        let post = forwards_backwards(&hmm, &[w.to_vec(), w.to_vec()]).unwrap();
        // enumerate the 4 trajectories (x1, x2)
        let mut joint = [[0.0; 2]; 2];
        for x1 in 0..2 {
            for x2 in 0..2 {
                joint[x1][x2] = 0.5 * w[x1] * m[x1][x2] * w[x2];
            }
        }
        let z: f64 = joint.iter().flatten().sum();
        let g1 = [(joint[0][0] + joint[0][1]) / z, (joint[1][0] + joint[1][1]) / z];
        let g2 = [(joint[0][0] + joint[1][0]) / z, (joint[0][1] + joint[1][1]) / z];
        assert_close(&post.gamma[0], &g1, 1e-14);
        assert_close(&post.gamma[1], &g2, 1e-14);
        assert!((post.log_evidence - z.ln()).abs() < 1e-14);
    }

    #[test]
    fn zero_probability_evidence_is_reported() {
        let hmm = FlatHmm::from_parts(vec![1.0, 0.0], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let err = forwards_backwards(&hmm, &[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap_err();
        assert!(matches!(err, DbnError::ZeroProbabilityEvidence { t: 2 }));
    }

    #[test]
    fn hmm_flattening_is_identity() {
        let dbn = build_chmm(1, 3, 4).unwrap();
        let hmm = flatten_to_hmm(&dbn, &Caps::default()).unwrap();
        assert_eq!(hmm.transition(), dbn.cpt(0, CptRole::Transition).table.values());
        assert_eq!(hmm.prior(), dbn.cpt(0, CptRole::Prior).table.values());
    }

    #[test]
    fn two_chain_entry_is_product_of_cpt_entries() {
        let dbn = build_chmm(2, 2, 21).unwrap();
        let hmm = flatten_to_hmm(&dbn, &Caps::default()).unwrap();
        // state 00 -> 01: X1 = 0, X2 = 1 given both parents 0 (config 0)
        let t1 = &dbn.cpt(0, CptRole::Transition).table;
        let t2 = &dbn.cpt(1, CptRole::Transition).table;
        assert_eq!(hmm.transition()[1], t1.prob(0, 0) * t2.prob(1, 0));
        for row in hmm.transition().chunks(4) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn state_cap_names_size() {
        let dbn = build_chmm(5, 2, 0).unwrap();
        let caps = Caps { flat_states: 16, ..Caps::default() };
        let err = flatten_to_hmm(&dbn, &caps).unwrap_err();
        assert!(err.is_cap_exceeded());
        assert!(err.to_string().contains("32"), "{err}");
    }
}
