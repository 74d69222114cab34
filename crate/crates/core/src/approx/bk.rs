//! Boyen-Koller: exact two-slice update, then projection onto cluster marginals.

use std::collections::BTreeMap;

use super::clusters::ClusterSpec;
use super::trajectory::{normalize_or_uniform, ApproxBeliefTrajectory};
use crate::elimination::eliminate_to;
use crate::error::{Caps, Result};
use crate::factor::Factor;
use crate::lbp::{build_clustered_graph, lbp_smoother, Coupling, LbpConfig, LbpOptions, LbpRun, Schedule};
use crate::model::{CptRole, DiscreteDbn, EvidenceSequence, Lag};

/// Exact marginal of `joint` on each cluster, normalized. The factor's
/// variables are hidden node indices.
pub fn project_to_clusters(joint: &Factor, clusters: &ClusterSpec) -> Vec<Vec<f64>> {
    clusters
        .clusters()
        .iter()
        .map(|members| {
            let mut m = joint.marginal(members);
            m.normalize();
            m.values().to_vec()
        })
        .collect()
}

/// Two-slice variable ids: previous-slice node `i` is `i`, current-slice node `i` is `n + i`.
struct TwoSlice<'a> {
    dbn: &'a DiscreteDbn,
    n: usize,
    cards: BTreeMap<usize, usize>,
}

impl<'a> TwoSlice<'a> {
    fn new(dbn: &'a DiscreteDbn) -> Self {
        let n = dbn.num_nodes();
        let cards = dbn.hidden().iter().flat_map(|&h| [(h, dbn.arity(h)), (n + h, dbn.arity(h))]).collect();
        TwoSlice { dbn, n, cards }
    }

    fn name(&self, v: usize) -> String {
        if v < self.n {
            format!("{}[t-1]", self.dbn.node(v).name)
        } else {
            format!("{}[t]", self.dbn.node(v - self.n).name)
        }
    }

    fn cpt_factors(&self, role: CptRole) -> Vec<Factor> {
        self.dbn
            .hidden()
            .iter()
            .map(|&h| {
                let cpt = self.dbn.cpt(h, role);
                Factor::from_cpt(cpt, self.n + h, |k| match cpt.parents[k].lag {
                    Lag::Previous => cpt.parents[k].node,
                    Lag::Current => self.n + cpt.parents[k].node,
                })
            })
            .collect()
    }

    fn evidence_factors(&self, evidence: &EvidenceSequence, t: usize) -> Vec<Factor> {
        let role = CptRole::for_slice(t);
        self.dbn
            .observed()
            .iter()
            .filter_map(|&o| {
                let y = evidence.get(t, o)?;
                let cpt = self.dbn.cpt(o, role);
                let table = &cpt.table;
                let vars = cpt.parents.iter().map(|p| self.n + p.node).collect();
                let values = (0..table.num_configs()).map(|c| table.prob(y, c)).collect();
                Some(Factor::new(vars, table.parent_arities().to_vec(), values))
            })
            .collect()
    }

    /// Cluster distribution as a factor over previous (`offset = 0`) or current (`offset = n`) ids.
    fn cluster_factor(&self, members: &[usize], values: &[f64], offset: usize) -> Factor {
        let vars = members.iter().map(|&m| m + offset).collect();
        let cards = members.iter().map(|&m| self.dbn.arity(m)).collect();
        Factor::new(vars, cards, values.to_vec())
    }

    fn eliminate(&self, factors: Vec<Factor>, query: &[usize], caps: &Caps) -> Result<Factor> {
        eliminate_to(factors, query, &self.cards, caps.elimination_factor, |v| self.name(v))
    }
}

/// BK forward, backward and smoothed cluster beliefs. Backward messages use
/// the same exact two-slice update:
/// `β̃_{t-1}^c ∝ Σ P(x_t | x_{t-1}) e_t Π_{c'} β̃_t^{c'} Π_{c'≠c} α̃_{t-1}^{c'}`.
pub fn bk_trajectory(
    dbn: &DiscreteDbn,
    evidence: &EvidenceSequence,
    clusters: &ClusterSpec,
    caps: &Caps,
) -> Result<ApproxBeliefTrajectory> {
    dbn.require_regular()?;
    dbn.require_leaf_observations()?;
    evidence.check_compatible(dbn)?;
    let horizon = evidence.horizon();
    let two = TwoSlice::new(dbn);
    let n = two.n;
    let members = clusters.clusters();
    let mut traj = ApproxBeliefTrajectory::new(dbn, members.to_vec(), horizon);
    let transition = two.cpt_factors(CptRole::Transition);

    for t in 1..=horizon {
        let mut factors = if t == 1 {
            two.cpt_factors(CptRole::Prior)
        } else {
            let mut f = transition.clone();
            for (c, m) in members.iter().enumerate() {
                f.push(two.cluster_factor(m, &traj.forward[t - 2][c], 0));
            }
            f
        };
        factors.extend(two.evidence_factors(evidence, t));
        for (c, m) in members.iter().enumerate() {
            let query: Vec<usize> = m.iter().map(|&i| n + i).collect();
            let mut v = two.eliminate(factors.clone(), &query, caps)?.values().to_vec();
            normalize_or_uniform(&mut v, || format!("forward cluster {c} at t={t}"));
            traj.forward[t - 1][c] = v;
        }
    }

    for (c, m) in members.iter().enumerate() {
        let size: usize = m.iter().map(|&i| dbn.arity(i)).product();
        traj.backward[horizon - 1][c] = vec![1.0 / size as f64; size];
    }
    for t in (2..=horizon).rev() {
        let mut shared = transition.clone();
        shared.extend(two.evidence_factors(evidence, t));
        for (c, m) in members.iter().enumerate() {
            shared.push(two.cluster_factor(m, &traj.backward[t - 1][c], n));
        }
        for (c, m) in members.iter().enumerate() {
            let mut factors = shared.clone();
            for (d, other) in members.iter().enumerate() {
                if d != c {
                    factors.push(two.cluster_factor(other, &traj.forward[t - 2][d], 0));
                }
            }
            let mut v = two.eliminate(factors, m, caps)?.values().to_vec();
            normalize_or_uniform(&mut v, || format!("backward cluster {c} at t={}", t - 1));
            traj.backward[t - 2][c] = v;
        }
    }

    for t in 0..horizon {
        for c in 0..members.len() {
            let mut g: Vec<f64> = traj.forward[t][c].iter().zip(&traj.backward[t][c]).map(|(a, b)| a * b).collect();
            normalize_or_uniform(&mut g, || format!("smoothed cluster {c} at t={}", t + 1));
            traj.smoothed[t][c] = g;
        }
    }
    Ok(traj)
}

/// BK smoothed per-node marginals.
pub fn bk_smoother(
    dbn: &DiscreteDbn,
    evidence: &EvidenceSequence,
    clusters: &ClusterSpec,
    caps: &Caps,
) -> Result<crate::SmoothedMarginals> {
    Ok(bk_trajectory(dbn, evidence, clusters, caps)?.marginals())
}

/// Forward-backward LBP on the mega-node clustered graph. Its first
/// iteration reproduces [`bk_smoother`].
pub fn iterated_bk(
    dbn: &DiscreteDbn,
    evidence: &EvidenceSequence,
    clusters: &ClusterSpec,
    config: &LbpConfig,
    options: LbpOptions<'_>,
    caps: &Caps,
) -> Result<LbpRun> {
    let mut net = build_clustered_graph(dbn, evidence.horizon(), clusters, Coupling::MegaNode, caps)?;
    net.set_evidence(dbn, evidence)?;
    let config = LbpConfig { schedule: Schedule::ForwardBackward, ..*config };
    lbp_smoother(&net, &config, options)
}
