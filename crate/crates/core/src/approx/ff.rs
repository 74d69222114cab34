//! Factored frontier: keep the frontier joint as a product of per-node marginals.

use super::trajectory::{normalize_or_uniform, ApproxBeliefTrajectory};
use crate::error::Result;
use crate::marginals::SmoothedMarginals;
use crate::model::evidence::node_local_evidence;
use crate::model::{decode_mixed_radix, CptRole, DiscreteDbn, EvidenceSequence};

/// FF forward, backward and smoothed per-node beliefs.
pub fn ff_trajectory(dbn: &DiscreteDbn, evidence: &EvidenceSequence) -> Result<ApproxBeliefTrajectory> {
    dbn.require_regular()?;
    let local = node_local_evidence(dbn, evidence)?;
    let hidden = dbn.hidden();
    let horizon = evidence.horizon();
    let mut traj = ApproxBeliefTrajectory::new(dbn, hidden.iter().map(|&h| vec![h]).collect(), horizon);
    let ord = |i: usize| dbn.hidden_ordinal(i).expect("hidden parent");
    // parent ordinals of each hidden node's transition CPT
    let parents: Vec<Vec<usize>> = hidden
        .iter()
        .map(|&h| dbn.cpt(h, CptRole::Transition).parents.iter().map(|p| ord(p.node)).collect())
        .collect();
    let mut digits = Vec::new();

    for t in 1..=horizon {
        for (k, &h) in hidden.iter().enumerate() {
            let cpt = dbn.cpt(h, CptRole::for_slice(t));
            let arity = dbn.arity(h);
            let mut a = vec![0.0; arity];
            if t == 1 {
                a.copy_from_slice(cpt.table.row(0));
            } else {
                let prev = &traj.forward[t - 2];
                let pa = cpt.table.parent_arities();
                digits.resize(pa.len(), 0);
                for config in 0..cpt.table.num_configs() {
                    decode_mixed_radix(config, pa, &mut digits);
                    let w: f64 = parents[k].iter().zip(&digits).map(|(&p, &d)| prev[p][d]).product();
                    for (ax, &px) in a.iter_mut().zip(cpt.table.row(config)) {
                        *ax += w * px;
                    }
                }
            }
            a.iter_mut().zip(&local[t - 1][k]).for_each(|(x, e)| *x *= e);
            normalize_or_uniform(&mut a, || format!("forward factor of {} at t={t}", dbn.node(h).name));
            traj.forward[t - 1][k] = a;
        }
    }

    for (k, &h) in hidden.iter().enumerate() {
        let a = dbn.arity(h);
        traj.backward[horizon - 1][k] = vec![1.0 / a as f64; a];
    }
    for t in (2..=horizon).rev() {
        // λ messages from slice-t nodes to their slice-(t-1) parents
        let mut incoming: Vec<Vec<f64>> = hidden.iter().map(|&h| vec![1.0; dbn.arity(h)]).collect();
        let prev = &traj.forward[t - 2];
        for (k, &x) in hidden.iter().enumerate() {
            let cpt = dbn.cpt(x, CptRole::Transition);
            let weight: Vec<f64> = local[t - 1][k].iter().zip(&traj.backward[t - 1][k]).map(|(e, b)| e * b).collect();
            let pa = cpt.table.parent_arities();
            let np = pa.len();
            digits.resize(np, 0);
            let mut msgs: Vec<Vec<f64>> = pa.iter().map(|&q| vec![0.0; q]).collect();
            for config in 0..cpt.table.num_configs() {
                let g: f64 = cpt.table.row(config).iter().zip(&weight).map(|(p, w)| p * w).sum();
                decode_mixed_radix(config, pa, &mut digits);
                for j in 0..np {
                    let others: f64 = (0..np).filter(|&m| m != j).map(|m| prev[parents[k][m]][digits[m]]).product();
                    msgs[j][digits[j]] += g * others;
                }
            }
            for (j, mut m) in msgs.into_iter().enumerate() {
                normalize_or_uniform(&mut m, || format!("backward message from {} at t={t}", dbn.node(x).name));
                incoming[parents[k][j]].iter_mut().zip(&m).for_each(|(a, b)| *a *= b);
            }
        }
        for (k, mut b) in incoming.into_iter().enumerate() {
            normalize_or_uniform(&mut b, || format!("backward factor of {} at t={}", dbn.node(hidden[k]).name, t - 1));
            traj.backward[t - 2][k] = b;
        }
    }

    for t in 0..horizon {
        for k in 0..hidden.len() {
            let mut g: Vec<f64> = traj.forward[t][k].iter().zip(&traj.backward[t][k]).map(|(a, b)| a * b).collect();
            normalize_or_uniform(&mut g, || format!("smoothed factor of {} at t={}", dbn.node(hidden[k]).name, t + 1));
            traj.smoothed[t][k] = g;
        }
    }
    Ok(traj)
}

/// FF smoothed per-node marginals.
pub fn ff_smoother(dbn: &DiscreteDbn, evidence: &EvidenceSequence) -> Result<SmoothedMarginals> {
    Ok(ff_trajectory(dbn, evidence)?.marginals())
}
