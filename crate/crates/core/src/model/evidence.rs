//! Evidence sequences, their file format and ancestral sampling.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{CptRole, DiscreteDbn};
use crate::error::{DbnError, Result};
use crate::rng::{stream_rng, EVIDENCE_STREAM};

/// Observed values for timesteps `1..=horizon`. Unrecorded entries are
/// missing and contribute likelihood 1 to every state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvidenceSequence {
    horizon: usize,
    arities: Vec<usize>,
    observed: Vec<bool>,
    values: Vec<Option<usize>>,
}

#[derive(Serialize, Deserialize)]
struct EvidenceFile {
    horizon: usize,
    observations: Vec<(usize, usize, usize)>,
}

impl EvidenceSequence {
    /// Empty (all-missing) evidence for `dbn` over `horizon` slices.
    pub fn new(dbn: &DiscreteDbn, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(DbnError::InvalidEvidence("horizon must be at least 1".into()));
        }
        let n = dbn.num_nodes();
        Ok(EvidenceSequence {
            horizon,
            arities: dbn.nodes().iter().map(|n| n.arity).collect(),
            observed: dbn.nodes().iter().map(|n| !n.is_hidden()).collect(),
            values: vec![None; horizon * n],
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    fn slot(&self, t: usize, node: usize) -> Result<usize> {
        if t == 0 || t > self.horizon {
            return Err(DbnError::InvalidEvidence(format!("timestep {t} outside 1..={}", self.horizon)));
        }
        if node >= self.arities.len() {
            return Err(DbnError::InvalidEvidence(format!("node {node} does not exist")));
        }
        Ok((t - 1) * self.arities.len() + node)
    }

    /// Records (or clears, with `None`) the value of an observed node at `t` (1-based).
    pub fn set(&mut self, t: usize, node: usize, value: Option<usize>) -> Result<()> {
        let slot = self.slot(t, node)?;
        if !self.observed[node] {
            return Err(DbnError::InvalidEvidence(format!("node {node} is hidden; evidence is only allowed on observed nodes")));
        }
        if let Some(v) = value {
            if v >= self.arities[node] {
                return Err(DbnError::InvalidEvidence(format!(
                    "value {v} for node {node} at t={t} exceeds arity {}",
                    self.arities[node]
                )));
            }
        }
        self.values[slot] = value;
        Ok(())
    }

    /// Observed value at `t` (1-based); `None` for missing or hidden.
    pub fn get(&self, t: usize, node: usize) -> Option<usize> {
        self.values[(t - 1) * self.arities.len() + node]
    }

    /// All recorded `(t, node, value)` triples in time-major order.
    pub fn observations(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let n = self.arities.len();
        self.values
            .iter()
            .enumerate()
            .filter_map(move |(slot, v)| v.map(|v| (slot / n + 1, slot % n, v)))
    }

    /// Checks that this sequence was built for a model with the same node layout.
    pub fn check_compatible(&self, dbn: &DiscreteDbn) -> Result<()> {
        let same = dbn.num_nodes() == self.arities.len()
            && dbn.nodes().iter().zip(&self.arities).all(|(n, &a)| n.arity == a)
            && dbn.nodes().iter().zip(&self.observed).all(|(n, &o)| n.is_hidden() != o);
        if same {
            Ok(())
        } else {
            Err(DbnError::InvalidEvidence("evidence node layout does not match the model".into()))
        }
    }

    pub fn to_json_string(&self) -> String {
        let file = EvidenceFile { horizon: self.horizon, observations: self.observations().collect() };
        serde_json::to_string_pretty(&file).expect("evidence serializes")
    }

    pub fn from_json_str(dbn: &DiscreteDbn, text: &str) -> Result<Self> {
        let file: EvidenceFile = serde_json::from_str(text).map_err(|e| DbnError::Parse {
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        let mut evidence = EvidenceSequence::new(dbn, file.horizon)?;
        for (k, &(t, node, value)) in file.observations.iter().enumerate() {
            evidence.set(t, node, Some(value)).map_err(|e| DbnError::Parse {
                location: format!("observations[{k}]"),
                message: e.to_string(),
            })?;
        }
        Ok(evidence)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }

    pub fn load(dbn: &DiscreteDbn, path: impl AsRef<Path>) -> Result<Self> {
        EvidenceSequence::from_json_str(dbn, &std::fs::read_to_string(path)?)
    }
}

/// Ancestral sample of `horizon` slices. Returns the evidence on every
/// observed node together with the sampled values of all nodes, indexed
/// `[t - 1][node]`.
pub fn sample_evidence(dbn: &DiscreteDbn, horizon: usize, seed: u64) -> Result<(EvidenceSequence, Vec<Vec<usize>>)> {
    let mut evidence = EvidenceSequence::new(dbn, horizon)?;
    let mut rng = stream_rng(seed, EVIDENCE_STREAM);
    let n = dbn.num_nodes();
    let mut trajectory: Vec<Vec<usize>> = Vec::with_capacity(horizon);
    let mut parent_values = Vec::new();
    for t in 1..=horizon {
        let role = CptRole::for_slice(t);
        let mut current = vec![0usize; n];
        for &i in dbn.slice_order() {
            let cpt = dbn.cpt(i, role);
            parent_values.clear();
            parent_values.extend(cpt.parents.iter().map(|p| match p.lag {
                super::Lag::Current => current[p.node],
                super::Lag::Previous => trajectory[t - 2][p.node],
            }));
            let row = cpt.table.row(cpt.table.config_index(&parent_values));
            current[i] = sample_row(&mut rng, row);
        }
        for &o in dbn.observed() {
            evidence.set(t, o, Some(current[o]))?;
        }
        trajectory.push(current);
    }
    Ok((evidence, trajectory))
}

fn sample_row<R: Rng>(rng: &mut R, row: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    // round-off: fall back to the last state with positive mass
    row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
}

/// Likelihood of the slice-`t` evidence given a full assignment of the
/// slice's node values (`values[node]`; observed entries are ignored).
/// Requires leaf observations with same-slice parents.
pub fn slice_likelihood(dbn: &DiscreteDbn, evidence: &EvidenceSequence, t: usize, values: &[usize]) -> f64 {
    let role = CptRole::for_slice(t);
    let mut lik = 1.0;
    let mut parent_values: Vec<usize> = Vec::with_capacity(4);
    for &o in dbn.observed() {
        if let Some(y) = evidence.get(t, o) {
            let cpt = dbn.cpt(o, role);
            parent_values.clear();
            parent_values.extend(cpt.parents.iter().map(|p| values[p.node]));
            lik *= cpt.table.prob(y, cpt.table.config_index(&parent_values));
        }
    }
    lik
}

/// Per-hidden-node local evidence: `local[t - 1][ordinal][state]` is the
/// product of `P(y | state)` over the node's single-parent observed children
/// at `t`. Observed nodes with several hidden parents cannot be folded into
/// one node and are rejected.
pub fn node_local_evidence(dbn: &DiscreteDbn, evidence: &EvidenceSequence) -> Result<Vec<Vec<Vec<f64>>>> {
    evidence.check_compatible(dbn)?;
    dbn.require_leaf_observations()?;
    let mut owners = Vec::new();
    for &o in dbn.observed() {
        let parents: Vec<usize> = dbn.intra_parents(o).collect();
        match parents.len() {
            0 => {}
            1 => owners.push((o, parents[0])),
            _ => {
                return Err(DbnError::NotRegular(format!(
                    "observed node {} has {} hidden parents; per-node evidence needs a single parent",
                    dbn.node(o).name,
                    parents.len()
                )))
            }
        }
    }
    let arities = dbn.hidden_arities();
    let mut local = Vec::with_capacity(evidence.horizon());
    for t in 1..=evidence.horizon() {
        let role = CptRole::for_slice(t);
        let mut slice: Vec<Vec<f64>> = arities.iter().map(|&a| vec![1.0; a]).collect();
        for &(o, h) in &owners {
            if let Some(y) = evidence.get(t, o) {
                let table = &dbn.cpt(o, role).table;
                let ord = dbn.hidden_ordinal(h).expect("parent is hidden");
                for (x, e) in slice[ord].iter_mut().enumerate() {
                    *e *= table.prob(y, x);
                }
            }
        }
        local.push(slice);
    }
    Ok(local)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_chmm;

    #[test]
    fn set_rejects_hidden_and_out_of_range() {
        let dbn = build_chmm(2, 2, 1).unwrap();
        let mut ev = EvidenceSequence::new(&dbn, 3).unwrap();
        assert!(ev.set(1, 0, Some(0)).is_err());
        assert!(ev.set(1, 2, Some(2)).is_err());
        assert!(ev.set(4, 2, Some(0)).is_err());
        assert!(ev.set(0, 2, Some(0)).is_err());
        ev.set(2, 3, Some(1)).unwrap();
        assert_eq!(ev.get(2, 3), Some(1));
        assert_eq!(ev.get(1, 3), None);
    }

    #[test]
    fn zero_horizon_rejected() {
        let dbn = build_chmm(1, 2, 1).unwrap();
        assert!(EvidenceSequence::new(&dbn, 0).is_err());
    }

    #[test]
    fn json_round_trip_keeps_missing_entries() {
        let dbn = build_chmm(2, 2, 1).unwrap();
        let (mut ev, _) = sample_evidence(&dbn, 4, 9).unwrap();
        ev.set(3, 2, None).unwrap();
        let back = EvidenceSequence::from_json_str(&dbn, &ev.to_json_string()).unwrap();
        assert_eq!(back, ev);
        assert_eq!(back.observations().count(), 7);
    }

    #[test]
    fn sampling_is_seeded() {
        let dbn = build_chmm(3, 2, 1).unwrap();
        let a = sample_evidence(&dbn, 10, 5).unwrap();
        let b = sample_evidence(&dbn, 10, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.1.len(), 10);
    }

    #[test]
    fn missing_evidence_is_flat() {
        let dbn = build_chmm(2, 2, 1).unwrap();
        let ev = EvidenceSequence::new(&dbn, 2).unwrap();
        let local = node_local_evidence(&dbn, &ev).unwrap();
        assert!(local.iter().flatten().flatten().all(|&e| e == 1.0));
    }

    #[test]
    fn bad_file_reports_entry() {
        let dbn = build_chmm(1, 2, 1).unwrap();
        let err = EvidenceSequence::from_json_str(&dbn, r#"{"horizon": 2, "observations": [[1, 1, 0], [2, 0, 1]]}"#).unwrap_err();
        assert!(err.to_string().contains("observations[1]"), "{err}");
    }
}
