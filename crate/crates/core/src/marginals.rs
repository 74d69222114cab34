//! Per-node belief containers and the marginals CSV export.

use std::io::Write;

use crate::error::{DbnError, Result};
use crate::model::DiscreteDbn;

/// Tolerance on the unit mass of every reported marginal.
pub const MARGINAL_SUM_TOL: f64 = 1e-10;

/// One distribution per hidden node (indexed by hidden ordinal) for a single timestep.
#[derive(Clone, Debug, PartialEq)]
pub struct FactoredBelief {
    pub marginals: Vec<Vec<f64>>,
}

impl FactoredBelief {
    pub fn uniform(arities: &[usize]) -> Self {
        FactoredBelief { marginals: arities.iter().map(|&a| vec![1.0 / a as f64; a]).collect() }
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        self.marginals
            .iter()
            .all(|m| m.iter().all(|&p| p >= 0.0) && (m.iter().sum::<f64>() - 1.0).abs() <= tol)
    }
}

/// Smoothed posteriors `P(X_t^i | y_{1:T})` for every timestep and hidden node.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothedMarginals {
    /// `slices[t - 1]`
    pub slices: Vec<FactoredBelief>,
    /// `log P(y_{1:T})` when the producing route computes it.
    pub log_evidence: Option<f64>,
}

impl SmoothedMarginals {
    pub fn horizon(&self) -> usize {
        self.slices.len()
    }

    /// `P(X_t^i = s | y)` with `t` 1-based and `node` a hidden ordinal.
    pub fn get(&self, t: usize, node: usize) -> &[f64] {
        &self.slices[t - 1].marginals[node]
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        self.slices.iter().all(|s| s.is_normalized(tol))
    }

    /// Largest absolute entrywise difference; errors on mismatched shapes.
    pub fn max_abs_diff(&self, other: &SmoothedMarginals) -> Result<f64> {
        check_same_shape(self, other)?;
        let mut worst: f64 = 0.0;
        for (a, b) in self.slices.iter().zip(&other.slices) {
            for (ma, mb) in a.marginals.iter().zip(&b.marginals) {
                for (x, y) in ma.iter().zip(mb) {
                    worst = worst.max((x - y).abs());
                }
            }
        }
        Ok(worst)
    }

    /// Writes the `t,node,state,probability` CSV (t 1-based, node by name).
    pub fn write_csv<W: Write>(&self, dbn: &DiscreteDbn, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "node", "state", "probability"])?;
        for (t, slice) in self.slices.iter().enumerate() {
            for (ord, marginal) in slice.marginals.iter().enumerate() {
                let name = &dbn.node(dbn.hidden()[ord]).name;
                for (s, p) in marginal.iter().enumerate() {
                    w.write_record([(t + 1).to_string(), name.clone(), s.to_string(), format!("{p:e}")])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Checks that two marginal sets cover the same `(t, node, state)` keys and
/// names the first missing one otherwise.
pub fn check_same_shape(a: &SmoothedMarginals, b: &SmoothedMarginals) -> Result<()> {
    let horizon = a.slices.len().max(b.slices.len());
    for t in 0..horizon {
        let (Some(sa), Some(sb)) = (a.slices.get(t), b.slices.get(t)) else {
            return Err(DbnError::IndexMismatch(format!("t={} missing from one side", t + 1)));
        };
        let nodes = sa.marginals.len().max(sb.marginals.len());
        for i in 0..nodes {
            let (Some(ma), Some(mb)) = (sa.marginals.get(i), sb.marginals.get(i)) else {
                return Err(DbnError::IndexMismatch(format!("t={} node={} missing from one side", t + 1, i)));
            };
            if ma.len() != mb.len() {
                return Err(DbnError::IndexMismatch(format!(
                    "t={} node={} state={} missing from one side",
                    t + 1,
                    i,
                    ma.len().min(mb.len())
                )));
            }
        }
    }
    Ok(())
}

/// Normalizes `v` in place; returns the previous mass.
pub(crate) fn normalize(v: &mut [f64]) -> f64 {
    let z: f64 = v.iter().sum();
    if z > 0.0 {
        v.iter_mut().for_each(|x| *x /= z);
    }
    z
}
