use crate::error::Result;
use crate::marginals::{check_same_shape, SmoothedMarginals};

/// `Δ_t = Σ_i Σ_s |P(X_t^i = s | y) − P̂(X_t^i = s | y)|`.
#[derive(Clone, Debug, PartialEq)]
pub struct L1Report {
    /// `per_t[t - 1]`
    pub per_t: Vec<f64>,
    pub total: f64,
    /// `per_node[t - 1][ordinal]`
    pub per_node: Vec<Vec<f64>>,
}

impl L1Report {
    pub fn max(&self) -> f64 {
        self.per_t.iter().copied().fold(0.0, f64::max)
    }
}

/// Errors with the first missing `(t, node, state)` key when the index sets differ.
pub fn l1_error(exact: &SmoothedMarginals, approx: &SmoothedMarginals) -> Result<L1Report> {
    check_same_shape(exact, approx)?;
    let per_node: Vec<Vec<f64>> = exact
        .slices
        .iter()
        .zip(&approx.slices)
        .map(|(a, b)| {
            a.marginals
                .iter()
                .zip(&b.marginals)
                .map(|(p, q)| p.iter().zip(q).map(|(x, y)| (x - y).abs()).sum())
                .collect()
        })
        .collect();
    let per_t: Vec<f64> = per_node.iter().map(|v| v.iter().sum()).collect();
    let total = per_t.iter().sum();
    Ok(L1Report { per_t, total, per_node })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marginals::FactoredBelief;

    fn one_slice(ms: Vec<Vec<f64>>) -> SmoothedMarginals {
        SmoothedMarginals { slices: vec![FactoredBelief { marginals: ms }], log_evidence: None }
    }

    #[test]
    fn worked_values() {
        let a = one_slice(vec![vec![0.75, 0.25]]);
        let b = one_slice(vec![vec![0.5, 0.5]]);
        assert_eq!(l1_error(&a, &b).unwrap().per_t, vec![0.5]);
        assert_eq!(l1_error(&a, &a).unwrap().total, 0.0);
        let x = one_slice(vec![vec![1.0, 0.0]; 3]);
        let y = one_slice(vec![vec![0.0, 1.0]; 3]);
        assert_eq!(l1_error(&x, &y).unwrap().per_t, vec![6.0]);
    }

    #[test]
    fn mismatch_names_key() {
        let a = one_slice(vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let b = one_slice(vec![vec![0.5, 0.5]]);
        let err = l1_error(&a, &b).unwrap_err();
        assert!(err.to_string().contains("t=1 node=1"), "{err}");
    }
}
