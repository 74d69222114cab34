use crate::marginals::{normalize, FactoredBelief, SmoothedMarginals, MARGINAL_SUM_TOL};
use crate::model::{decode_mixed_radix, DiscreteDbn};

/// Forward, backward and smoothed factored beliefs. Components are single
/// nodes for FF and clusters for BK; each component distribution is
/// mixed-radix over its members.
#[derive(Clone, Debug, PartialEq)]
pub struct ApproxBeliefTrajectory {
    /// Member node indices of each component.
    pub components: Vec<Vec<usize>>,
    pub component_arities: Vec<Vec<usize>>,
    /// `forward[t - 1][component]`
    pub forward: Vec<Vec<Vec<f64>>>,
    pub backward: Vec<Vec<Vec<f64>>>,
    pub smoothed: Vec<Vec<Vec<f64>>>,
    /// `(component, position)` of each hidden ordinal
    locate: Vec<(usize, usize)>,
    hidden_arities: Vec<usize>,
}

impl ApproxBeliefTrajectory {
    pub(crate) fn new(dbn: &DiscreteDbn, components: Vec<Vec<usize>>, horizon: usize) -> Self {
        let component_arities: Vec<Vec<usize>> =
            components.iter().map(|c| c.iter().map(|&i| dbn.arity(i)).collect()).collect();
        let mut locate = vec![(0, 0); dbn.num_hidden()];
        for (k, members) in components.iter().enumerate() {
            for (pos, &m) in members.iter().enumerate() {
                locate[dbn.hidden_ordinal(m).expect("hidden member")] = (k, pos);
            }
        }
        let empty: Vec<Vec<f64>> = component_arities.iter().map(|a| vec![0.0; a.iter().product()]).collect();
        ApproxBeliefTrajectory {
            components,
            component_arities,
            forward: vec![empty.clone(); horizon],
            backward: vec![empty.clone(); horizon],
            smoothed: vec![empty; horizon],
            locate,
            hidden_arities: dbn.hidden_arities(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.smoothed.len()
    }

    pub fn is_normalized(&self) -> bool {
        [&self.forward, &self.backward, &self.smoothed].iter().all(|beliefs| {
            beliefs.iter().flatten().all(|d| (d.iter().sum::<f64>() - 1.0).abs() <= MARGINAL_SUM_TOL)
        })
    }

    fn node_view(&self, beliefs: &[Vec<Vec<f64>>]) -> Vec<FactoredBelief> {
        let mut digits = Vec::new();
        beliefs
            .iter()
            .map(|slice| {
                let marginals = self
                    .locate
                    .iter()
                    .enumerate()
                    .map(|(ord, &(k, pos))| {
                        if self.components[k].len() == 1 {
                            return slice[k].clone();
                        }
                        digits.resize(self.components[k].len(), 0);
                        let mut m = vec![0.0; self.hidden_arities[ord]];
                        for (state, &p) in slice[k].iter().enumerate() {
                            decode_mixed_radix(state, &self.component_arities[k], &mut digits);
                            m[digits[pos]] += p;
                        }
                        normalize(&mut m);
                        m
                    })
                    .collect();
                FactoredBelief { marginals }
            })
            .collect()
    }

    /// Smoothed per-node marginals.
    pub fn marginals(&self) -> SmoothedMarginals {
        SmoothedMarginals { slices: self.node_view(&self.smoothed), log_evidence: None }
    }

    /// Filtered per-node marginals (forward beliefs).
    pub fn filtered(&self) -> SmoothedMarginals {
        SmoothedMarginals { slices: self.node_view(&self.forward), log_evidence: None }
    }
}

/// Normalizes; a vanished distribution becomes uniform with a warning.
pub(crate) fn normalize_or_uniform(v: &mut [f64], what: impl FnOnce() -> String) {
    let z = normalize(v);
    if !(z > 0.0 && z.is_finite()) {
        log::warn!("{} vanished; replaced by uniform", what());
        let u = 1.0 / v.len() as f64;
        v.iter_mut().for_each(|x| *x = u);
    }
}
