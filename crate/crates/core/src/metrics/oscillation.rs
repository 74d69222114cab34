use crate::marginals::SmoothedMarginals;

pub const MIN_ITERATIONS: usize = 6;
const SAME_TOL: f64 = 1e-6;
const MOVING_TOL: f64 = 1e-3;

fn distance(a: &SmoothedMarginals, b: &SmoothedMarginals) -> f64 {
    a.max_abs_diff(b).unwrap_or(f64::INFINITY)
}

/// Smallest period `p ≥ 2` such that, past a burn-in of the first third of
/// the iterations, marginals at iterations `k` and `k + p` agree within
/// 1e-6 while consecutive iterations differ by more than 1e-3. `None` for
/// converged or aperiodic runs, or fewer than six iterations.
pub fn oscillation_detector(history: &[SmoothedMarginals]) -> Option<usize> {
    let n = history.len();
    if n < MIN_ITERATIONS {
        return None;
    }
    let burn = n / 3;
    let tail = &history[burn..];
    if tail.windows(2).any(|w| distance(&w[0], &w[1]) <= MOVING_TOL) {
        return None;
    }
    (2..=tail.len() / 2).find(|&p| (0..tail.len() - p).all(|k| distance(&tail[k], &tail[k + p]) < SAME_TOL))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marginals::FactoredBelief;

    fn m(p: f64) -> SmoothedMarginals {
        SmoothedMarginals { slices: vec![FactoredBelief { marginals: vec![vec![p, 1.0 - p]] }], log_evidence: None }
    }

    #[test]
    fn alternating_has_period_two() {
        let h: Vec<_> = (0..8).map(|k| m(if k % 2 == 0 { 0.3 } else { 0.7 })).collect();
        assert_eq!(oscillation_detector(&h), Some(2));
    }

    #[test]
    fn period_three() {
        let h: Vec<_> = (0..12).map(|k| m([0.2, 0.5, 0.8][k % 3])).collect();
        assert_eq!(oscillation_detector(&h), Some(3));
    }

    #[test]
    fn converged_and_short_runs() {
        let h: Vec<_> = (0..8).map(|k| m(0.5 + 0.1 / (1 << (2 * k)) as f64)).collect();
        assert_eq!(oscillation_detector(&h), None);
        let short: Vec<_> = (0..5).map(|k| m(if k % 2 == 0 { 0.3 } else { 0.7 })).collect();
        assert_eq!(oscillation_detector(&short), None);
    }

    #[test]
    fn burn_in_is_ignored() {
        let mut h: Vec<_> = vec![m(0.9), m(0.1)];
        h.extend((0..7).map(|k| m(if k % 2 == 0 { 0.3 } else { 0.7 })));
        assert_eq!(oscillation_detector(&h), Some(2));
    }
}
