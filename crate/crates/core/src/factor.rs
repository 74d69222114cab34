//! Dense discrete factors over integer-labelled variables.
//!
//! Values are row-major with the first variable most significant.

use crate::model::NodeCpt;

#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    vars: Vec<usize>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

/// Stride of each of `target` within a factor over `vars`/`cards`; 0 when absent.
fn strides_in(vars: &[usize], cards: &[usize], target: &[usize]) -> Vec<usize> {
    let mut own = vec![0usize; vars.len()];
    let mut s = 1;
    for k in (0..vars.len()).rev() {
        own[k] = s;
        s *= cards[k];
    }
    target
        .iter()
        .map(|v| vars.iter().position(|w| w == v).map_or(0, |k| own[k]))
        .collect()
}

/// Walks every assignment of `cards` (last position fastest), calling `f`
/// with the running offsets into each strided source.
fn for_each_offsets<const K: usize>(cards: &[usize], strides: [&[usize]; K], mut f: impl FnMut(usize, [usize; K])) {
    let total: usize = cards.iter().product();
    let mut counter = vec![0usize; cards.len()];
    let mut offsets = [0usize; K];
    for linear in 0..total {
        f(linear, offsets);
        for k in (0..cards.len()).rev() {
            counter[k] += 1;
            for (o, s) in offsets.iter_mut().zip(strides.iter()) {
                *o += s[k];
            }
            if counter[k] < cards[k] {
                break;
            }
            for (o, s) in offsets.iter_mut().zip(strides.iter()) {
                *o -= s[k] * cards[k];
            }
            counter[k] = 0;
        }
    }
}

impl Factor {
    pub fn new(vars: Vec<usize>, cards: Vec<usize>, values: Vec<f64>) -> Self {
        assert_eq!(vars.len(), cards.len());
        assert_eq!(values.len(), cards.iter().product::<usize>(), "factor table size");
        Factor { vars, cards, values }
    }

    /// The scalar factor 1.
    pub fn unit() -> Self {
        Factor { vars: vec![], cards: vec![], values: vec![1.0] }
    }

    pub fn constant(vars: Vec<usize>, cards: Vec<usize>, value: f64) -> Self {
        let size = cards.iter().product();
        Factor::new(vars, cards, vec![value; size])
    }

    /// A CPT as a factor over `[parents..., child]`, mapping each parent to a
    /// variable id with `parent_var`.
    pub fn from_cpt(cpt: &NodeCpt, child_var: usize, parent_var: impl Fn(usize) -> usize) -> Self {
        let mut vars: Vec<usize> = (0..cpt.parents.len()).map(&parent_var).collect();
        vars.push(child_var);
        let mut cards = cpt.table.parent_arities().to_vec();
        cards.push(cpt.table.child_arity());
        Factor::new(vars, cards, cpt.table.values().to_vec())
    }

    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn contains(&self, var: usize) -> bool {
        self.vars.contains(&var)
    }

    pub fn card_of(&self, var: usize) -> Option<usize> {
        self.vars.iter().position(|&v| v == var).map(|k| self.cards[k])
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Scales to unit mass and returns the previous mass. A zero-mass factor is left untouched.
    pub fn normalize(&mut self) -> f64 {
        let z = self.sum();
        if z > 0.0 {
            self.values.iter_mut().for_each(|v| *v /= z);
        }
        z
    }

    pub fn relabel(&mut self, map: impl Fn(usize) -> usize) {
        self.vars.iter_mut().for_each(|v| *v = map(*v));
    }

    pub fn product(&self, other: &Factor) -> Factor {
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        for (&v, &c) in other.vars.iter().zip(&other.cards) {
            if let Some(k) = vars.iter().position(|&w| w == v) {
                assert_eq!(cards[k], c, "cardinality mismatch for variable {v}");
            } else {
                vars.push(v);
                cards.push(c);
            }
        }
        let sa = strides_in(&self.vars, &self.cards, &vars);
        let sb = strides_in(&other.vars, &other.cards, &vars);
        let mut values = vec![0.0; cards.iter().product()];
        for_each_offsets(&cards, [&sa, &sb], |linear, [a, b]| {
            values[linear] = self.values[a] * other.values[b];
        });
        Factor { vars, cards, values }
    }

    /// Sums out every variable not in `keep`; the result is ordered as `keep`
    /// (variables of `keep` absent from the factor are skipped).
    pub fn marginal(&self, keep: &[usize]) -> Factor {
        let kept: Vec<usize> = keep.iter().copied().filter(|v| self.vars.contains(v)).collect();
        let kept_cards: Vec<usize> = kept.iter().map(|&v| self.card_of(v).unwrap()).collect();
        let dest = strides_in(&kept, &kept_cards, &self.vars);
        let own = strides_in(&self.vars, &self.cards, &self.vars);
        let mut values = vec![0.0; kept_cards.iter().product()];
        for_each_offsets(&self.cards, [&own, &dest], |_, [src, dst]| {
            values[dst] += self.values[src];
        });
        Factor { vars: kept, cards: kept_cards, values }
    }

    pub fn sum_out(&self, var: usize) -> Factor {
        let keep: Vec<usize> = self.vars.iter().copied().filter(|&v| v != var).collect();
        self.marginal(&keep)
    }

    /// Value at an assignment given in this factor's variable order.
    pub fn value(&self, assignment: &[usize]) -> f64 {
        let idx = assignment.iter().zip(&self.cards).fold(0, |acc, (&x, &c)| acc * c + x);
        self.values[idx]
    }
}
