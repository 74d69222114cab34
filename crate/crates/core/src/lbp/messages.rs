//! π/λ message store and Pearl's sum-product updates on a directed network.

use log::warn;

use super::network::BeliefNetwork;
use crate::model::decode_mixed_radix;

/// Messages per edge, both over the parent's states.
#[derive(Clone, Debug, PartialEq)]
pub struct MessageStore {
    pub pi: Vec<Vec<f64>>,
    pub lambda: Vec<Vec<f64>>,
}

impl MessageStore {
    pub fn uniform(net: &BeliefNetwork) -> Self {
        let msgs: Vec<Vec<f64>> = net
            .edges()
            .iter()
            .map(|&(u, _)| {
                let a = net.node(u).arity;
                vec![1.0 / a as f64; a]
            })
            .collect();
        MessageStore { pi: msgs.clone(), lambda: msgs }
    }

    /// Largest entrywise absolute difference over all messages.
    pub fn max_delta(&self, other: &MessageStore) -> f64 {
        let pairs = self.pi.iter().zip(&other.pi).chain(self.lambda.iter().zip(&other.lambda));
        pairs
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

/// `(max delta < tol, max delta)`.
pub fn detect_fixed_point(before: &MessageStore, after: &MessageStore, tol: f64) -> (bool, f64) {
    let delta = before.max_delta(after);
    (delta < tol, delta)
}

/// Normalizes a computed message; a zero or non-finite message becomes uniform.
pub(crate) fn finish_message(mut m: Vec<f64>, what: impl FnOnce() -> String) -> Vec<f64> {
    let z: f64 = m.iter().sum();
    if z > 0.0 && z.is_finite() {
        m.iter_mut().for_each(|v| *v /= z);
    } else {
        warn!("{} vanished; replaced by uniform", what());
        let u = 1.0 / m.len() as f64;
        m.iter_mut().for_each(|v| *v = u);
    }
    m
}

/// `(1 - mu) * computed + mu * old`, renormalized. `mu = 1` returns `old` unchanged.
pub fn damp(old: &[f64], computed: &[f64], mu: f64) -> Vec<f64> {
    if mu == 0.0 {
        return computed.to_vec();
    }
    if mu == 1.0 {
        return old.to_vec();
    }
    let mut m: Vec<f64> = computed.iter().zip(old).map(|(c, o)| (1.0 - mu) * c + mu * o).collect();
    let z: f64 = m.iter().sum();
    m.iter_mut().for_each(|v| *v /= z);
    m
}

/// Causal support `π_X(x) = Σ_u P(x | u) Π_k π_{U_k→X}(u_k)`, normalized.
pub fn node_pi(net: &BeliefNetwork, store: &MessageStore, x: usize) -> Vec<f64> {
    let node = net.node(x);
    let table = net.table(x);
    let arity = node.arity;
    let pe = net.parent_edges(x);
    let mut out = vec![0.0; arity];
    if pe.is_empty() {
        out.copy_from_slice(&table[..arity]);
        return out;
    }
    let parent_arities = net.parent_arities(x);
    let mut digits = vec![0usize; pe.len()];
    for (config, row) in table.chunks(arity).enumerate() {
        decode_mixed_radix(config, &parent_arities, &mut digits);
        let w: f64 = pe.iter().zip(&digits).map(|(&e, &d)| store.pi[e][d]).product();
        if w == 0.0 {
            continue;
        }
        for (o, &p) in out.iter_mut().zip(row) {
            *o += w * p;
        }
    }
    finish_message(out, || format!("causal support of {}", node.label))
}

/// Diagnostic support `λ_X(x) = e_X(x) Π_children λ_{C→X}(x)` (unnormalized product of normalized terms).
pub fn node_lambda(net: &BeliefNetwork, store: &MessageStore, x: usize) -> Vec<f64> {
    let mut out = net.node(x).evidence.clone();
    for &e in net.child_edges(x) {
        for (o, l) in out.iter_mut().zip(&store.lambda[e]) {
            *o *= l;
        }
    }
    out
}

/// π message along `edge` given the sender's causal support.
pub fn compute_pi_message(net: &BeliefNetwork, store: &MessageStore, edge: usize, pi_x: &[f64]) -> Vec<f64> {
    let (x, _) = net.edges()[edge];
    let mut m: Vec<f64> = pi_x.iter().zip(&net.node(x).evidence).map(|(p, e)| p * e).collect();
    for &e in net.child_edges(x) {
        if e != edge {
            for (o, l) in m.iter_mut().zip(&store.lambda[e]) {
                *o *= l;
            }
        }
    }
    finish_message(m, || format!("pi message {} -> {}", net.node(x).label, net.node(net.edges()[edge].1).label))
}

/// λ messages from `x` to each of its parents (in parent order), given `x`'s
/// diagnostic support.
pub fn compute_lambda_messages(net: &BeliefNetwork, store: &MessageStore, x: usize, lambda_x: &[f64]) -> Vec<Vec<f64>> {
    let pe = net.parent_edges(x);
    if pe.is_empty() {
        return Vec::new();
    }
    let node = net.node(x);
    let table = net.table(x);
    let parent_arities = net.parent_arities(x);
    let k = pe.len();
    let mut out: Vec<Vec<f64>> = parent_arities.iter().map(|&a| vec![0.0; a]).collect();
    let mut digits = vec![0usize; k];
    let mut prefix = vec![1.0; k + 1];
    let mut suffix = vec![1.0; k + 1];
    for (config, row) in table.chunks(node.arity).enumerate() {
        let g: f64 = row.iter().zip(lambda_x).map(|(p, l)| p * l).sum();
        if g == 0.0 {
            continue;
        }
        decode_mixed_radix(config, &parent_arities, &mut digits);
        for j in 0..k {
            prefix[j + 1] = prefix[j] * store.pi[pe[j]][digits[j]];
        }
        for j in (0..k).rev() {
            suffix[j] = suffix[j + 1] * store.pi[pe[j]][digits[j]];
        }
        for j in 0..k {
            out[j][digits[j]] += g * prefix[j] * suffix[j + 1];
        }
    }
    out.into_iter()
        .zip(pe)
        .map(|(m, &e)| finish_message(m, || format!("lambda message {} -> {}", node.label, net.node(net.edges()[e].0).label)))
        .collect()
}

/// Recomputes and stores the π message on `edge` with damping `mu`; returns the change.
pub fn send_pi_message(net: &BeliefNetwork, store: &mut MessageStore, edge: usize, mu: f64) -> f64 {
    let (x, _) = net.edges()[edge];
    let pi_x = node_pi(net, store, x);
    let computed = compute_pi_message(net, store, edge, &pi_x);
    let new = damp(&store.pi[edge], &computed, mu);
    let delta = max_abs(&new, &store.pi[edge]);
    store.pi[edge] = new;
    delta
}

/// Recomputes and stores the λ message on `edge` with damping `mu`; returns the change.
pub fn send_lambda_message(net: &BeliefNetwork, store: &mut MessageStore, edge: usize, mu: f64) -> f64 {
    let (_, x) = net.edges()[edge];
    let lambda_x = node_lambda(net, store, x);
    let pos = net.parent_edges(x).iter().position(|&e| e == edge).expect("edge into x");
    let computed = compute_lambda_messages(net, store, x, &lambda_x).swap_remove(pos);
    let new = damp(&store.lambda[edge], &computed, mu);
    let delta = max_abs(&new, &store.lambda[edge]);
    store.lambda[edge] = new;
    delta
}

pub(crate) fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
