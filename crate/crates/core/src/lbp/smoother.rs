//! Iterated message passing with forward-backward or flooding schedules.

use std::io::Write;
use std::str::FromStr;

use super::messages::{compute_lambda_messages, compute_pi_message, damp, max_abs, node_lambda, node_pi, MessageStore};
use super::network::BeliefNetwork;
use crate::error::{DbnError, Result};
use crate::marginals::{normalize, FactoredBelief, SmoothedMarginals};
use crate::metrics::l1_error;
use crate::model::decode_mixed_radix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schedule {
    /// All π messages in topological order, then all λ messages in reverse.
    ForwardBackward,
    /// Every message recomputed from the previous iteration's store.
    Flooding,
}

impl FromStr for Schedule {
    type Err = DbnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fb" | "forward-backward" => Ok(Schedule::ForwardBackward),
            "flooding" => Ok(Schedule::Flooding),
            other => Err(DbnError::InvalidConfig(format!("unknown schedule {other:?} (expected fb or flooding)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LbpConfig {
    pub schedule: Schedule,
    pub max_iterations: usize,
    /// Weight of the old message, in `[0, 1]`.
    pub damping: f64,
    /// Convergence threshold on the largest message change in an iteration.
    pub tol: f64,
}

impl Default for LbpConfig {
    fn default() -> Self {
        LbpConfig { schedule: Schedule::ForwardBackward, max_iterations: 20, damping: 0.0, tol: 1e-8 }
    }
}

impl LbpConfig {
    pub fn iterations(max_iterations: usize) -> Self {
        LbpConfig { max_iterations, ..LbpConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.damping) {
            return Err(DbnError::InvalidConfig(format!("damping must lie in [0, 1], got {}", self.damping)));
        }
        if self.max_iterations == 0 {
            return Err(DbnError::InvalidConfig("max_iterations must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(DbnError::InvalidConfig(format!("convergence tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub max_delta: f64,
    pub l1_total: Option<f64>,
    pub l1_per_t: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct LbpTrace {
    pub records: Vec<IterationRecord>,
    pub converged: bool,
}

impl LbpTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    /// CSV with columns `iteration,max_message_delta,l1_error_total` and, when
    /// per-timestep errors were recorded, `l1_t1..l1_tT`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let horizon = self.records.iter().find_map(|r| r.l1_per_t.as_ref().map(Vec::len)).unwrap_or(0);
        let mut header = vec!["iteration".to_string(), "max_message_delta".into(), "l1_error_total".into()];
        header.extend((1..=horizon).map(|t| format!("l1_t{t}")));
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![r.iteration.to_string(), format!("{:e}", r.max_delta), r.l1_total.map(|v| format!("{v:e}")).unwrap_or_default()];
            match &r.l1_per_t {
                Some(per_t) => row.extend(per_t.iter().map(|v| format!("{v:e}"))),
                None => row.extend(std::iter::repeat_n(String::new(), horizon)),
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
pub struct LbpOptions<'a> {
    /// Exact marginals for the per-iteration L1 trace.
    pub reference: Option<&'a SmoothedMarginals>,
    /// Keep the marginals after every iteration.
    pub record_history: bool,
    /// Start from this store instead of uniform messages.
    pub initial_store: Option<MessageStore>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LbpRun {
    pub marginals: SmoothedMarginals,
    pub trace: LbpTrace,
    pub store: MessageStore,
    pub history: Vec<SmoothedMarginals>,
}

/// Runs message passing until the largest change in an iteration falls
/// below `config.tol` or `config.max_iterations` is reached. Non-convergence
/// is reported in the trace, not as an error.
pub fn lbp_smoother(net: &BeliefNetwork, config: &LbpConfig, options: LbpOptions<'_>) -> Result<LbpRun> {
    config.validate()?;
    let mut store = options.initial_store.unwrap_or_else(|| MessageStore::uniform(net));
    let mut trace = LbpTrace::default();
    let mut history = Vec::new();
    for iteration in 1..=config.max_iterations {
        let max_delta = match config.schedule {
            Schedule::ForwardBackward => fb_sweep(net, &mut store, config.damping),
            Schedule::Flooding => flooding_sweep(net, &mut store, config.damping),
        };
        let needs_marginals = options.reference.is_some() || options.record_history;
        let mut record = IterationRecord { iteration, max_delta, l1_total: None, l1_per_t: None };
        if needs_marginals {
            let m = read_marginals(net, &store);
            if let Some(reference) = options.reference {
                let report = l1_error(reference, &m)?;
                record.l1_total = Some(report.total);
                record.l1_per_t = Some(report.per_t);
            }
            if options.record_history {
                history.push(m);
            }
        }
        trace.records.push(record);
        if max_delta < config.tol {
            trace.converged = true;
            break;
        }
    }
    let marginals = read_marginals(net, &store);
    Ok(LbpRun { marginals, trace, store, history })
}

/// One forward-backward iteration; returns the largest message change.
pub fn fb_sweep(net: &BeliefNetwork, store: &mut MessageStore, mu: f64) -> f64 {
    let mut delta: f64 = 0.0;
    for x in net.order() {
        if net.child_edges(x).is_empty() {
            continue;
        }
        let pi_x = node_pi(net, store, x);
        for &e in net.child_edges(x) {
            let new = damp(&store.pi[e], &compute_pi_message(net, store, e, &pi_x), mu);
            delta = delta.max(max_abs(&new, &store.pi[e]));
            store.pi[e] = new;
        }
    }
    for x in net.order().rev() {
        if net.parent_edges(x).is_empty() {
            continue;
        }
        let lambda_x = node_lambda(net, store, x);
        let msgs = compute_lambda_messages(net, store, x, &lambda_x);
        for (&e, m) in net.parent_edges(x).iter().zip(msgs) {
            let new = damp(&store.lambda[e], &m, mu);
            delta = delta.max(max_abs(&new, &store.lambda[e]));
            store.lambda[e] = new;
        }
    }
    delta
}

/// One synchronous iteration; returns the largest message change.
pub fn flooding_sweep(net: &BeliefNetwork, store: &mut MessageStore, mu: f64) -> f64 {
    let old = store.clone();
    let mut delta: f64 = 0.0;
    for x in net.order() {
        if !net.child_edges(x).is_empty() {
            let pi_x = node_pi(net, &old, x);
            for &e in net.child_edges(x) {
                let new = damp(&old.pi[e], &compute_pi_message(net, &old, e, &pi_x), mu);
                delta = delta.max(max_abs(&new, &old.pi[e]));
                store.pi[e] = new;
            }
        }
        if !net.parent_edges(x).is_empty() {
            let lambda_x = node_lambda(net, &old, x);
            let msgs = compute_lambda_messages(net, &old, x, &lambda_x);
            for (&e, m) in net.parent_edges(x).iter().zip(msgs) {
                let new = damp(&old.lambda[e], &m, mu);
                delta = delta.max(max_abs(&new, &old.lambda[e]));
                store.lambda[e] = new;
            }
        }
    }
    delta
}

/// Normalized `π_X · λ_X` for every network node.
pub fn node_beliefs(net: &BeliefNetwork, store: &MessageStore) -> Vec<Vec<f64>> {
    net.order()
        .map(|x| {
            let pi = node_pi(net, store, x);
            let lambda = node_lambda(net, store, x);
            let mut b: Vec<f64> = pi.iter().zip(&lambda).map(|(p, l)| p * l).collect();
            if !(normalize(&mut b) > 0.0) {
                log::warn!("belief of {} vanished; reporting uniform", net.node(x).label);
                let u = 1.0 / b.len() as f64;
                b.iter_mut().for_each(|v| *v = u);
            }
            b
        })
        .collect()
}

/// Per-hidden-node marginals read off the network's beliefs.
pub fn read_marginals(net: &BeliefNetwork, store: &MessageStore) -> SmoothedMarginals {
    let beliefs = node_beliefs(net, store);
    let arities = net.hidden_arities();
    let mut digits = Vec::new();
    let slices = (1..=net.horizon())
        .map(|t| {
            let marginals = (0..arities.len())
                .map(|ord| {
                    let (id, pos) = net.readout(t, ord);
                    let node = net.node(id);
                    if node.members.len() == 1 {
                        return beliefs[id].clone();
                    }
                    digits.resize(node.members.len(), 0);
                    let mut m = vec![0.0; arities[ord]];
                    for (state, &p) in beliefs[id].iter().enumerate() {
                        decode_mixed_radix(state, &node.member_arities, &mut digits);
                        m[digits[pos]] += p;
                    }
                    normalize(&mut m);
                    m
                })
                .collect();
            FactoredBelief { marginals }
        })
        .collect();
    SmoothedMarginals { slices, log_evidence: None }
}
