//! The frontier algorithm: sweep a set of nodes that d-separates past from
//! future across each slice boundary, one add or remove at a time.

use std::fmt;

use crate::error::{Caps, DbnError, Result};
use crate::factor::Factor;
use crate::marginals::{FactoredBelief, SmoothedMarginals};
use crate::model::{CptRole, DiscreteDbn, EvidenceSequence, Lag, NodeCpt};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrontierAction {
    /// Move hidden node `i` of slice `t` into the frontier.
    Add(usize),
    /// Drop hidden node `i` of slice `t-1` from the frontier.
    Remove(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrontierStep {
    pub action: FrontierAction,
    /// Members after the action.
    pub members: usize,
    /// Number of entries in the frontier joint after the action.
    pub joint_size: u128,
}

/// The time-invariant sequence of actions carrying `α_{t-1}` to `α_t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrontierSchedule {
    pub steps: Vec<FrontierStep>,
    /// Members before the first action (all hidden nodes of slice `t-1`).
    pub initial_members: usize,
}

impl FrontierSchedule {
    pub fn actions(&self) -> impl Iterator<Item = FrontierAction> + '_ {
        self.steps.iter().map(|s| s.action)
    }

    pub fn max_members(&self) -> usize {
        self.steps.iter().map(|s| s.members).max().unwrap_or(0).max(self.initial_members)
    }

    pub fn max_joint_size(&self) -> u128 {
        self.steps.iter().map(|s| s.joint_size).max().unwrap_or(1)
    }
}

/// Membership of hidden nodes during a slice transition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrontierState {
    /// slice `t-1` nodes still in the frontier
    pub previous: Vec<bool>,
    /// slice `t` nodes already added
    pub current: Vec<bool>,
}

impl FrontierState {
    fn start(dbn: &DiscreteDbn) -> Self {
        let n = dbn.num_nodes();
        let mut previous = vec![false; n];
        for &h in dbn.hidden() {
            previous[h] = true;
        }
        FrontierState { previous, current: vec![false; n] }
    }

    pub fn can_remove(&self, dbn: &DiscreteDbn, j: usize) -> bool {
        self.previous[j] && dbn.inter_children(j).filter(|&c| dbn.node(c).is_hidden()).all(|c| self.current[c])
    }

    pub fn can_add(&self, dbn: &DiscreteDbn, i: usize) -> bool {
        !self.current[i]
            && dbn.inter_parents(i).all(|p| self.previous[p])
            && dbn.intra_parents(i).all(|p| self.current[p])
    }

    pub fn joint_size(&self, dbn: &DiscreteDbn) -> u128 {
        dbn.hidden()
            .iter()
            .map(|&h| {
                let a = dbn.arity(h) as u128;
                let prev = if self.previous[h] { a } else { 1 };
                let cur = if self.current[h] { a } else { 1 };
                prev * cur
            })
            .product()
    }

    pub fn members(&self) -> usize {
        self.previous.iter().chain(&self.current).filter(|&&m| m).count()
    }
}

/// Greedy schedule: remove whenever some removal is legal (lowest index
/// first), otherwise add the legal node giving the smallest joint (ties to the
/// lowest index).
pub fn choose_frontier_schedule(dbn: &DiscreteDbn) -> Result<FrontierSchedule> {
    dbn.require_regular()?;
    let mut state = FrontierState::start(dbn);
    let initial_members = state.members();
    let hidden = dbn.hidden();
    let mut steps = Vec::with_capacity(2 * hidden.len());
    loop {
        let action = if let Some(&j) = hidden.iter().find(|&&j| state.can_remove(dbn, j)) {
            state.previous[j] = false;
            FrontierAction::Remove(j)
        } else if let Some(&i) = hidden
            .iter()
            .filter(|&&i| state.can_add(dbn, i))
            .min_by_key(|&&i| (state.joint_size(dbn) * dbn.arity(i) as u128, i))
        {
            state.current[i] = true;
            FrontierAction::Add(i)
        } else {
            break;
        };
        steps.push(FrontierStep { action, members: state.members(), joint_size: state.joint_size(dbn) });
    }
    if hidden.iter().any(|&h| !state.current[h] || state.previous[h]) {
        return Err(DbnError::NotRegular("no legal frontier action left before the slice was complete".into()));
    }
    Ok(FrontierSchedule { steps, initial_members })
}

/// One line of the frontier trace.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceStep {
    /// Slice being entered (`2..=T`).
    pub slice: usize,
    pub action: FrontierAction,
    pub node: String,
    pub members: usize,
    pub joint_size: u128,
}

impl fmt::Display for TraceStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (sign, t) = match self.action {
            FrontierAction::Add(_) => ('+', self.slice),
            FrontierAction::Remove(_) => ('-', self.slice - 1),
        };
        write!(f, "slice {}: {sign}{}[{t}] (frontier size {}, joint {})", self.slice, self.node, self.members, self.joint_size)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrontierRun {
    pub marginals: SmoothedMarginals,
    pub schedule: FrontierSchedule,
    pub trace: Vec<TraceStep>,
}

impl FrontierRun {
    pub fn trace_text(&self) -> String {
        self.trace.iter().map(|s| format!("{s}\n")).collect()
    }
}

fn cpt_factor(cpt: &NodeCpt, child_var: usize, n: usize) -> Factor {
    Factor::from_cpt(cpt, child_var, |k| match cpt.parents[k].lag {
        Lag::Previous => cpt.parents[k].node,
        Lag::Current => n + cpt.parents[k].node,
    })
}

/// Product of the slice-`t` observation likelihoods as factors over current-slice ids.
fn evidence_factors(dbn: &DiscreteDbn, evidence: &EvidenceSequence, t: usize) -> Vec<Factor> {
    let n = dbn.num_nodes();
    let role = CptRole::for_slice(t);
    dbn.observed()
        .iter()
        .filter_map(|&o| {
            let y = evidence.get(t, o)?;
            let cpt = dbn.cpt(o, role);
            let vars: Vec<usize> = cpt.parents.iter().map(|p| n + p.node).collect();
            let table = &cpt.table;
            let values = (0..table.num_configs()).map(|c| table.prob(y, c)).collect();
            Some(Factor::new(vars, table.parent_arities().to_vec(), values))
        })
        .collect()
}

fn normalize_checked(f: &mut Factor, t: usize, log_evidence: &mut f64) -> Result<()> {
    let z = f.normalize();
    if !(z > 0.0) {
        return Err(DbnError::ZeroProbabilityEvidence { t });
    }
    *log_evidence += z.ln();
    Ok(())
}

/// Exact smoothing by the frontier algorithm. Also reports `log P(y_{1:T})`.
pub fn frontier_smoother(dbn: &DiscreteDbn, evidence: &EvidenceSequence, caps: &Caps) -> Result<FrontierRun> {
    evidence.check_compatible(dbn)?;
    dbn.require_leaf_observations()?;
    let schedule = choose_frontier_schedule(dbn)?;
    let n = dbn.num_nodes();
    let hidden = dbn.hidden();
    let horizon = evidence.horizon();
    let cur_vars: Vec<usize> = hidden.iter().map(|&h| n + h).collect();
    let cur_cards: Vec<usize> = hidden.iter().map(|&h| dbn.arity(h)).collect();

    let slice_joint: u128 = cur_cards.iter().map(|&a| a as u128).product();
    let worst = if horizon > 1 { schedule.max_joint_size().max(slice_joint) } else { slice_joint };
    if worst > caps.frontier_joint as u128 {
        let largest = if horizon > 1 {
            let mut state = FrontierState::start(dbn);
            let mut best = (state.joint_size(dbn), describe_members(dbn, &state));
            for step in &schedule.steps {
                match step.action {
                    FrontierAction::Add(i) => state.current[i] = true,
                    FrontierAction::Remove(j) => state.previous[j] = false,
                }
                if state.joint_size(dbn) > best.0 {
                    best = (state.joint_size(dbn), describe_members(dbn, &state));
                }
            }
            best.1
        } else {
            describe_members(dbn, &FrontierState { previous: vec![false; n], current: vec![true; n] })
        };
        return Err(DbnError::CapExceeded { what: format!("frontier {{{largest}}}"), size: worst, cap: caps.frontier_joint as u128 });
    }

    let mut log_evidence = 0.0;
    let mut alphas: Vec<Factor> = Vec::with_capacity(horizon);

    let mut f = Factor::constant(cur_vars.clone(), cur_cards.clone(), 1.0);
    for &h in dbn.slice_order().iter().filter(|&&h| dbn.node(h).is_hidden()) {
        f = f.product(&cpt_factor(dbn.cpt(h, CptRole::Prior), n + h, n));
    }
    for e in evidence_factors(dbn, evidence, 1) {
        f = f.product(&e);
    }
    normalize_checked(&mut f, 1, &mut log_evidence)?;
    alphas.push(f.marginal(&cur_vars));

    for t in 2..=horizon {
        let mut f = alphas[t - 2].clone();
        f.relabel(|v| v - n);
        for action in schedule.actions() {
            f = match action {
                FrontierAction::Add(i) => f.product(&cpt_factor(dbn.cpt(i, CptRole::Transition), n + i, n)),
                FrontierAction::Remove(j) => f.sum_out(j),
            };
            normalize_checked(&mut f, t, &mut log_evidence)?;
        }
        for e in evidence_factors(dbn, evidence, t) {
            f = f.product(&e);
        }
        normalize_checked(&mut f, t, &mut log_evidence)?;
        alphas.push(f.marginal(&cur_vars));
    }

    let mut beta = Factor::constant(cur_vars.clone(), cur_cards.clone(), 1.0);
    beta.normalize();
    let mut betas = vec![beta.clone(); horizon];
    for t in (2..=horizon).rev() {
        let mut f = betas[t - 1].clone();
        for e in evidence_factors(dbn, evidence, t) {
            f = f.product(&e);
        }
        for action in schedule.actions().collect::<Vec<_>>().into_iter().rev() {
            if let FrontierAction::Add(i) = action {
                f = f.product(&cpt_factor(dbn.cpt(i, CptRole::Transition), n + i, n)).sum_out(n + i);
                if !(f.normalize() > 0.0) {
                    return Err(DbnError::ZeroProbabilityEvidence { t });
                }
            }
        }
        let prev_vars: Vec<usize> = hidden.to_vec();
        let mut b = Factor::constant(prev_vars.clone(), cur_cards.clone(), 1.0).product(&f).marginal(&prev_vars);
        b.relabel(|v| v + n);
        if !(b.normalize() > 0.0) {
            return Err(DbnError::ZeroProbabilityEvidence { t });
        }
        betas[t - 2] = b;
    }

    let slices = alphas
        .iter()
        .zip(&betas)
        .enumerate()
        .map(|(k, (a, b))| {
            let mut g = a.product(b);
            if !(g.normalize() > 0.0) {
                return Err(DbnError::ZeroProbabilityEvidence { t: k + 1 });
            }
            let marginals = cur_vars.iter().map(|&v| g.marginal(&[v]).values().to_vec()).collect();
            Ok(FactoredBelief { marginals })
        })
        .collect::<Result<Vec<_>>>()?;

    let trace = (2..=horizon)
        .flat_map(|t| {
            schedule.steps.iter().map(move |s| {
                let node = match s.action {
                    FrontierAction::Add(i) | FrontierAction::Remove(i) => dbn.node(i).name.clone(),
                };
                TraceStep { slice: t, action: s.action, node, members: s.members, joint_size: s.joint_size }
            })
        })
        .collect();

    Ok(FrontierRun { marginals: SmoothedMarginals { slices, log_evidence: Some(log_evidence) }, schedule, trace })
}

fn describe_members(dbn: &DiscreteDbn, state: &FrontierState) -> String {
    let mut names = Vec::new();
    for &h in dbn.hidden() {
        if state.previous[h] {
            names.push(format!("{}[t-1]", dbn.node(h).name));
        }
    }
    for &h in dbn.hidden() {
        if state.current[h] {
            names.push(format!("{}[t]", dbn.node(h).name));
        }
    }
    names.join(", ")
}
