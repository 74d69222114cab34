//! Discrete dynamic Bayesian network representation.
//!
//! A [`DiscreteDbn`] is a two-slice template: a list of nodes, edges inside a
//! slice, edges from slice `t-1` into slice `t`, and for every node a
//! prior-form CPT (used in slice 1) and a transition-form CPT (used in slices
//! `2..=T`). Parent configurations are indexed mixed-radix with the first
//! declared parent most significant, and each CPT row (one parent
//! configuration) is stored contiguously over child values.

pub mod builders;
pub mod evidence;
pub mod io;
pub mod regular;
pub mod unroll;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{DbnError, Result};

pub use builders::{
    build_chmm, build_factorial_hmm, build_hmm, build_water_network, build_water_network_truncated,
};
pub use evidence::{sample_evidence, EvidenceSequence};
pub use regular::{validate_regular, RegularityReport, Violation};
pub use unroll::{unroll, UnrolledNetwork, UnrolledNode};

/// Row-sum tolerance for conditional tables.
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Hidden,
    Observed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub name: String,
    pub arity: usize,
    pub kind: NodeKind,
}

impl NodeSpec {
    pub fn hidden(name: impl Into<String>, arity: usize) -> Self {
        NodeSpec { name: name.into(), arity, kind: NodeKind::Hidden }
    }

    pub fn observed(name: impl Into<String>, arity: usize) -> Self {
        NodeSpec { name: name.into(), arity, kind: NodeKind::Observed }
    }

    pub fn is_hidden(&self) -> bool {
        self.kind == NodeKind::Hidden
    }
}

/// Which slice a parent lives in, relative to its child.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Lag {
    Current,
    Previous,
}

impl Lag {
    pub fn as_offset(self) -> u8 {
        match self {
            Lag::Current => 0,
            Lag::Previous => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParentRef {
    pub node: usize,
    pub lag: Lag,
}

impl ParentRef {
    pub fn current(node: usize) -> Self {
        ParentRef { node, lag: Lag::Current }
    }

    pub fn previous(node: usize) -> Self {
        ParentRef { node, lag: Lag::Previous }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CptRole {
    Prior,
    Transition,
}

impl CptRole {
    pub fn for_slice(t: usize) -> Self {
        if t <= 1 {
            CptRole::Prior
        } else {
            CptRole::Transition
        }
    }
}

/// Dense table `P(child | parents)`.
///
/// `values[config * child_arity + child]`, where `config` is the mixed-radix
/// index of the parent values with the first parent most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalTable {
    child_arity: usize,
    parent_arities: Vec<usize>,
    values: Vec<f64>,
}

/// Mixed-radix index of `values` under `arities`, first position most significant.
pub fn mixed_radix_index(values: &[usize], arities: &[usize]) -> usize {
    debug_assert_eq!(values.len(), arities.len());
    values.iter().zip(arities).fold(0, |acc, (&v, &a)| acc * a + v)
}

/// Inverse of [`mixed_radix_index`], writing into `out`.
pub fn decode_mixed_radix(mut index: usize, arities: &[usize], out: &mut [usize]) {
    for (slot, &a) in out.iter_mut().zip(arities).rev() {
        *slot = index % a;
        index /= a;
    }
}

impl ConditionalTable {
    pub fn new(child_arity: usize, parent_arities: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if child_arity == 0 || parent_arities.iter().any(|&a| a == 0) {
            return Err(DbnError::InvalidModel("table arities must be positive".into()));
        }
        let configs: usize = parent_arities.iter().product();
        let expected = configs * child_arity;
        if values.len() != expected {
            return Err(DbnError::InvalidModel(format!(
                "table has {} entries, expected {} ({} parent configurations x {} child values)",
                values.len(),
                expected,
                configs,
                child_arity
            )));
        }
        let table = ConditionalTable { child_arity, parent_arities, values };
        table.check_stochastic()?;
        Ok(table)
    }

    /// Builds a table from nonnegative weights, normalizing each row.
    pub fn from_weights(child_arity: usize, parent_arities: Vec<usize>, mut weights: Vec<f64>) -> Result<Self> {
        for (row, chunk) in weights.chunks_mut(child_arity.max(1)).enumerate() {
            let sum: f64 = chunk.iter().sum();
            if !(sum > 0.0 && sum.is_finite()) {
                return Err(DbnError::InvalidModel(format!("row {row} has no positive mass")));
            }
            chunk.iter_mut().for_each(|w| *w /= sum);
        }
        ConditionalTable::new(child_arity, parent_arities, weights)
    }

    fn check_stochastic(&self) -> Result<()> {
        for (row, chunk) in self.values.chunks(self.child_arity).enumerate() {
            if let Some(bad) = chunk.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(DbnError::InvalidModel(format!("row {row} has entry {bad} outside [0, 1]")));
            }
            let sum: f64 = chunk.iter().sum();
            if (sum - 1.0).abs() >= ROW_SUM_TOL {
                return Err(DbnError::InvalidModel(format!("row {row} sums to {sum}, not 1")));
            }
        }
        Ok(())
    }

    pub fn child_arity(&self) -> usize {
        self.child_arity
    }

    pub fn parent_arities(&self) -> &[usize] {
        &self.parent_arities
    }

    pub fn num_configs(&self) -> usize {
        self.parent_arities.iter().product()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, config: usize) -> &[f64] {
        &self.values[config * self.child_arity..(config + 1) * self.child_arity]
    }

    pub fn prob(&self, child: usize, config: usize) -> f64 {
        self.values[config * self.child_arity + child]
    }

    pub fn config_index(&self, parent_values: &[usize]) -> usize {
        mixed_radix_index(parent_values, &self.parent_arities)
    }
}

/// A node's CPT for one role together with its parent order.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeCpt {
    pub parents: Vec<ParentRef>,
    pub table: ConditionalTable,
}

/// Two-slice discrete DBN template. Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteDbn {
    nodes: Vec<NodeSpec>,
    intra_edges: Vec<(usize, usize)>,
    inter_edges: Vec<(usize, usize)>,
    prior: Vec<NodeCpt>,
    transition: Vec<NodeCpt>,
    hidden: Vec<usize>,
    observed: Vec<usize>,
    hidden_ordinal: Vec<Option<usize>>,
    slice_order: Vec<usize>,
}

impl DiscreteDbn {
    /// Validates and assembles a model. `prior[i]` and `transition[i]` are the
    /// CPTs of node `i`; their parent sets must match the declared edges.
    pub fn new(
        nodes: Vec<NodeSpec>,
        intra_edges: Vec<(usize, usize)>,
        inter_edges: Vec<(usize, usize)>,
        prior: Vec<NodeCpt>,
        transition: Vec<NodeCpt>,
    ) -> Result<Self> {
        let n = nodes.len();
        if n == 0 {
            return Err(DbnError::InvalidModel("model has no nodes".into()));
        }
        for node in &nodes {
            if node.arity < 2 {
                return Err(DbnError::InvalidModel(format!(
                    "node {} has arity {}; arities must be >= 2",
                    node.name, node.arity
                )));
            }
        }
        let mut names = BTreeSet::new();
        for node in &nodes {
            if !names.insert(node.name.as_str()) {
                return Err(DbnError::InvalidModel(format!("duplicate node name {}", node.name)));
            }
        }
        for (kind, edges) in [("intra", &intra_edges), ("inter", &inter_edges)] {
            let mut seen = BTreeSet::new();
            for &(p, c) in edges.iter() {
                if p >= n || c >= n {
                    return Err(DbnError::InvalidModel(format!("{kind} edge ({p}, {c}) references a missing node")));
                }
                if kind == "intra" && p == c {
                    return Err(DbnError::InvalidModel(format!("intra edge ({p}, {c}) is a self-loop")));
                }
                if !seen.insert((p, c)) {
                    return Err(DbnError::InvalidModel(format!("duplicate {kind} edge ({p}, {c})")));
                }
            }
        }
        if prior.len() != n || transition.len() != n {
            return Err(DbnError::InvalidModel(format!(
                "expected {n} prior and {n} transition CPTs, got {} and {}",
                prior.len(),
                transition.len()
            )));
        }

        let slice_order = topological_order(n, &intra_edges).ok_or_else(|| {
            DbnError::InvalidModel("intra-slice edges form a cycle; the two-slice graph must be acyclic".into())
        })?;

        for (i, node) in nodes.iter().enumerate() {
            let intra: BTreeSet<ParentRef> = intra_edges
                .iter()
                .filter(|&&(_, c)| c == i)
                .map(|&(p, _)| ParentRef::current(p))
                .collect();
            let mut full = intra.clone();
            full.extend(inter_edges.iter().filter(|&&(_, c)| c == i).map(|&(p, _)| ParentRef::previous(p)));
            for (role, cpt, expected) in [("prior", &prior[i], &intra), ("transition", &transition[i], &full)] {
                let declared: BTreeSet<ParentRef> = cpt.parents.iter().copied().collect();
                if declared.len() != cpt.parents.len() || &declared != expected {
                    return Err(DbnError::InvalidModel(format!(
                        "{role} CPT of {} has parents {:?}, which do not match the declared edges",
                        node.name, cpt.parents
                    )));
                }
                if cpt.table.child_arity() != node.arity {
                    return Err(DbnError::InvalidModel(format!(
                        "{role} CPT of {} has child arity {}, node arity is {}",
                        node.name,
                        cpt.table.child_arity(),
                        node.arity
                    )));
                }
                let arities: Vec<usize> = cpt.parents.iter().map(|p| nodes[p.node].arity).collect();
                if arities != cpt.table.parent_arities() {
                    return Err(DbnError::InvalidModel(format!(
                        "{role} CPT of {} has parent arities {:?}, expected {:?}",
                        node.name,
                        cpt.table.parent_arities(),
                        arities
                    )));
                }
            }
        }

        let hidden: Vec<usize> = (0..n).filter(|&i| nodes[i].is_hidden()).collect();
        let observed: Vec<usize> = (0..n).filter(|&i| !nodes[i].is_hidden()).collect();
        let mut hidden_ordinal = vec![None; n];
        for (ord, &i) in hidden.iter().enumerate() {
            hidden_ordinal[i] = Some(ord);
        }
        Ok(DiscreteDbn {
            nodes,
            intra_edges,
            inter_edges,
            prior,
            transition,
            hidden,
            observed,
            hidden_ordinal,
            slice_order,
        })
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &NodeSpec {
        &self.nodes[i]
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn arity(&self, i: usize) -> usize {
        self.nodes[i].arity
    }

    pub fn intra_edges(&self) -> &[(usize, usize)] {
        &self.intra_edges
    }

    pub fn inter_edges(&self) -> &[(usize, usize)] {
        &self.inter_edges
    }

    /// Hidden node indices in declaration order.
    pub fn hidden(&self) -> &[usize] {
        &self.hidden
    }

    pub fn observed(&self) -> &[usize] {
        &self.observed
    }

    pub fn num_hidden(&self) -> usize {
        self.hidden.len()
    }

    /// Position of node `i` among the hidden nodes.
    pub fn hidden_ordinal(&self, i: usize) -> Option<usize> {
        self.hidden_ordinal[i]
    }

    pub fn hidden_arities(&self) -> Vec<usize> {
        self.hidden.iter().map(|&i| self.nodes[i].arity).collect()
    }

    pub fn cpt(&self, node: usize, role: CptRole) -> &NodeCpt {
        match role {
            CptRole::Prior => &self.prior[node],
            CptRole::Transition => &self.transition[node],
        }
    }

    /// Topological order of the nodes within one slice.
    pub fn slice_order(&self) -> &[usize] {
        &self.slice_order
    }

    pub fn intra_parents(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.intra_edges.iter().filter(move |e| e.1 == i).map(|e| e.0)
    }

    pub fn inter_parents(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.inter_edges.iter().filter(move |e| e.1 == i).map(|e| e.0)
    }

    pub fn intra_children(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.intra_edges.iter().filter(move |e| e.0 == i).map(|e| e.1)
    }

    pub fn inter_children(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.inter_edges.iter().filter(move |e| e.0 == i).map(|e| e.1)
    }

    /// Largest number of parents (both roles) over hidden nodes.
    pub fn max_hidden_fan_in(&self) -> usize {
        self.hidden
            .iter()
            .map(|&i| self.transition[i].parents.len().max(self.prior[i].parents.len()))
            .max()
            .unwrap_or(0)
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    /// Checks that observed nodes are leaves whose parents are hidden nodes of
    /// the same slice. Every engine relies on this to evaluate evidence slice
    /// by slice.
    pub fn require_leaf_observations(&self) -> Result<()> {
        for &o in &self.observed {
            let name = &self.nodes[o].name;
            if self.intra_children(o).next().is_some() || self.inter_children(o).next().is_some() {
                return Err(DbnError::NotRegular(format!("observed node {name} has children")));
            }
            if self.inter_parents(o).next().is_some() {
                return Err(DbnError::NotRegular(format!("observed node {name} has a parent in the previous slice")));
            }
            if let Some(p) = self.intra_parents(o).find(|&p| !self.nodes[p].is_hidden()) {
                return Err(DbnError::NotRegular(format!(
                    "observed node {name} has observed parent {}",
                    self.nodes[p].name
                )));
            }
        }
        Ok(())
    }

    /// Returns an error unless [`validate_regular`] accepts the model.
    pub fn require_regular(&self) -> Result<()> {
        let report = validate_regular(self);
        if report.is_ok() {
            Ok(())
        } else {
            Err(DbnError::NotRegular(report.to_string()))
        }
    }
}

impl fmt::Display for DiscreteDbn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cpt_entries: usize = self
            .prior
            .iter()
            .chain(&self.transition)
            .map(|c| c.table.values().len())
            .sum();
        write!(
            f,
            "{} nodes ({} hidden, {} observed), {} intra edges, {} inter edges, {} CPT entries",
            self.nodes.len(),
            self.hidden.len(),
            self.observed.len(),
            self.intra_edges.len(),
            self.inter_edges.len(),
            cpt_entries
        )
    }
}

/// Kahn's algorithm; `None` on a cycle. Ties resolve to the lowest index.
pub(crate) fn topological_order(n: usize, edges: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut indegree = vec![0usize; n];
    for &(_, c) in edges {
        indegree[c] += 1;
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(&next) = ready.iter().next() {
        ready.remove(&next);
        order.push(next);
        for &(p, c) in edges {
            if p == next {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert(c);
                }
            }
        }
    }
    (order.len() == n).then_some(order)
}
