//! Regularity check: hidden nodes connect only to observations in their own
//! slice and to hidden nodes in the next slice, and every hidden node has a
//! child in the next slice.

use std::fmt;

use super::DiscreteDbn;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// Hidden-to-hidden edge inside one slice.
    IntraSliceHiddenEdge { parent: String, child: String },
    /// Edge from a hidden node into an observation of the next slice.
    InterSliceObservationEdge { parent: String, child: String },
    /// Any edge leaving an observed node.
    EdgeFromObserved { parent: String, child: String, inter: bool },
    /// Hidden node with no hidden child in the next slice.
    NotPersistent { node: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::IntraSliceHiddenEdge { parent, child } => {
                write!(f, "intra-slice hidden edge {parent} -> {child}")
            }
            Violation::InterSliceObservationEdge { parent, child } => {
                write!(f, "inter-slice edge {parent} -> {child} targets an observed node")
            }
            Violation::EdgeFromObserved { parent, child, inter } => {
                let kind = if *inter { "inter" } else { "intra" };
                write!(f, "{kind}-slice edge {parent} -> {child} leaves an observed node")
            }
            Violation::NotPersistent { node } => write!(f, "hidden node {node} is not persistent"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RegularityReport {
    pub violations: Vec<Violation>,
}

impl RegularityReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for RegularityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        for (k, v) in self.violations.iter().enumerate() {
            if k > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Reports every edge or node breaking the regular-DBN rules. Never fails.
pub fn validate_regular(dbn: &DiscreteDbn) -> RegularityReport {
    let name = |i: usize| dbn.node(i).name.clone();
    let hidden = |i: usize| dbn.node(i).is_hidden();
    let mut violations = Vec::new();
    for &(p, c) in dbn.intra_edges() {
        if !hidden(p) {
            violations.push(Violation::EdgeFromObserved { parent: name(p), child: name(c), inter: false });
        } else if hidden(c) {
            violations.push(Violation::IntraSliceHiddenEdge { parent: name(p), child: name(c) });
        }
    }
    for &(p, c) in dbn.inter_edges() {
        if !hidden(p) {
            violations.push(Violation::EdgeFromObserved { parent: name(p), child: name(c), inter: true });
        } else if !hidden(c) {
            violations.push(Violation::InterSliceObservationEdge { parent: name(p), child: name(c) });
        }
    }
    for &h in dbn.hidden() {
        if !dbn.inter_children(h).any(hidden) {
            violations.push(Violation::NotPersistent { node: name(h) });
        }
    }
    RegularityReport { violations }
}
