//! Disjoint clusterings of a slice's hidden nodes.

use serde_json::Value;

use crate::error::{Caps, DbnError, Result};
use crate::model::DiscreteDbn;

/// The same partition of the hidden nodes is used in every slice. Each
/// cluster lists node indices in ascending order; cluster states are
/// mixed-radix over the members, first member most significant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterSpec {
    clusters: Vec<Vec<usize>>,
}

impl ClusterSpec {
    pub fn new(dbn: &DiscreteDbn, clusters: Vec<Vec<usize>>, caps: &Caps) -> Result<Self> {
        let mut owner: Vec<Option<usize>> = vec![None; dbn.num_nodes()];
        let mut sorted = Vec::with_capacity(clusters.len());
        for (c, members) in clusters.into_iter().enumerate() {
            if members.is_empty() {
                return Err(DbnError::InvalidConfig(format!("cluster {c} is empty")));
            }
            let mut members = members;
            members.sort_unstable();
            for &i in &members {
                if i >= dbn.num_nodes() || !dbn.node(i).is_hidden() {
                    return Err(DbnError::InvalidConfig(format!("cluster {c}: node {i} is not a hidden node")));
                }
                if let Some(other) = owner[i] {
                    return Err(DbnError::InvalidConfig(format!(
                        "node {} appears in clusters {other} and {c}; overlapping clusters are not supported",
                        dbn.node(i).name
                    )));
                }
                owner[i] = Some(c);
            }
            let size: u128 = members.iter().map(|&i| dbn.arity(i) as u128).product();
            if size > caps.cluster_states as u128 {
                return Err(DbnError::CapExceeded {
                    what: format!("cluster {c} joint state space"),
                    size,
                    cap: caps.cluster_states as u128,
                });
            }
            sorted.push(members);
        }
        if let Some(&h) = dbn.hidden().iter().find(|&&h| owner[h].is_none()) {
            return Err(DbnError::InvalidConfig(format!("hidden node {} is not covered by any cluster", dbn.node(h).name)));
        }
        Ok(ClusterSpec { clusters: sorted })
    }

    pub fn per_node(dbn: &DiscreteDbn) -> Self {
        ClusterSpec { clusters: dbn.hidden().iter().map(|&h| vec![h]).collect() }
    }

    pub fn whole_slice(dbn: &DiscreteDbn, caps: &Caps) -> Result<Self> {
        ClusterSpec::new(dbn, vec![dbn.hidden().to_vec()], caps)
    }

    /// Accepts `"per-node"`, `"whole-slice"`, or a JSON list of lists whose
    /// entries are node indices or node names.
    pub fn parse(dbn: &DiscreteDbn, text: &str, caps: &Caps) -> Result<Self> {
        match text.trim() {
            "per-node" => return Ok(ClusterSpec::per_node(dbn)),
            "whole-slice" => return ClusterSpec::whole_slice(dbn, caps),
            _ => {}
        }
        let bad = |m: String| DbnError::Parse { location: "clusters".into(), message: m };
        let raw: Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        let lists = raw.as_array().ok_or_else(|| bad("expected a list of lists".into()))?;
        let mut clusters = Vec::with_capacity(lists.len());
        for (c, list) in lists.iter().enumerate() {
            let items = list.as_array().ok_or_else(|| bad(format!("cluster {c} is not a list")))?;
            let mut members = Vec::with_capacity(items.len());
            for item in items {
                let idx = match item {
                    Value::Number(n) => n.as_u64().map(|v| v as usize),
                    Value::String(s) => dbn.node_index(s),
                    _ => None,
                };
                members.push(idx.ok_or_else(|| bad(format!("cluster {c}: unknown node {item}")))?);
            }
            clusters.push(members);
        }
        ClusterSpec::new(dbn, clusters, caps)
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Index of the cluster holding `node`.
    pub fn owner(&self, node: usize) -> Option<usize> {
        self.clusters.iter().position(|c| c.contains(&node))
    }

    pub fn arities(&self, dbn: &DiscreteDbn, c: usize) -> Vec<usize> {
        self.clusters[c].iter().map(|&i| dbn.arity(i)).collect()
    }

    pub fn size(&self, dbn: &DiscreteDbn, c: usize) -> usize {
        self.arities(dbn, c).iter().product()
    }
}
