//! Versioned JSON model files. The schema lives in `docs/model.schema.json`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{ConditionalTable, CptRole, DiscreteDbn, Lag, NodeCpt, NodeSpec, ParentRef, ROW_SUM_TOL};
use crate::error::{DbnError, Result};

pub const MODEL_FORMAT_VERSION: u64 = 1;
pub const SUPPORTED_VERSIONS: &[u64] = &[MODEL_FORMAT_VERSION];

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u64,
    nodes: Vec<NodeSpec>,
    intra_edges: Vec<(usize, usize)>,
    inter_edges: Vec<(usize, usize)>,
    cpts: Vec<CptEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CptEntry {
    node: usize,
    role: CptRole,
    parent_order: Vec<ParentEntry>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParentEntry {
    node: usize,
    /// 0 = same slice, 1 = previous slice
    lag: u8,
}

pub fn to_json_string(dbn: &DiscreteDbn) -> String {
    let mut cpts = Vec::with_capacity(2 * dbn.num_nodes());
    for node in 0..dbn.num_nodes() {
        for role in [CptRole::Prior, CptRole::Transition] {
            let cpt = dbn.cpt(node, role);
            cpts.push(CptEntry {
                node,
                role,
                parent_order: cpt.parents.iter().map(|p| ParentEntry { node: p.node, lag: p.lag.as_offset() }).collect(),
                values: cpt.table.values().to_vec(),
            });
        }
    }
    let file = ModelFile {
        version: MODEL_FORMAT_VERSION,
        nodes: dbn.nodes().to_vec(),
        intra_edges: dbn.intra_edges().to_vec(),
        inter_edges: dbn.inter_edges().to_vec(),
        cpts,
    };
    serde_json::to_string_pretty(&file).expect("model serializes")
}

fn parse_error(location: impl Into<String>, message: impl Into<String>) -> DbnError {
    DbnError::Parse { location: location.into(), message: message.into() }
}

pub fn from_json_str(text: &str) -> Result<DiscreteDbn> {
    let json_err = |e: serde_json::Error| parse_error(format!("line {} column {}", e.line(), e.column()), e.to_string());
    let raw: Value = serde_json::from_str(text).map_err(json_err)?;
    let version = raw
        .get("version")
        .ok_or_else(|| parse_error("version", "missing version field"))?
        .as_u64()
        .ok_or_else(|| parse_error("version", "version must be a non-negative integer"))?;
    if !SUPPORTED_VERSIONS.contains(&version) {
        let supported = SUPPORTED_VERSIONS.iter().map(u64::to_string).collect::<Vec<_>>().join(", ");
        return Err(DbnError::UnsupportedVersion { found: version, supported });
    }
    // reparse from text so serde errors carry line/column
    let file: ModelFile = serde_json::from_str(text).map_err(json_err)?;

    let n = file.nodes.len();
    let mut prior: Vec<Option<NodeCpt>> = vec![None; n];
    let mut transition: Vec<Option<NodeCpt>> = vec![None; n];
    for (k, entry) in file.cpts.iter().enumerate() {
        let loc = format!("cpts[{k}]");
        if entry.node >= n {
            return Err(parse_error(format!("{loc}.node"), format!("node {} does not exist", entry.node)));
        }
        let mut parents = Vec::with_capacity(entry.parent_order.len());
        for (j, p) in entry.parent_order.iter().enumerate() {
            if p.node >= n {
                return Err(parse_error(format!("{loc}.parent_order[{j}]"), format!("node {} does not exist", p.node)));
            }
            let lag = match p.lag {
                0 => Lag::Current,
                1 => Lag::Previous,
                other => return Err(parse_error(format!("{loc}.parent_order[{j}].lag"), format!("lag must be 0 or 1, got {other}"))),
            };
            parents.push(ParentRef { node: p.node, lag });
        }
        let child_arity = file.nodes[entry.node].arity;
        let parent_arities: Vec<usize> = parents.iter().map(|p| file.nodes[p.node].arity).collect();
        let expected: usize = parent_arities.iter().product::<usize>() * child_arity;
        if entry.values.len() != expected {
            return Err(parse_error(
                format!("{loc}.values"),
                format!(
                    "{} entries, but declared arities (child {child_arity}, parents {parent_arities:?}) require {expected}",
                    entry.values.len()
                ),
            ));
        }
        if child_arity > 0 {
            for (row, chunk) in entry.values.chunks(child_arity).enumerate() {
                let sum: f64 = chunk.iter().sum();
                if (sum - 1.0).abs() >= ROW_SUM_TOL || chunk.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(parse_error(format!("{loc}.values row {row}"), format!("row sums to {sum}; rows must be distributions")));
                }
            }
        }
        let table = ConditionalTable::new(child_arity, parent_arities, entry.values.clone())
            .map_err(|e| parse_error(format!("{loc}.values"), e.to_string()))?;
        let slot = match entry.role {
            CptRole::Prior => &mut prior[entry.node],
            CptRole::Transition => &mut transition[entry.node],
        };
        if slot.is_some() {
            return Err(parse_error(loc, format!("duplicate {:?} CPT for node {}", entry.role, entry.node)));
        }
        *slot = Some(NodeCpt { parents, table });
    }
    let collect = |slots: Vec<Option<NodeCpt>>, role: &str| -> Result<Vec<NodeCpt>> {
        slots
            .into_iter()
            .enumerate()
            .map(|(i, c)| c.ok_or_else(|| parse_error("cpts", format!("missing {role} CPT for node {i}"))))
            .collect()
    };
    let prior = collect(prior, "prior")?;
    let transition = collect(transition, "transition")?;
    DiscreteDbn::new(file.nodes, file.intra_edges, file.inter_edges, prior, transition)
}

pub fn save_model(dbn: &DiscreteDbn, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_json_string(dbn))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<DiscreteDbn> {
    from_json_str(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_chmm, build_water_network};

    #[test]
    fn round_trip_is_exact() {
        for dbn in [build_chmm(3, 3, 17).unwrap(), build_water_network(4).unwrap()] {
            let back = from_json_str(&to_json_string(&dbn)).unwrap();
            assert_eq!(back, dbn);
        }
    }

    #[test]
    fn file_round_trip() {
        let dbn = build_chmm(2, 2, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_model(&dbn, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), dbn);
    }

    fn corrupt(edit: impl FnOnce(&mut Value)) -> DbnError {
        let dbn = build_chmm(1, 2, 1).unwrap();
        let mut raw: Value = serde_json::from_str(&to_json_string(&dbn)).unwrap();
        edit(&mut raw);
        from_json_str(&raw.to_string()).unwrap_err()
    }

    #[test]
    fn short_row_rejected_with_row_index() {
        // transition CPT of X1: rows over 2 parent configurations
        let err = corrupt(|raw| {
            let values = raw["cpts"][1]["values"].as_array_mut().unwrap();
            values[2] = Value::from(0.5);
            values[3] = Value::from(0.4);
        });
        let msg = err.to_string();
        assert!(msg.contains("cpts[1].values row 1"), "{msg}");
    }

    #[test]
    fn unknown_version_names_supported() {
        let err = corrupt(|raw| raw["version"] = Value::from(7));
        let msg = err.to_string();
        assert!(msg.contains('7') && msg.contains("supported versions: 1"), "{msg}");
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let err = corrupt(|raw| {
            raw["cpts"][1]["values"].as_array_mut().unwrap().truncate(2);
        });
        assert!(err.to_string().contains("require 4"), "{err}");
    }

    #[test]
    fn syntax_error_reports_line() {
        let err = from_json_str("{\n \"version\": 1,\n \"nodes\": [,]\n}").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }
}
