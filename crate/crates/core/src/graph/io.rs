//! Graph file format: a single JSON object with full-precision floats.
//!
//! Floats are written in scientific notation with 17 significant digits,
//! enough to reproduce every f64 bit-exactly after a decimal round trip.
//! Map keys are emitted in sorted order and the layout is compact, so
//! saving the same graph twice yields identical bytes.

use super::{HeteroGraph, NodeTypeInfo, Relation, Splits};
use crate::error::{Error, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

/// serde_json formatter that writes floats with 17 significant digits.
struct FullPrecision;

impl serde_json::ser::Formatter for FullPrecision {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{value:.16e}")
    }
}

/// Serializes any value as compact JSON with full-precision floats.
pub(crate) fn to_json_full_precision<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FullPrecision);
    value.serialize(&mut ser).map_err(Error::from_json)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeTypeFile {
    name: String,
    count: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct RelationFile {
    name: String,
    src: String,
    dst: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct SplitsFile {
    train: Vec<usize>,
    val: Vec<usize>,
    test: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GraphFile {
    node_types: Vec<NodeTypeFile>,
    features: BTreeMap<String, Option<Vec<Vec<f64>>>>,
    relations: Vec<RelationFile>,
    edges: BTreeMap<String, Vec<[usize; 2]>>,
    target_type: String,
    labels: Vec<usize>,
    num_classes: usize,
    splits: SplitsFile,
}

impl GraphFile {
    fn from_graph(graph: &HeteroGraph) -> Self {
        GraphFile {
            node_types: graph
                .node_types
                .iter()
                .map(|t| NodeTypeFile { name: t.name.clone(), count: t.count })
                .collect(),
            features: graph
                .node_types
                .iter()
                .zip(&graph.features)
                .map(|(t, f)| {
                    let rows = f
                        .as_ref()
                        .map(|m| m.rows().into_iter().map(|r| r.to_vec()).collect());
                    (t.name.clone(), rows)
                })
                .collect(),
            relations: graph
                .relations
                .iter()
                .map(|r| RelationFile {
                    name: r.name.clone(),
                    src: graph.node_types[r.src].name.clone(),
                    dst: graph.node_types[r.dst].name.clone(),
                })
                .collect(),
            edges: graph
                .relations
                .iter()
                .zip(&graph.edges)
                .map(|(r, pairs)| {
                    (r.name.clone(), pairs.iter().map(|&(u, v)| [u, v]).collect())
                })
                .collect(),
            target_type: graph.node_types[graph.target_type].name.clone(),
            labels: graph.labels.clone(),
            num_classes: graph.num_classes,
            splits: SplitsFile {
                train: graph.splits.train.clone(),
                val: graph.splits.val.clone(),
                test: graph.splits.test.clone(),
            },
        }
    }

    fn into_graph(self) -> Result<HeteroGraph> {
        let node_types: Vec<NodeTypeInfo> = self
            .node_types
            .iter()
            .map(|t| NodeTypeInfo { name: t.name.clone(), count: t.count })
            .collect();
        let type_index = |name: &str| -> Result<usize> {
            node_types
                .iter()
                .position(|t| t.name == name)
                .ok_or_else(|| Error::Validation(format!("unknown node type '{name}'")))
        };

        let mut features: Vec<Option<Array2<f64>>> = vec![None; node_types.len()];
        for (name, rows) in &self.features {
            let idx = type_index(name)?;
            if let Some(rows) = rows {
                let ncols = rows.first().map_or(0, Vec::len);
                if rows.iter().any(|r| r.len() != ncols) {
                    return Err(Error::Validation(format!(
                        "feature matrix for '{name}' is not rectangular"
                    )));
                }
                let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                let matrix = Array2::from_shape_vec((rows.len(), ncols), flat)
                    .map_err(|e| Error::Validation(format!("feature matrix for '{name}': {e}")))?;
                features[idx] = Some(matrix);
            }
        }

        let mut relations = Vec::with_capacity(self.relations.len());
        for r in &self.relations {
            relations.push(Relation {
                name: r.name.clone(),
                src: type_index(&r.src)?,
                dst: type_index(&r.dst)?,
            });
        }
        for name in self.edges.keys() {
            if !relations.iter().any(|r| &r.name == name) {
                return Err(Error::Validation(format!(
                    "edge list for undeclared relation '{name}'"
                )));
            }
        }
        let edges: Vec<Vec<(usize, usize)>> = relations
            .iter()
            .map(|r| {
                self.edges
                    .get(&r.name)
                    .map(|pairs| pairs.iter().map(|&[u, v]| (u, v)).collect())
                    .unwrap_or_default()
            })
            .collect();

        let graph = HeteroGraph {
            target_type: type_index(&self.target_type)?,
            node_types,
            features,
            relations,
            edges,
            labels: self.labels,
            num_classes: self.num_classes,
            splits: Splits {
                train: self.splits.train,
                val: self.splits.val,
                test: self.splits.test,
            },
        };
        graph.validate()?;
        Ok(graph)
    }
}

/// Renders a graph to its JSON file representation.
pub fn graph_to_json(graph: &HeteroGraph) -> Result<String> {
    to_json_full_precision(&GraphFile::from_graph(graph))
}

/// Parses a graph from its JSON file representation and validates it.
pub fn graph_from_json(body: &str) -> Result<HeteroGraph> {
    let file: GraphFile = serde_json::from_str(body).map_err(Error::from_json)?;
    file.into_graph()
}

pub fn save_graph(graph: &HeteroGraph, path: &Path) -> Result<()> {
    std::fs::write(path, graph_to_json(graph)?)?;
    Ok(())
}

pub fn load_graph(path: &Path) -> Result<HeteroGraph> {
    let body = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    graph_from_json(&body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_synthetic, SyntheticSpec};

    fn sample() -> HeteroGraph {
        generate_synthetic(&SyntheticSpec::citation(50, 20, 3), 42).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let g = sample();
        let json = graph_to_json(&g).unwrap();
        let back = graph_from_json(&json).unwrap();
        assert_eq!(g, back);
        // A second save of the reloaded graph is byte-identical.
        assert_eq!(json, graph_to_json(&back).unwrap());
    }

    #[test]
    fn awkward_floats_survive_the_decimal_round_trip() {
        let mut g = sample();
        let m = g.features[0].as_mut().unwrap();
        m[[0, 0]] = 1.0 / 3.0;
        m[[0, 1]] = 0.1 + 0.2;
        m[[1, 0]] = f64::MIN_POSITIVE;
        m[[1, 1]] = -1e300;
        let back = graph_from_json(&graph_to_json(&g).unwrap()).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = graph_from_json("{\"node_types\": [").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("parse error"), "{msg}");
        assert!(msg.contains("line"), "{msg}");
    }

    #[test]
    fn out_of_range_edge_index_rejected() {
        let g = sample();
        let json = graph_to_json(&g).unwrap();
        let mut value: serde_json::Value = serde_json::from_str(&json).unwrap();
        value["edges"]["cites"][0][0] = serde_json::json!(10_000);
        let err = graph_from_json(&value.to_string()).unwrap_err();
        assert!(err.to_string().contains("out of range"), "{err}");
    }

    #[test]
    fn label_out_of_range_rejected() {
        let g = sample();
        let json = graph_to_json(&g).unwrap();
        let mut value: serde_json::Value = serde_json::from_str(&json).unwrap();
        value["labels"][0] = serde_json::json!(3);
        let err = graph_from_json(&value.to_string()).unwrap_err();
        assert!(err.to_string().contains("outside [0, 3)"), "{err}");
    }

    #[test]
    fn unknown_relation_in_edges_rejected() {
        let g = sample();
        let json = graph_to_json(&g).unwrap();
        let mut value: serde_json::Value = serde_json::from_str(&json).unwrap();
        value["edges"]["mentions"] = serde_json::json!([[0, 0]]);
        let err = graph_from_json(&value.to_string()).unwrap_err();
        assert!(err.to_string().contains("mentions"), "{err}");
    }
}
