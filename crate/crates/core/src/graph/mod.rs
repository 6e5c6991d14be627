//! Heterogeneous graph data model.
//!
//! A [`HeteroGraph`] carries typed nodes (each type with an optional dense
//! feature matrix), typed directed relations with local edge indices, and
//! supervision (labels plus train/val/test splits) on a single target node
//! type. Graphs are immutable after construction; every constructor and
//! loader runs [`HeteroGraph::validate`].

mod io;
mod noise;
mod synthetic;

pub use io::{graph_from_json, graph_to_json, load_graph, save_graph};
pub use noise::{inject_label_noise, load_noise_record, save_noise_record, NoiseRecord};
pub use synthetic::{generate_synthetic, NodeTypeSpec, RelationSpec, SyntheticSpec};

pub(crate) use io::to_json_full_precision;

use crate::error::{Error, Result};
use ndarray::Array2;

/// A node type: name plus how many nodes it has.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeTypeInfo {
    pub name: String,
    pub count: usize,
}

/// A directed relation between two node types, identified by type index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub name: String,
    pub src: usize,
    pub dst: usize,
}

/// Disjoint index sets over target-type nodes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Heterogeneous graph with labels and splits on one target node type.
#[derive(Debug, Clone, PartialEq)]
pub struct HeteroGraph {
    /// Node types in declaration order; indices elsewhere refer to this list.
    pub node_types: Vec<NodeTypeInfo>,
    /// Per-type feature matrix (`count x dim`), `None` for featureless types.
    pub features: Vec<Option<Array2<f64>>>,
    /// Typed directed relations.
    pub relations: Vec<Relation>,
    /// Per-relation edge lists; `(src_index, dst_index)` local to each type.
    pub edges: Vec<Vec<(usize, usize)>>,
    /// Index into `node_types` of the labeled type.
    pub target_type: usize,
    /// One class id per target-type node, in `[0, num_classes)`.
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub splits: Splits,
}

impl HeteroGraph {
    /// Number of nodes of the target type.
    pub fn target_count(&self) -> usize {
        self.node_types[self.target_type].count
    }

    /// Looks up a node type by name.
    pub fn type_index(&self, name: &str) -> Option<usize> {
        self.node_types.iter().position(|t| t.name == name)
    }

    /// Input feature dimension shared by all featured types.
    ///
    /// Featureless types later receive learned embeddings of this same
    /// width, so mixed widths across featured types are rejected.
    pub fn input_feature_dim(&self) -> Result<usize> {
        let mut dim: Option<(usize, &str)> = None;
        for (info, feats) in self.node_types.iter().zip(&self.features) {
            if let Some(f) = feats {
                match dim {
                    None => dim = Some((f.ncols(), &info.name)),
                    Some((d, first)) if d != f.ncols() => {
                        return Err(Error::Shape(format!(
                            "feature dims differ across node types: '{}' has {}, '{}' has {}",
                            first,
                            d,
                            info.name,
                            f.ncols()
                        )))
                    }
                    _ => {}
                }
            }
        }
        dim.map(|(d, _)| d).ok_or_else(|| {
            Error::Config("graph has no featured node type; cannot infer input dimension".into())
        })
    }

    /// Total number of edges across all relations.
    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    /// Checks every structural invariant, naming the violated one on failure.
    pub fn validate(&self) -> Result<()> {
        if self.node_types.len() != self.features.len() {
            return Err(Error::Validation(format!(
                "features present for {} node types but {} are declared",
                self.features.len(),
                self.node_types.len()
            )));
        }
        if self.relations.len() != self.edges.len() {
            return Err(Error::Validation(format!(
                "edge lists present for {} relations but {} are declared",
                self.edges.len(),
                self.relations.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for t in &self.node_types {
            if !seen.insert(&t.name) {
                return Err(Error::Validation(format!(
                    "duplicate node type name '{}'",
                    t.name
                )));
            }
        }
        let mut seen_rel = std::collections::HashSet::new();
        for r in &self.relations {
            if !seen_rel.insert(&r.name) {
                return Err(Error::Validation(format!(
                    "duplicate relation name '{}'",
                    r.name
                )));
            }
        }
        for (info, feats) in self.node_types.iter().zip(&self.features) {
            if let Some(f) = feats {
                if f.nrows() != info.count {
                    return Err(Error::Validation(format!(
                        "feature matrix for '{}' has {} rows, expected node count {}",
                        info.name,
                        f.nrows(),
                        info.count
                    )));
                }
                if f.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Validation(format!(
                        "feature matrix for '{}' contains a non-finite value",
                        info.name
                    )));
                }
            }
        }
        if self.target_type >= self.node_types.len() {
            return Err(Error::Validation(format!(
                "target type index {} out of range ({} node types)",
                self.target_type,
                self.node_types.len()
            )));
        }
        for (rel, edges) in self.relations.iter().zip(&self.edges) {
            for &ty in [rel.src, rel.dst].iter() {
                if ty >= self.node_types.len() {
                    return Err(Error::Validation(format!(
                        "relation '{}' references node type index {} out of range",
                        rel.name, ty
                    )));
                }
            }
            let (src_count, dst_count) =
                (self.node_types[rel.src].count, self.node_types[rel.dst].count);
            for (i, &(u, v)) in edges.iter().enumerate() {
                if u >= src_count {
                    return Err(Error::Validation(format!(
                        "edge {} of relation '{}' has source index {} out of range for '{}' (count {})",
                        i, rel.name, u, self.node_types[rel.src].name, src_count
                    )));
                }
                if v >= dst_count {
                    return Err(Error::Validation(format!(
                        "edge {} of relation '{}' has target index {} out of range for '{}' (count {})",
                        i, rel.name, v, self.node_types[rel.dst].name, dst_count
                    )));
                }
            }
        }
        if self.num_classes == 0 {
            return Err(Error::Validation("num_classes must be positive".into()));
        }
        let n_target = self.target_count();
        if self.labels.len() != n_target {
            return Err(Error::Validation(format!(
                "{} labels for {} target nodes",
                self.labels.len(),
                n_target
            )));
        }
        for (i, &y) in self.labels.iter().enumerate() {
            if y >= self.num_classes {
                return Err(Error::Validation(format!(
                    "label {} of target node {} is outside [0, {})",
                    y, i, self.num_classes
                )));
            }
        }
        let mut membership = vec![0u8; n_target];
        for (split_name, split) in [
            ("train", &self.splits.train),
            ("val", &self.splits.val),
            ("test", &self.splits.test),
        ] {
            for &idx in split {
                if idx >= n_target {
                    return Err(Error::Validation(format!(
                        "{split_name} split index {idx} out of range for {n_target} target nodes"
                    )));
                }
                membership[idx] += 1;
                if membership[idx] > 1 {
                    return Err(Error::Validation(format!(
                        "target node {idx} appears in more than one split"
                    )));
                }
            }
        }
        Ok(())
    }
}
