//! Synthetic heterogeneous graph generation.
//!
//! Target nodes get class-conditioned Gaussian features (class means are
//! axis-aligned, `separation` apart, plus unit noise). Edges follow a
//! stochastic block model: every node carries a class (labels for target
//! nodes, a hidden class for auxiliary types) and an edge is drawn with
//! `intra_class_edge_prob` when endpoint classes agree, otherwise
//! `inter_class_edge_prob`. Auxiliary types are featureless, so intermediate
//! types stay class-informative only through their edge structure.
//!
//! Generation is a pure function of `(spec, seed)`; the draw order is fixed
//! (classes, then features, then edges relation by relation, then splits).

use super::{HeteroGraph, NodeTypeInfo, Relation, Splits};
use crate::error::{Error, Result};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

/// Declares one node type of the synthetic graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeTypeSpec {
    pub name: String,
    pub count: usize,
}

/// Declares one directed relation by node type names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationSpec {
    pub name: String,
    pub src: String,
    pub dst: String,
}

/// Parameters of the synthetic generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub node_types: Vec<NodeTypeSpec>,
    /// Name of the labeled node type; must appear in `node_types`.
    pub target_type: String,
    pub relations: Vec<RelationSpec>,
    pub num_classes: usize,
    /// Width of the target-type feature vectors.
    pub feature_dim: usize,
    /// Distance between class means (sigma); 0 makes features uninformative.
    pub class_separation: f64,
    pub intra_class_edge_prob: f64,
    pub inter_class_edge_prob: f64,
    /// Train/val/test fractions of the target nodes; must sum to <= 1.
    pub split_fractions: [f64; 3],
}

impl SyntheticSpec {
    /// Two-type citation-style schema: featured `paper` target nodes, a
    /// featureless `author` type, and relations `cites` (paper -> paper)
    /// and `writes` (author -> paper).
    pub fn citation(target_nodes: usize, aux_nodes: usize, num_classes: usize) -> Self {
        SyntheticSpec {
            node_types: vec![
                NodeTypeSpec { name: "paper".into(), count: target_nodes },
                NodeTypeSpec { name: "author".into(), count: aux_nodes },
            ],
            target_type: "paper".into(),
            relations: vec![
                RelationSpec { name: "cites".into(), src: "paper".into(), dst: "paper".into() },
                RelationSpec { name: "writes".into(), src: "author".into(), dst: "paper".into() },
            ],
            num_classes,
            feature_dim: 16,
            class_separation: 1.0,
            intra_class_edge_prob: 0.05,
            inter_class_edge_prob: 0.005,
            split_fractions: [0.5, 0.25, 0.25],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.node_types.is_empty() {
            return Err(Error::Config("node_types: at least one node type required".into()));
        }
        for t in &self.node_types {
            if t.count == 0 {
                return Err(Error::Config(format!(
                    "node_types: node type '{}' requests zero nodes",
                    t.name
                )));
            }
        }
        let type_known = |name: &str| self.node_types.iter().any(|t| t.name == name);
        if !type_known(&self.target_type) {
            return Err(Error::Config(format!(
                "target_type: unknown node type '{}'",
                self.target_type
            )));
        }
        if self.relations.is_empty() {
            return Err(Error::Config("relations: at least one relation required".into()));
        }
        for r in &self.relations {
            for (field, name) in [("src", &r.src), ("dst", &r.dst)] {
                if !type_known(name) {
                    return Err(Error::Config(format!(
                        "relations: relation '{}' names unknown {} type '{}'",
                        r.name, field, name
                    )));
                }
            }
        }
        if self.num_classes < 2 {
            return Err(Error::Config(format!(
                "num_classes: need at least 2, got {}",
                self.num_classes
            )));
        }
        if self.feature_dim == 0 {
            return Err(Error::Config("feature_dim: must be positive".into()));
        }
        if !(self.class_separation >= 0.0) {
            return Err(Error::Config(format!(
                "class_separation: must be >= 0, got {}",
                self.class_separation
            )));
        }
        for (field, p) in [
            ("intra_class_edge_prob", self.intra_class_edge_prob),
            ("inter_class_edge_prob", self.inter_class_edge_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{field}: probability {p} outside [0, 1]")));
            }
        }
        let sum: f64 = self.split_fractions.iter().sum();
        if self.split_fractions.iter().any(|&f| f < 0.0) || sum > 1.0 + 1e-12 {
            return Err(Error::Config(format!(
                "split_fractions: must be non-negative and sum to <= 1, got {:?}",
                self.split_fractions
            )));
        }
        let n_target = self
            .node_types
            .iter()
            .find(|t| t.name == self.target_type)
            .map(|t| t.count)
            .unwrap_or(0);
        for (name, frac) in ["train", "val", "test"].iter().zip(self.split_fractions) {
            if (n_target as f64 * frac).floor() as usize == 0 {
                return Err(Error::Config(format!(
                    "split_fractions: {name} split is empty ({frac} of {n_target} target nodes)"
                )));
            }
        }
        Ok(())
    }
}

/// Generates a graph from `spec`, deterministically per `(spec, seed)`.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<HeteroGraph> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);

    let target_idx = spec
        .node_types
        .iter()
        .position(|t| t.name == spec.target_type)
        .expect("validated above");

    // One class per node of every type, drawn in declaration order. The
    // target type's classes are its labels; other types keep theirs hidden.
    let classes: Vec<Vec<usize>> = spec
        .node_types
        .iter()
        .map(|t| (0..t.count).map(|_| rng.random_range(0..spec.num_classes)).collect())
        .collect();
    let labels = classes[target_idx].clone();

    let mut features: Vec<Option<Array2<f64>>> = vec![None; spec.node_types.len()];
    let n_target = spec.node_types[target_idx].count;
    let d = spec.feature_dim;
    let mut x = Array2::<f64>::zeros((n_target, d));
    for i in 0..n_target {
        let mean_axis = labels[i] % d;
        for j in 0..d {
            let noise: f64 = rng.sample(StandardNormal);
            let mean = if j == mean_axis { spec.class_separation } else { 0.0 };
            x[[i, j]] = mean + noise;
        }
    }
    features[target_idx] = Some(x);

    let name_to_idx = |name: &str| {
        spec.node_types
            .iter()
            .position(|t| t.name == name)
            .expect("validated above")
    };
    let mut relations = Vec::with_capacity(spec.relations.len());
    let mut edges = Vec::with_capacity(spec.relations.len());
    for r in &spec.relations {
        let (src, dst) = (name_to_idx(&r.src), name_to_idx(&r.dst));
        let mut pairs = Vec::new();
        for u in 0..spec.node_types[src].count {
            for v in 0..spec.node_types[dst].count {
                if src == dst && u == v {
                    continue;
                }
                let p = if classes[src][u] == classes[dst][v] {
                    spec.intra_class_edge_prob
                } else {
                    spec.inter_class_edge_prob
                };
                if rng.random_bool(p) {
                    pairs.push((u, v));
                }
            }
        }
        relations.push(Relation { name: r.name.clone(), src, dst });
        edges.push(pairs);
    }

    let mut order: Vec<usize> = (0..n_target).collect();
    order.shuffle(&mut rng);
    let n_train = (n_target as f64 * spec.split_fractions[0]).floor() as usize;
    let n_val = (n_target as f64 * spec.split_fractions[1]).floor() as usize;
    let n_test = (n_target as f64 * spec.split_fractions[2]).floor() as usize;
    let splits = Splits {
        train: order[..n_train].to_vec(),
        val: order[n_train..n_train + n_val].to_vec(),
        test: order[n_train + n_val..n_train + n_val + n_test].to_vec(),
    };

    let graph = HeteroGraph {
        node_types: spec
            .node_types
            .iter()
            .map(|t| NodeTypeInfo { name: t.name.clone(), count: t.count })
            .collect(),
        features,
        relations,
        edges,
        target_type: target_idx,
        labels,
        num_classes: spec.num_classes,
        splits,
    };
    graph.validate()?;
    Ok(graph)
}
