//! Relational graph-convolution backbone with manual reverse-mode gradients.
//!
//! The model is a stack of relational convolution layers. At layer `l` a
//! node `v` of type `tau` is updated as
//!
//! ```text
//! h[l+1][v] = relu( W_self[l]^T h[l][v]
//!                 + sum_r mean_{u in N_r(v)} W_r[l]^T h[l][u] )
//! ```
//!
//! where `N_r(v)` are the in-neighbors of `v` under relation `r` (empty for
//! types that `r` does not point at, contributing zero). Featureless node
//! types enter layer 0 through a learned per-node embedding matrix. Logits
//! are a linear head over the final target-type activations.
//!
//! All math is f64. `forward` captures a [`ForwardTrace`] from which
//! [`backward`] computes exact gradients of the mean loss over a selected
//! node subset; nodes outside the selection still participate in message
//! passing.

mod backward;
mod forward;
mod gradcheck;

pub use backward::backward;
pub use forward::{forward, per_node_losses, ForwardTrace};
pub use gradcheck::{
    check_gradients, compare_gradients, finite_difference_gradients, selected_mean_loss,
    GradCheckReport,
};

use crate::error::{Error, Result};
use crate::graph::HeteroGraph;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::collections::BTreeMap;
use std::path::Path;

/// Model dimensions, fixed per run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    /// Width of input features (and of featureless-type embeddings).
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub num_classes: usize,
}

impl ModelDims {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("input_dim", self.input_dim),
            ("hidden_dim", self.hidden_dim),
            ("num_layers", self.num_layers),
            ("num_classes", self.num_classes),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("model dimension {name} must be positive")));
            }
        }
        Ok(())
    }

    /// `(d_in, d_out)` of layer `l`.
    pub fn layer_dims(&self, layer: usize) -> (usize, usize) {
        if layer == 0 {
            (self.input_dim, self.hidden_dim)
        } else {
            (self.hidden_dim, self.hidden_dim)
        }
    }
}

/// All learnable parameters of the backbone.
///
/// The same struct doubles as the gradient container: [`backward`] returns
/// one with every tensor holding the gradient of its namesake.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationalModelParams {
    pub dims: ModelDims,
    /// Self-transform per layer, `d_in x d_out`.
    pub self_weights: Vec<Array2<f64>>,
    /// Per-relation transform, indexed `[relation][layer]`.
    pub relation_weights: Vec<Vec<Array2<f64>>>,
    /// Learned input features per featureless node type (`count x input_dim`);
    /// `None` for types that carry real features.
    pub type_embeddings: Vec<Option<Array2<f64>>>,
    /// Final linear head, `hidden_dim x num_classes`.
    pub output_head: Array2<f64>,
    /// Relation names, parallel to `relation_weights`; used in checkpoint
    /// keys and error messages.
    pub relation_names: Vec<String>,
    /// Node type names, parallel to `type_embeddings`.
    pub type_names: Vec<String>,
}

/// Gradients carry the exact shape of the parameters.
pub type ModelGradients = RelationalModelParams;

impl RelationalModelParams {
    /// Same structure with every tensor zeroed.
    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        for (_, t) in out.tensors_mut() {
            t.fill(0.0);
        }
        out
    }

    /// Named tensors in canonical order (self weights, relation weights,
    /// embeddings, head). The order is stable across calls and instances
    /// with the same structure.
    pub fn tensors(&self) -> Vec<(String, &Array2<f64>)> {
        let mut out = Vec::new();
        for (l, w) in self.self_weights.iter().enumerate() {
            out.push((format!("self_w{l}"), w));
        }
        for (r, per_layer) in self.relation_weights.iter().enumerate() {
            for (l, w) in per_layer.iter().enumerate() {
                out.push((format!("rel_{}_w{l}", self.relation_names[r]), w));
            }
        }
        for (ty, emb) in self.type_embeddings.iter().enumerate() {
            if let Some(e) = emb {
                out.push((format!("embed_{}", self.type_names[ty]), e));
            }
        }
        out.push(("output_head".to_string(), &self.output_head));
        out
    }

    /// Mutable variant of [`Self::tensors`], same order.
    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Array2<f64>)> {
        let mut out = Vec::new();
        for (l, w) in self.self_weights.iter_mut().enumerate() {
            out.push((format!("self_w{l}"), w));
        }
        for (r, per_layer) in self.relation_weights.iter_mut().enumerate() {
            let name = &self.relation_names[r];
            for (l, w) in per_layer.iter_mut().enumerate() {
                out.push((format!("rel_{name}_w{l}"), w));
            }
        }
        for (ty, emb) in self.type_embeddings.iter_mut().enumerate() {
            if let Some(e) = emb {
                out.push((format!("embed_{}", self.type_names[ty]), e));
            }
        }
        out.push(("output_head".to_string(), &mut self.output_head));
        out
    }

    /// True when every entry of every tensor is finite.
    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }

    /// Total number of scalar parameters.
    pub fn num_entries(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Order-sensitive fingerprint of all parameter bits; cheap enough to
    /// take per forward pass, used to detect stale traces.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv1a::new();
        h.write_usize(self.dims.input_dim);
        h.write_usize(self.dims.hidden_dim);
        h.write_usize(self.dims.num_layers);
        h.write_usize(self.dims.num_classes);
        for (name, t) in self.tensors() {
            h.write_bytes(name.as_bytes());
            for &x in t.iter() {
                h.write_u64(x.to_bits());
            }
        }
        h.finish()
    }
}

/// Verifies that two parameter sets share tensor names and shapes, so a
/// gradient can be applied to (or compared against) the parameters it was
/// computed for.
pub fn check_same_structure(a: &RelationalModelParams, b: &RelationalModelParams) -> Result<()> {
    let at = a.tensors();
    let bt = b.tensors();
    if at.len() != bt.len() {
        return Err(Error::Shape(format!(
            "parameter sets have {} and {} tensors",
            at.len(),
            bt.len()
        )));
    }
    for ((an, av), (bn, bv)) in at.into_iter().zip(bt) {
        if an != bn || av.dim() != bv.dim() {
            return Err(Error::Shape(format!(
                "tensor mismatch: '{an}' {:?} vs '{bn}' {:?}",
                av.dim(),
                bv.dim()
            )));
        }
    }
    Ok(())
}

/// Uniform Xavier/Glorot bound for a `rows x cols` matrix.
pub fn xavier_bound(rows: usize, cols: usize) -> f64 {
    (6.0 / (rows + cols) as f64).sqrt()
}

/// Initializes parameters for `graph`: every matrix is drawn uniformly from
/// `[-a, a]` with `a = sqrt(6 / (rows + cols))`, deterministically per seed.
pub fn init_params(
    graph: &HeteroGraph,
    dims: &ModelDims,
    seed: u64,
) -> Result<RelationalModelParams> {
    dims.validate()?;
    let input_dim = graph.input_feature_dim()?;
    if input_dim != dims.input_dim {
        return Err(Error::Shape(format!(
            "graph features have dimension {input_dim} but the model expects {}",
            dims.input_dim
        )));
    }
    if graph.num_classes != dims.num_classes {
        return Err(Error::Shape(format!(
            "graph has {} classes but the model head expects {}",
            graph.num_classes, dims.num_classes
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut draw = |rows: usize, cols: usize| -> Array2<f64> {
        let a = xavier_bound(rows, cols);
        let mut m = Array2::zeros((rows, cols));
        for x in m.iter_mut() {
            *x = rng.random_range(-a..a);
        }
        m
    };

    let self_weights = (0..dims.num_layers)
        .map(|l| {
            let (din, dout) = dims.layer_dims(l);
            draw(din, dout)
        })
        .collect();
    let relation_weights = graph
        .relations
        .iter()
        .map(|_| {
            (0..dims.num_layers)
                .map(|l| {
                    let (din, dout) = dims.layer_dims(l);
                    draw(din, dout)
                })
                .collect()
        })
        .collect();
    let type_embeddings = graph
        .node_types
        .iter()
        .zip(&graph.features)
        .map(|(info, feats)| {
            if feats.is_some() {
                None
            } else {
                Some(draw(info.count, dims.input_dim))
            }
        })
        .collect();
    let output_head = draw(dims.hidden_dim, dims.num_classes);

    Ok(RelationalModelParams {
        dims: *dims,
        self_weights,
        relation_weights,
        type_embeddings,
        output_head,
        relation_names: graph.relations.iter().map(|r| r.name.clone()).collect(),
        type_names: graph.node_types.iter().map(|t| t.name.clone()).collect(),
    })
}

/// Writes a checkpoint: JSON map from tensor name to a 2-D array, floats at
/// full precision.
pub fn save_checkpoint(params: &RelationalModelParams, path: &Path) -> Result<()> {
    let map: BTreeMap<String, Vec<Vec<f64>>> = params
        .tensors()
        .into_iter()
        .map(|(name, t)| (name, t.rows().into_iter().map(|r| r.to_vec()).collect()))
        .collect();
    std::fs::write(path, crate::graph::to_json_full_precision(&map)?)?;
    Ok(())
}

/// Reads a checkpoint written by [`save_checkpoint`]. `template` supplies
/// the parameter structure (from [`init_params`]); names and shapes in the
/// file must match it exactly.
pub fn load_checkpoint(path: &Path, template: &RelationalModelParams) -> Result<RelationalModelParams> {
    let body = std::fs::read_to_string(path)?;
    let map: BTreeMap<String, Vec<Vec<f64>>> =
        serde_json::from_str(&body).map_err(Error::from_json)?;
    let mut out = template.clone();
    let mut expected: Vec<String> = Vec::new();
    for (name, tensor) in out.tensors_mut() {
        let rows = map.get(&name).ok_or_else(|| {
            Error::Validation(format!("checkpoint is missing tensor '{name}'"))
        })?;
        if rows.len() != tensor.nrows() || rows.iter().any(|r| r.len() != tensor.ncols()) {
            return Err(Error::Shape(format!(
                "checkpoint tensor '{name}' does not match shape {}x{}",
                tensor.nrows(),
                tensor.ncols()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                tensor[[i, j]] = x;
            }
        }
        expected.push(name);
    }
    for name in map.keys() {
        if !expected.contains(name) {
            return Err(Error::Validation(format!("checkpoint has unknown tensor '{name}'")));
        }
    }
    Ok(out)
}

/// FNV-1a, 64-bit.
struct Fnv1a(u64);

impl Fnv1a {
    fn new() -> Self {
        Fnv1a(0xcbf2_9ce4_8422_2325)
    }
    fn write_bytes(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x1000_0000_01b3);
        }
    }
    fn write_u64(&mut self, v: u64) {
        self.write_bytes(&v.to_le_bytes());
    }
    fn write_usize(&mut self, v: usize) {
        self.write_u64(v as u64);
    }
    fn finish(&self) -> u64 {
        self.0
    }
}

/// Fingerprint of the graph structure and labels, for trace staleness checks.
pub(crate) fn graph_fingerprint(graph: &HeteroGraph) -> u64 {
    let mut h = Fnv1a::new();
    for t in &graph.node_types {
        h.write_bytes(t.name.as_bytes());
        h.write_usize(t.count);
    }
    for f in graph.features.iter().flatten() {
        for &x in f.iter() {
            h.write_u64(x.to_bits());
        }
    }
    for (r, edges) in graph.relations.iter().zip(&graph.edges) {
        h.write_bytes(r.name.as_bytes());
        h.write_usize(r.src);
        h.write_usize(r.dst);
        for &(u, v) in edges {
            h.write_usize(u);
            h.write_usize(v);
        }
    }
    h.write_usize(graph.target_type);
    for &y in &graph.labels {
        h.write_usize(y);
    }
    h.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_synthetic, SyntheticSpec};

    fn small_graph() -> HeteroGraph {
        generate_synthetic(&SyntheticSpec::citation(12, 6, 2), 3).unwrap()
    }

    fn dims(graph: &HeteroGraph) -> ModelDims {
        ModelDims {
            input_dim: graph.input_feature_dim().unwrap(),
            hidden_dim: 5,
            num_layers: 2,
            num_classes: graph.num_classes,
        }
    }

    #[test]
    fn xavier_bound_for_square_3x3_is_one() {
        assert_eq!(xavier_bound(3, 3), 1.0);
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let g = small_graph();
        let d = dims(&g);
        let a = init_params(&g, &d, 9).unwrap();
        let b = init_params(&g, &d, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, init_params(&g, &d, 10).unwrap());
    }

    #[test]
    fn init_entries_stay_within_bound_and_center_on_zero() {
        let g = small_graph();
        let d = ModelDims { hidden_dim: 40, ..dims(&g) };
        let p = init_params(&g, &d, 1).unwrap();
        // The first hidden layer alone has 40x40 = 1600 entries; pool all
        // tensors for the sampling check (> 10^4 draws in total).
        let mut n = 0usize;
        let mut sum = 0.0;
        for (name, t) in p.tensors() {
            let a = xavier_bound(t.nrows(), t.ncols());
            for &x in t.iter() {
                assert!(x > -a && x < a, "{name}: {x} outside [-{a}, {a}]");
                sum += x / a; // normalize so tensors with different bounds pool
                n += 1;
            }
        }
        assert!(n > 10_000, "need > 10^4 draws, got {n}");
        let mean = sum / n as f64;
        assert!(mean.abs() < 0.05, "normalized mean {mean} too far from zero");
    }

    #[test]
    fn zero_dimension_is_a_config_error() {
        let g = small_graph();
        let d = ModelDims { hidden_dim: 0, ..dims(&g) };
        assert!(matches!(init_params(&g, &d, 1), Err(Error::Config(_))));
    }

    #[test]
    fn featureless_types_get_embeddings_and_featured_do_not() {
        let g = small_graph();
        let p = init_params(&g, &dims(&g), 2).unwrap();
        assert!(p.type_embeddings[0].is_none(), "paper has features");
        let emb = p.type_embeddings[1].as_ref().expect("author is featureless");
        assert_eq!(emb.nrows(), 6);
        assert_eq!(emb.ncols(), g.input_feature_dim().unwrap());
    }

    #[test]
    fn checkpoint_round_trips() {
        let g = small_graph();
        let p = init_params(&g, &dims(&g), 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.json");
        save_checkpoint(&p, &path).unwrap();
        let template = init_params(&g, &dims(&g), 99).unwrap();
        let loaded = load_checkpoint(&path, &template).unwrap();
        assert_eq!(p, loaded);
    }

    #[test]
    fn fingerprint_tracks_parameter_changes() {
        let g = small_graph();
        let mut p = init_params(&g, &dims(&g), 4).unwrap();
        let before = p.fingerprint();
        p.output_head[[0, 0]] += 1e-9;
        assert_ne!(before, p.fingerprint());
    }
}
