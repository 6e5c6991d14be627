//! Forward pass and per-node losses.

use super::{graph_fingerprint, ModelDims, RelationalModelParams};
use crate::error::{Error, Result};
use crate::graph::HeteroGraph;
use ndarray::Array2;

/// Everything the backward pass needs from a forward pass.
///
/// Carries fingerprints of the parameters and graph it was computed from;
/// [`super::backward`] refuses a trace whose inputs have changed since.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Activations per layer and node type; `[0]` holds the layer inputs
    /// (features or embeddings), `[num_layers]` the final activations.
    pub(crate) activations: Vec<Vec<Array2<f64>>>,
    /// Pre-ReLU values per layer and node type.
    pub(crate) pre_activations: Vec<Vec<Array2<f64>>>,
    /// Mean-aggregated neighbor features per layer and relation.
    pub(crate) rel_means: Vec<Vec<Array2<f64>>>,
    /// In-degree per relation and destination node.
    pub(crate) in_degrees: Vec<Vec<f64>>,
    pub(crate) logits: Array2<f64>,
    pub(crate) params_fp: u64,
    pub(crate) graph_fp: u64,
}

fn check_shapes(graph: &HeteroGraph, params: &RelationalModelParams) -> Result<()> {
    let dims = &params.dims;
    dims.validate()?;
    if params.self_weights.len() != dims.num_layers {
        return Err(Error::Shape(format!(
            "{} self-weight matrices for {} layers",
            params.self_weights.len(),
            dims.num_layers
        )));
    }
    if params.relation_weights.len() != graph.relations.len() {
        return Err(Error::Shape(format!(
            "weights for {} relations but the graph has {}",
            params.relation_weights.len(),
            graph.relations.len()
        )));
    }
    for l in 0..dims.num_layers {
        let (din, dout) = dims.layer_dims(l);
        let w = &params.self_weights[l];
        if w.dim() != (din, dout) {
            return Err(Error::Shape(format!(
                "self weights at layer {l}: expected {din}x{dout}, got {}x{}",
                w.nrows(),
                w.ncols()
            )));
        }
        for (r, rel) in graph.relations.iter().enumerate() {
            let w = &params.relation_weights[r][l];
            if w.dim() != (din, dout) {
                return Err(Error::Shape(format!(
                    "relation '{}' weights at layer {l}: expected {din}x{dout}, got {}x{}",
                    rel.name,
                    w.nrows(),
                    w.ncols()
                )));
            }
        }
    }
    if params.type_embeddings.len() != graph.node_types.len() {
        return Err(Error::Shape(format!(
            "embeddings declared for {} node types but the graph has {}",
            params.type_embeddings.len(),
            graph.node_types.len()
        )));
    }
    for (ty, info) in graph.node_types.iter().enumerate() {
        match (&graph.features[ty], &params.type_embeddings[ty]) {
            (Some(f), _) => {
                if f.ncols() != dims.input_dim {
                    return Err(Error::Shape(format!(
                        "features for '{}' have dimension {} but the model expects {}",
                        info.name,
                        f.ncols(),
                        dims.input_dim
                    )));
                }
            }
            (None, Some(e)) => {
                if e.dim() != (info.count, dims.input_dim) {
                    return Err(Error::Shape(format!(
                        "embedding for '{}': expected {}x{}, got {}x{}",
                        info.name,
                        info.count,
                        dims.input_dim,
                        e.nrows(),
                        e.ncols()
                    )));
                }
            }
            (None, None) => {
                return Err(Error::Shape(format!(
                    "node type '{}' has neither features nor a learned embedding",
                    info.name
                )));
            }
        }
    }
    if params.output_head.dim() != (dims.hidden_dim, dims.num_classes) {
        return Err(Error::Shape(format!(
            "output head: expected {}x{}, got {}x{}",
            dims.hidden_dim,
            dims.num_classes,
            params.output_head.nrows(),
            params.output_head.ncols()
        )));
    }
    Ok(())
}

/// Mean over in-neighbors of each destination node; zero rows for nodes
/// without neighbors under this relation.
fn aggregate_means(
    src_acts: &Array2<f64>,
    edges: &[(usize, usize)],
    dst_count: usize,
    in_degrees: &[f64],
) -> Array2<f64> {
    let mut m = Array2::zeros((dst_count, src_acts.ncols()));
    for &(u, v) in edges {
        let src_row = src_acts.row(u);
        let mut dst_row = m.row_mut(v);
        dst_row += &src_row;
    }
    for (v, mut row) in m.rows_mut().into_iter().enumerate() {
        if in_degrees[v] > 0.0 {
            row /= in_degrees[v];
        }
    }
    m
}

/// Runs the backbone over the whole graph.
///
/// Returns logits for every target-type node (`|target| x num_classes`, no
/// activation applied) plus the trace consumed by [`super::backward`].
pub fn forward(
    graph: &HeteroGraph,
    params: &RelationalModelParams,
) -> Result<(Array2<f64>, ForwardTrace)> {
    check_shapes(graph, params)?;
    let dims: &ModelDims = &params.dims;

    let in_degrees: Vec<Vec<f64>> = graph
        .relations
        .iter()
        .zip(&graph.edges)
        .map(|(rel, edges)| {
            let mut deg = vec![0.0; graph.node_types[rel.dst].count];
            for &(_, v) in edges {
                deg[v] += 1.0;
            }
            deg
        })
        .collect();

    let inputs: Vec<Array2<f64>> = graph
        .node_types
        .iter()
        .enumerate()
        .map(|(ty, _)| match &graph.features[ty] {
            Some(f) => f.clone(),
            None => params.type_embeddings[ty].as_ref().expect("checked").clone(),
        })
        .collect();

    let mut activations = vec![inputs];
    let mut pre_activations = Vec::with_capacity(dims.num_layers);
    let mut rel_means = Vec::with_capacity(dims.num_layers);

    for l in 0..dims.num_layers {
        let current = &activations[l];
        let mut z: Vec<Array2<f64>> = current
            .iter()
            .map(|h| h.dot(&params.self_weights[l]))
            .collect();
        let mut means_l = Vec::with_capacity(graph.relations.len());
        for (r, rel) in graph.relations.iter().enumerate() {
            let m = aggregate_means(
                &current[rel.src],
                &graph.edges[r],
                graph.node_types[rel.dst].count,
                &in_degrees[r],
            );
            z[rel.dst] += &m.dot(&params.relation_weights[r][l]);
            means_l.push(m);
        }
        let next: Vec<Array2<f64>> = z.iter().map(|m| m.mapv(|x| x.max(0.0))).collect();
        pre_activations.push(z);
        rel_means.push(means_l);
        activations.push(next);
    }

    let logits = activations[dims.num_layers][graph.target_type].dot(&params.output_head);
    let trace = ForwardTrace {
        activations,
        pre_activations,
        rel_means,
        in_degrees,
        logits: logits.clone(),
        params_fp: params.fingerprint(),
        graph_fp: graph_fingerprint(graph),
    };
    Ok((logits, trace))
}

/// Cross-entropy loss per node, in `node_indices` order, no reduction.
///
/// `L_v = -log softmax(z_v)[y_v]`, computed with max subtraction.
pub fn per_node_losses(
    logits: &Array2<f64>,
    labels: &[usize],
    node_indices: &[usize],
) -> Result<Vec<f64>> {
    let n = logits.nrows();
    if labels.len() != n {
        return Err(Error::Shape(format!(
            "{} labels for {} logit rows",
            labels.len(),
            n
        )));
    }
    let mut out = Vec::with_capacity(node_indices.len());
    for &v in node_indices {
        if v >= n {
            return Err(Error::Index { index: v, len: n, what: "target nodes" });
        }
        let row = logits.row(v);
        let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let log_sum_exp = row.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
        out.push(log_sum_exp - (row[labels[v]] - max));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{NodeTypeInfo, Relation, Splits};
    use crate::model::init_params;
    use ndarray::array;

    /// Three featured nodes, one self-relation with edges 0->1, 2->1, 1->0.
    fn toy_graph() -> HeteroGraph {
        let g = HeteroGraph {
            node_types: vec![NodeTypeInfo { name: "n".into(), count: 3 }],
            features: vec![Some(array![[1.0, 2.0], [-1.0, 0.5], [0.25, -2.0]])],
            relations: vec![Relation { name: "r".into(), src: 0, dst: 0 }],
            edges: vec![vec![(0, 1), (2, 1), (1, 0)]],
            target_type: 0,
            labels: vec![0, 1, 0],
            num_classes: 2,
            splits: Splits { train: vec![0, 1, 2], val: vec![], test: vec![] },
        };
        g.validate().unwrap();
        g
    }

    fn toy_params(graph: &HeteroGraph) -> RelationalModelParams {
        let dims = ModelDims { input_dim: 2, hidden_dim: 2, num_layers: 2, num_classes: 2 };
        let mut p = init_params(graph, &dims, 0).unwrap();
        p.self_weights[0] = array![[0.3, -0.2], [0.1, 0.4]];
        p.self_weights[1] = array![[-0.5, 0.6], [0.2, 0.1]];
        p.relation_weights[0][0] = array![[0.7, 0.0], [-0.3, 0.5]];
        p.relation_weights[0][1] = array![[0.2, -0.1], [0.4, 0.3]];
        p.output_head = array![[1.0, -1.0], [0.5, 2.0]];
        p
    }

    /// Scalar re-implementation of the layer rule, kept free of ndarray ops.
    fn forward_by_hand(graph: &HeteroGraph, p: &RelationalModelParams) -> Vec<Vec<f64>> {
        let feats = graph.features[0].as_ref().unwrap();
        let n = 3;
        let mut h: Vec<Vec<f64>> = (0..n).map(|v| vec![feats[[v, 0]], feats[[v, 1]]]).collect();
        for l in 0..2 {
            let ws = &p.self_weights[l];
            let wr = &p.relation_weights[0][l];
            let mut next = vec![vec![0.0; 2]; n];
            for v in 0..n {
                // Mean over in-neighbors under the single relation.
                let neighbors: Vec<usize> = graph.edges[0]
                    .iter()
                    .filter(|&&(_, dst)| dst == v)
                    .map(|&(src, _)| src)
                    .collect();
                let mut mean = vec![0.0; 2];
                for &u in &neighbors {
                    for d in 0..2 {
                        mean[d] += h[u][d] / neighbors.len() as f64;
                    }
                }
                for j in 0..2 {
                    let mut z = 0.0;
                    for i in 0..2 {
                        z += h[v][i] * ws[[i, j]] + mean[i] * wr[[i, j]];
                    }
                    next[v][j] = z.max(0.0);
                }
            }
            h = next;
        }
        let head = &p.output_head;
        (0..n)
            .map(|v| {
                (0..2)
                    .map(|c| (0..2).map(|i| h[v][i] * head[[i, c]]).sum())
                    .collect()
            })
            .collect()
    }

    #[test]
    fn two_layer_forward_matches_hand_computation() {
        let g = toy_graph();
        let p = toy_params(&g);
        let (logits, _) = forward(&g, &p).unwrap();
        let expected = forward_by_hand(&g, &p);
        for v in 0..3 {
            for c in 0..2 {
                assert!(
                    (logits[[v, c]] - expected[v][c]).abs() < 1e-12,
                    "logits[{v},{c}] = {} vs hand {}",
                    logits[[v, c]],
                    expected[v][c]
                );
            }
        }
    }

    #[test]
    fn zero_edges_leave_only_the_self_path() {
        let mut g = toy_graph();
        g.edges[0].clear();
        let p = toy_params(&g);
        let (logits, _) = forward(&g, &p).unwrap();
        // Relation weights must not influence an edgeless graph.
        let mut p2 = p.clone();
        p2.relation_weights[0][0] = array![[9.0, 9.0], [9.0, 9.0]];
        p2.relation_weights[0][1] = array![[-9.0, 9.0], [9.0, -9.0]];
        let (logits2, _) = forward(&g, &p2).unwrap();
        assert_eq!(logits, logits2);
    }

    #[test]
    fn all_zero_weights_give_all_zero_logits() {
        let g = toy_graph();
        let p = toy_params(&g).zeros_like();
        let (logits, _) = forward(&g, &p).unwrap();
        assert!(logits.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn shape_mismatch_names_the_relation_and_layer() {
        let g = toy_graph();
        let mut p = toy_params(&g);
        p.relation_weights[0][1] = array![[0.1], [0.2]];
        let err = forward(&g, &p).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("relation 'r'"), "{msg}");
        assert!(msg.contains("layer 1"), "{msg}");
    }

    #[test]
    fn uniform_logits_loss_is_ln_two() {
        let logits = array![[0.0, 0.0]];
        let loss = per_node_losses(&logits, &[0], &[0]).unwrap();
        assert!((loss[0] - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn saturated_correct_class_loss_vanishes() {
        let logits = array![[100.0, 0.0]];
        let loss = per_node_losses(&logits, &[0], &[0]).unwrap();
        assert!(loss[0] >= 0.0);
        assert!(loss[0] < 1e-12);
    }

    #[test]
    fn wrong_class_loss_matches_closed_form() {
        let logits = array![[1.0, -1.0]];
        let loss = per_node_losses(&logits, &[1], &[0]).unwrap();
        let expected = (1.0 + (2.0f64).exp()).ln(); // -log(e^-1 / (e^1 + e^-1))
        assert!((loss[0] - expected).abs() < 1e-12);
        assert!((loss[0] - 2.126_928).abs() < 1e-6);
    }

    #[test]
    fn loss_order_follows_node_indices() {
        let logits = array![[0.0, 0.0], [5.0, 0.0], [0.0, 5.0]];
        let labels = [0, 0, 0];
        let losses = per_node_losses(&logits, &labels, &[2, 0, 1]).unwrap();
        assert!(losses[0] > losses[1] && losses[1] > losses[2]);
    }

    #[test]
    fn out_of_range_node_index_is_reported() {
        let logits = array![[0.0, 0.0]];
        let err = per_node_losses(&logits, &[0], &[3]).unwrap_err();
        assert!(matches!(err, Error::Index { index: 3, .. }), "{err}");
    }

    #[test]
    fn losses_are_nonnegative_and_zero_only_at_point_mass() {
        let g = toy_graph();
        let p = toy_params(&g);
        let (logits, _) = forward(&g, &p).unwrap();
        let losses = per_node_losses(&logits, &g.labels, &[0, 1, 2]).unwrap();
        for (v, &l) in losses.iter().enumerate() {
            assert!(l >= 0.0, "negative loss at node {v}");
        }
    }

    #[test]
    fn permuting_target_nodes_permutes_logits() {
        let g = toy_graph();
        let p = toy_params(&g);
        let (logits, _) = forward(&g, &p).unwrap();

        // Apply permutation [2, 0, 1]: new index i holds old node perm[i].
        let perm = [2usize, 0, 1];
        let mut inv = [0usize; 3];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let feats = g.features[0].as_ref().unwrap();
        let mut permuted = g.clone();
        for (new, &old) in perm.iter().enumerate() {
            permuted.labels[new] = g.labels[old];
            for d in 0..2 {
                permuted.features[0].as_mut().unwrap()[[new, d]] = feats[[old, d]];
            }
        }
        permuted.edges[0] = g.edges[0].iter().map(|&(u, v)| (inv[u], inv[v])).collect();
        permuted.splits = Splits {
            train: g.splits.train.iter().map(|&i| inv[i]).collect(),
            val: vec![],
            test: vec![],
        };
        permuted.validate().unwrap();

        let (permuted_logits, _) = forward(&permuted, &p).unwrap();
        for new in 0..3 {
            for c in 0..2 {
                assert!(
                    (permuted_logits[[new, c]] - logits[[perm[new], c]]).abs() == 0.0,
                    "logits not equivariant at node {new}"
                );
            }
        }
    }
}
