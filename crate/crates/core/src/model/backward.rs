//! Reverse-mode gradients of the selected-mean loss.

use super::{graph_fingerprint, ForwardTrace, ModelGradients, RelationalModelParams};
use crate::error::{Error, Result};
use crate::graph::HeteroGraph;
use ndarray::Array2;

/// Gradients of `mean(loss_v for v in selected)` with respect to every
/// parameter tensor.
///
/// Only selected nodes contribute loss terms, but every node still routes
/// messages, so gradients flow into non-selected activations wherever they
/// feed a selected node's receptive field. The trace must come from a
/// `forward` over the same graph and parameters; anything stale is rejected.
pub fn backward(
    trace: &ForwardTrace,
    selected: &[usize],
    graph: &HeteroGraph,
    params: &RelationalModelParams,
) -> Result<ModelGradients> {
    if selected.is_empty() {
        return Err(Error::Contract("backward requires a nonempty selection".into()));
    }
    if trace.params_fp != params.fingerprint() {
        return Err(Error::Contract(
            "stale trace: parameters changed since the forward pass".into(),
        ));
    }
    if trace.graph_fp != graph_fingerprint(graph) {
        return Err(Error::Contract(
            "stale trace: graph changed since the forward pass".into(),
        ));
    }
    let n_target = graph.target_count();
    for &v in selected {
        if v >= n_target {
            return Err(Error::Index { index: v, len: n_target, what: "target nodes" });
        }
    }

    let dims = &params.dims;
    let num_layers = dims.num_layers;
    let k = selected.len() as f64;

    // d loss / d logits: (softmax - onehot) / k on selected rows, zero elsewhere.
    let mut dlogits = Array2::<f64>::zeros(trace.logits.dim());
    for &v in selected {
        let row = trace.logits.row(v);
        let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let exps: Vec<f64> = row.iter().map(|&z| (z - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        for (j, &e) in exps.iter().enumerate() {
            let indicator = if j == graph.labels[v] { 1.0 } else { 0.0 };
            dlogits[[v, j]] = (e / sum - indicator) / k;
        }
    }

    let mut grads = params.zeros_like();
    let final_acts = &trace.activations[num_layers];
    grads.output_head = final_acts[graph.target_type].t().dot(&dlogits);

    // Gradient w.r.t. activations, per node type, at the current layer top.
    let mut d_acts: Vec<Array2<f64>> = graph
        .node_types
        .iter()
        .map(|t| Array2::zeros((t.count, dims.hidden_dim)))
        .collect();
    d_acts[graph.target_type] = dlogits.dot(&params.output_head.t());

    for l in (0..num_layers).rev() {
        let (din, _) = dims.layer_dims(l);
        // ReLU: pass gradient only where the pre-activation was positive.
        let d_pre: Vec<Array2<f64>> = d_acts
            .iter()
            .zip(&trace.pre_activations[l])
            .map(|(da, z)| {
                let mut dz = da.clone();
                dz.zip_mut_with(z, |g, &zv| {
                    if zv <= 0.0 {
                        *g = 0.0;
                    }
                });
                dz
            })
            .collect();

        for (ty, dz) in d_pre.iter().enumerate() {
            grads.self_weights[l] += &trace.activations[l][ty].t().dot(dz);
        }

        let mut d_prev: Vec<Array2<f64>> = graph
            .node_types
            .iter()
            .map(|t| Array2::zeros((t.count, din)))
            .collect();
        for (ty, dz) in d_pre.iter().enumerate() {
            d_prev[ty] += &dz.dot(&params.self_weights[l].t());
        }
        for (r, rel) in graph.relations.iter().enumerate() {
            let dz = &d_pre[rel.dst];
            grads.relation_weights[r][l] = trace.rel_means[l][r].t().dot(dz);
            let d_mean = dz.dot(&params.relation_weights[r][l].t());
            for &(u, v) in &graph.edges[r] {
                let scaled = &d_mean.row(v) / trace.in_degrees[r][v];
                let mut dst = d_prev[rel.src].row_mut(u);
                dst += &scaled;
            }
        }
        d_acts = d_prev;
    }

    for (ty, emb) in grads.type_embeddings.iter_mut().enumerate() {
        if let Some(e) = emb {
            e.assign(&d_acts[ty]);
        }
    }
    Ok(grads)
}
