//! Finite-difference gradient oracle.
//!
//! Numeric gradients come from central differences over the forward pass
//! alone, so they are an independent check on [`super::backward`].

use super::{backward, forward, per_node_losses, ModelGradients, RelationalModelParams};
use crate::error::{Error, Result};
use crate::graph::HeteroGraph;

/// Entries whose analytic and numeric magnitudes both fall below this floor
/// are compared against the floor instead, so noise around a true zero does
/// not register as a huge relative error.
const REL_ERROR_FLOOR: f64 = 1e-6;

/// Mean loss over `selected`, recomputed from scratch.
pub fn selected_mean_loss(
    graph: &HeteroGraph,
    params: &RelationalModelParams,
    selected: &[usize],
) -> Result<f64> {
    if selected.is_empty() {
        return Err(Error::Contract("selected_mean_loss requires a nonempty selection".into()));
    }
    let (logits, _) = forward(graph, params)?;
    let losses = per_node_losses(&logits, &graph.labels, selected)?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Central finite differences of the selected-mean loss for every parameter
/// entry: `(L(p + eps) - L(p - eps)) / (2 eps)`.
pub fn finite_difference_gradients(
    graph: &HeteroGraph,
    params: &RelationalModelParams,
    selected: &[usize],
    epsilon: f64,
) -> Result<ModelGradients> {
    if !(epsilon > 0.0) {
        return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
    }
    let mut work = params.clone();
    let mut grads = params.zeros_like();
    let n_tensors = params.tensors().len();
    for t_idx in 0..n_tensors {
        let (rows, cols) = {
            let t = params.tensors()[t_idx].1;
            (t.nrows(), t.ncols())
        };
        for i in 0..rows {
            for j in 0..cols {
                let original = params.tensors()[t_idx].1[[i, j]];
                work.tensors_mut()[t_idx].1[[i, j]] = original + epsilon;
                let plus = selected_mean_loss(graph, &work, selected)?;
                work.tensors_mut()[t_idx].1[[i, j]] = original - epsilon;
                let minus = selected_mean_loss(graph, &work, selected)?;
                work.tensors_mut()[t_idx].1[[i, j]] = original;
                grads.tensors_mut()[t_idx].1[[i, j]] = (plus - minus) / (2.0 * epsilon);
            }
        }
    }
    Ok(grads)
}

/// Outcome of comparing analytic against numeric gradients.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_tensor: String,
    pub worst_entry: (usize, usize),
    pub entries_checked: usize,
}

impl GradCheckReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }
}

/// Elementwise relative error between two gradient sets of equal structure.
pub fn compare_gradients(
    analytic: &ModelGradients,
    numeric: &ModelGradients,
) -> Result<GradCheckReport> {
    let a_tensors = analytic.tensors();
    let n_tensors = numeric.tensors();
    if a_tensors.len() != n_tensors.len() {
        return Err(Error::Shape("gradient sets have different tensor counts".into()));
    }
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_tensor: String::new(),
        worst_entry: (0, 0),
        entries_checked: 0,
    };
    for ((name, a), (n_name, n)) in a_tensors.into_iter().zip(n_tensors) {
        if name != n_name || a.dim() != n.dim() {
            return Err(Error::Shape(format!(
                "gradient tensors disagree: '{name}' {:?} vs '{n_name}' {:?}",
                a.dim(),
                n.dim()
            )));
        }
        for ((i, j), (&x, &y)) in a.indexed_iter().map(|(idx, v)| (idx, (v, &n[idx]))) {
            let denom = x.abs().max(y.abs()).max(REL_ERROR_FLOOR);
            let rel = (x - y).abs() / denom;
            report.entries_checked += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_tensor = name.clone();
                report.worst_entry = (i, j);
            }
        }
    }
    Ok(report)
}

/// Runs the full oracle: analytic backward vs central differences.
pub fn check_gradients(
    graph: &HeteroGraph,
    params: &RelationalModelParams,
    selected: &[usize],
    epsilon: f64,
) -> Result<GradCheckReport> {
    let (_, trace) = forward(graph, params)?;
    let analytic = backward(&trace, selected, graph, params)?;
    let numeric = finite_difference_gradients(graph, params, selected, epsilon)?;
    compare_gradients(&analytic, &numeric)
}
