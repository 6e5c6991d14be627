//! Multi-class accuracy and curriculum diagnostics.

use crate::error::{Error, Result};
use crate::graph::NoiseRecord;
use crate::schedule::SelectionResult;
use ndarray::Array2;

/// Fraction of exact matches between predictions and labels.
pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::Contract(format!(
            "{} predictions against {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Contract("accuracy over an empty set is undefined".into()));
    }
    let correct = predictions.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(correct as f64 / predictions.len() as f64)
}

/// Argmax class per logit row; ties break toward the lowest class id.
pub fn argmax_predictions(logits: &Array2<f64>) -> Vec<usize> {
    logits
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &z) in row.iter().enumerate() {
                if z > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// How selectively the curriculum excluded noise-flipped nodes.
///
/// `selection` must be over the same train split (in the same order) that
/// produced `noise`; `train_nodes` maps selection positions to node ids.
/// Returns `(excluded_noisy_fraction, global_noisy_fraction)` where the
/// first is `|flipped ∩ excluded| / |excluded|` (0 when nothing is
/// excluded) and the second `|flipped| / |train|`.
pub fn exclusion_purity(
    selection: &SelectionResult,
    train_nodes: &[usize],
    noise: &NoiseRecord,
) -> Result<(f64, f64)> {
    if selection.sorted_indices.len() != train_nodes.len() {
        return Err(Error::Contract(format!(
            "selection covers {} positions but the train split has {} nodes",
            selection.sorted_indices.len(),
            train_nodes.len()
        )));
    }
    let global = noise.global_noisy_fraction(train_nodes.len());
    let excluded = selection.excluded();
    if excluded.is_empty() {
        return Ok((0.0, global));
    }
    let noisy_excluded = excluded
        .iter()
        .filter(|&&pos| noise.flipped.contains(&train_nodes[pos]))
        .count();
    Ok((noisy_excluded as f64 / excluded.len() as f64, global))
}
