//! Uniform symmetric label flipping on the train split.

use super::HeteroGraph;
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

/// Which training labels were replaced, and what they were before.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NoiseRecord {
    /// Target-type node indices whose training labels were flipped.
    pub flipped: BTreeSet<usize>,
    /// Pre-flip class for every flipped index.
    pub original_labels: BTreeMap<usize, usize>,
}

impl NoiseRecord {
    /// Fraction of the given train split that was flipped.
    pub fn global_noisy_fraction(&self, train_size: usize) -> f64 {
        if train_size == 0 {
            0.0
        } else {
            self.flipped.len() as f64 / train_size as f64
        }
    }
}

/// Replaces the labels of exactly `floor(rho * |train|)` training nodes,
/// chosen uniformly without replacement, by a uniformly drawn *different*
/// class. Validation and test labels are untouched. Deterministic per seed.
pub fn inject_label_noise(
    graph: &HeteroGraph,
    rho: f64,
    seed: u64,
) -> Result<(HeteroGraph, NoiseRecord)> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Config(format!("noise fraction rho {rho} outside [0, 1]")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n_flips = (rho * graph.splits.train.len() as f64).floor() as usize;

    let mut order = graph.splits.train.clone();
    order.shuffle(&mut rng);
    let mut flipped_sorted: Vec<usize> = order[..n_flips].to_vec();
    flipped_sorted.sort_unstable();

    let mut noisy = graph.clone();
    let mut record = NoiseRecord::default();
    for idx in flipped_sorted {
        let original = graph.labels[idx];
        // Uniform over the other num_classes - 1 classes.
        let draw = rng.random_range(0..graph.num_classes - 1);
        let new_label = if draw >= original { draw + 1 } else { draw };
        noisy.labels[idx] = new_label;
        record.flipped.insert(idx);
        record.original_labels.insert(idx, original);
    }
    Ok((noisy, record))
}

/// Serialized form of a [`NoiseRecord`], kept as a sidecar JSON file so a
/// training run can compute exclusion diagnostics on a stored graph.
#[derive(Debug, Serialize, Deserialize)]
struct NoiseFile {
    flipped: Vec<usize>,
    /// `[index, original_label]` pairs, sorted by index.
    original_labels: Vec<[usize; 2]>,
}

pub fn save_noise_record(record: &NoiseRecord, path: &Path) -> Result<()> {
    let file = NoiseFile {
        flipped: record.flipped.iter().copied().collect(),
        original_labels: record.original_labels.iter().map(|(&i, &y)| [i, y]).collect(),
    };
    let body = serde_json::to_string_pretty(&file).map_err(Error::from_json)?;
    std::fs::write(path, body)?;
    Ok(())
}

pub fn load_noise_record(path: &Path) -> Result<NoiseRecord> {
    let body = std::fs::read_to_string(path)?;
    let file: NoiseFile = serde_json::from_str(&body).map_err(Error::from_json)?;
    let record = NoiseRecord {
        flipped: file.flipped.into_iter().collect(),
        original_labels: file.original_labels.into_iter().map(|[i, y]| (i, y)).collect(),
    };
    if record.flipped.len() != record.original_labels.len()
        || !record.original_labels.keys().all(|i| record.flipped.contains(i))
    {
        return Err(Error::Validation(
            "noise record: flipped set and original_labels keys disagree".into(),
        ));
    }
    Ok(record)
}
