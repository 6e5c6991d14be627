//! Per-epoch training reports and schedule-comparison summaries.

use serde::Serialize;

/// One row of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRow {
    pub epoch: usize,
    /// Proportion of the train split eligible this epoch.
    pub lambda: f64,
    /// Number of selected training nodes.
    pub selected: usize,
    /// Mean loss over the selected nodes, before the update.
    pub mean_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    pub test_acc: f64,
    /// Measured wall time of this epoch. Reported here for callers; the CSV
    /// serialization keeps its `ms` column at 0 so that identical-seed runs
    /// produce identical bytes (timings go to logs instead of artifacts).
    pub wall_ms: f64,
    /// Fraction of curriculum-excluded nodes that were noise-flipped;
    /// present when the run was given a noise record.
    pub excl_noisy_frac: Option<f64>,
    /// Fraction of the whole train split that was noise-flipped.
    pub global_noisy_frac: Option<f64>,
}

/// Full record of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub rows: Vec<EpochRow>,
    /// Earliest epoch achieving the best validation accuracy.
    pub best_val_epoch: usize,
    pub best_val_acc: f64,
    /// Test accuracy measured at `best_val_epoch`.
    pub test_acc_at_best: f64,
}

impl TrainReport {
    /// Renders the per-epoch CSV. Diagnostics columns appear only when the
    /// run recorded them.
    pub fn to_csv(&self) -> String {
        let with_noise = self.rows.iter().any(|r| r.excl_noisy_frac.is_some());
        let mut out = String::from("epoch,lambda,selected,mean_loss,train_acc,val_acc,test_acc,ms");
        if with_noise {
            out.push_str(",excl_noisy_frac,global_noisy_frac");
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:?},{},{:?},{:?},{:?},{:?},0",
                r.epoch, r.lambda, r.selected, r.mean_loss, r.train_acc, r.val_acc, r.test_acc
            ));
            if with_noise {
                out.push_str(&format!(
                    ",{:?},{:?}",
                    r.excl_noisy_frac.unwrap_or(0.0),
                    r.global_noisy_frac.unwrap_or(0.0)
                ));
            }
            out.push('\n');
        }
        out
    }

    /// One-line JSON summary of the run outcome.
    pub fn summary_json(&self) -> String {
        #[derive(Serialize)]
        struct Summary {
            best_val_epoch: usize,
            best_val_acc: f64,
            test_acc_at_best: f64,
            epochs: usize,
        }
        serde_json::to_string(&Summary {
            best_val_epoch: self.best_val_epoch,
            best_val_acc: self.best_val_acc,
            test_acc_at_best: self.test_acc_at_best,
            epochs: self.rows.len(),
        })
        .expect("summary serializes")
    }

    /// Total measured wall time across epochs, for logging.
    pub fn total_wall_ms(&self) -> f64 {
        self.rows.iter().map(|r| r.wall_ms).sum()
    }
}

/// Mean and population standard deviation.
pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Result of one seed in a baseline-vs-curriculum comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedComparison {
    pub seed: u64,
    pub baseline_val: f64,
    pub baseline_test: f64,
    pub curriculum_val: f64,
    pub curriculum_test: f64,
    /// `curriculum_test - baseline_test`.
    pub delta_test: f64,
}

/// Aggregate of a multi-seed comparison between the plain trainer and the
/// curriculum trainer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub per_seed: Vec<SeedComparison>,
    pub baseline_val_mean: f64,
    pub baseline_val_std: f64,
    pub baseline_test_mean: f64,
    pub baseline_test_std: f64,
    pub curriculum_val_mean: f64,
    pub curriculum_val_std: f64,
    pub curriculum_test_mean: f64,
    pub curriculum_test_std: f64,
    /// Seeds where the curriculum strictly beat the baseline on test accuracy.
    pub wins: usize,
}

impl CompareReport {
    pub fn from_seeds(per_seed: Vec<SeedComparison>) -> CompareReport {
        let collect = |f: fn(&SeedComparison) -> f64| -> Vec<f64> {
            per_seed.iter().map(f).collect()
        };
        let (bv_m, bv_s) = mean_and_std(&collect(|s| s.baseline_val));
        let (bt_m, bt_s) = mean_and_std(&collect(|s| s.baseline_test));
        let (cv_m, cv_s) = mean_and_std(&collect(|s| s.curriculum_val));
        let (ct_m, ct_s) = mean_and_std(&collect(|s| s.curriculum_test));
        let wins = per_seed.iter().filter(|s| s.delta_test > 0.0).count();
        CompareReport {
            per_seed,
            baseline_val_mean: bv_m,
            baseline_val_std: bv_s,
            baseline_test_mean: bt_m,
            baseline_test_std: bt_s,
            curriculum_val_mean: cv_m,
            curriculum_val_std: cv_s,
            curriculum_test_mean: ct_m,
            curriculum_test_std: ct_s,
            wins,
        }
    }

    /// Human-readable table: one row per method, valid/test as mean ± std,
    /// then the per-seed deltas.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<12} {:>19} {:>19}\n",
            "method", "valid", "test"
        ));
        for (name, vm, vs, tm, ts) in [
            (
                "baseline",
                self.baseline_val_mean,
                self.baseline_val_std,
                self.baseline_test_mean,
                self.baseline_test_std,
            ),
            (
                "curriculum",
                self.curriculum_val_mean,
                self.curriculum_val_std,
                self.curriculum_test_mean,
                self.curriculum_test_std,
            ),
        ] {
            out.push_str(&format!(
                "{:<12} {:>8.4} ± {:>8.4} {:>8.4} ± {:>8.4}\n",
                name, vm, vs, tm, ts
            ));
        }
        out.push_str(&format!("\n{:<8} {:>12} {:>12} {:>9}\n", "seed", "base_test", "curr_test", "delta"));
        for s in &self.per_seed {
            out.push_str(&format!(
                "{:<8} {:>12.4} {:>12.4} {:>+9.4}\n",
                s.seed, s.baseline_test, s.curriculum_test, s.delta_test
            ));
        }
        out.push_str(&format!(
            "\ncurriculum wins {}/{} seeds on test accuracy\n",
            self.wins,
            self.per_seed.len()
        ));
        out
    }
}
