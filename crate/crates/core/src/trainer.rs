//! Full-batch training loop with optional loss-paced curriculum.
//!
//! Each epoch: one forward over the whole graph, per-node losses over the
//! train split, easiest-subset selection at the schedule's current
//! proportion (or the full split when no schedule is set), one backward
//! over the selected mean, one optimizer step, then accuracy evaluation
//! with the updated parameters. After the schedule reaches 1 the run keeps
//! training on the full split until validation accuracy stops improving
//! for `patience` consecutive full-set epochs.

use crate::error::{Error, Result};
use crate::graph::{HeteroGraph, NoiseRecord};
use crate::metrics::{accuracy, argmax_predictions, exclusion_purity};
use crate::model::{
    backward, check_same_structure, forward, init_params, per_node_losses, ModelDims,
    ModelGradients, RelationalModelParams,
};
use crate::report::{CompareReport, EpochRow, SeedComparison, TrainReport};
use crate::schedule::{advance, select_nodes, Phase, ScheduleConfig, ScheduleState};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::str::FromStr;
use std::time::Instant;

/// Gradient-descent flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::Config(format!(
                "unknown optimizer '{other}' (expected sgd or adam)"
            ))),
        }
    }
}

/// Everything a training run needs besides the graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Curriculum schedule; `None` trains on the full split every epoch.
    pub schedule: Option<ScheduleConfig>,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub max_epochs: usize,
    /// Full-set-phase epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            schedule: None,
            learning_rate: 0.01,
            optimizer: OptimizerKind::Adam,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            hidden_dim: 32,
            num_layers: 2,
            max_epochs: 500,
            patience: 30,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        for (name, v) in [
            ("hidden_dim", self.hidden_dim),
            ("num_layers", self.num_layers),
            ("max_epochs", self.max_epochs),
            ("patience", self.patience),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.adam_epsilon > 0.0) {
            return Err(Error::Config("adam_epsilon must be positive".into()));
        }
        if let Some(s) = &self.schedule {
            s.validate()?;
            if self.max_epochs < s.ramp_epochs {
                return Err(Error::Config(format!(
                    "max_epochs {} is below the schedule's T {}",
                    self.max_epochs, s.ramp_epochs
                )));
            }
        }
        Ok(())
    }
}

/// Optimizer accumulators. Adam keeps first/second moment estimates with
/// the same structure as the parameters.
#[derive(Debug, Clone)]
pub enum OptimizerState {
    Sgd,
    Adam {
        m: ModelGradients,
        v: ModelGradients,
        step: u64,
    },
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, params: &RelationalModelParams) -> OptimizerState {
        match kind {
            OptimizerKind::Sgd => OptimizerState::Sgd,
            OptimizerKind::Adam => OptimizerState::Adam {
                m: params.zeros_like(),
                v: params.zeros_like(),
                step: 0,
            },
        }
    }
}

/// Applies one optimizer step in place.
///
/// SGD: `p <- p - lr * g`. Adam: bias-corrected moment update with the
/// configured betas and epsilon.
pub fn optimizer_step(
    params: &mut RelationalModelParams,
    grads: &ModelGradients,
    state: &mut OptimizerState,
    config: &TrainConfig,
) -> Result<()> {
    check_same_structure(params, grads)?;
    let lr = config.learning_rate;
    match state {
        OptimizerState::Sgd => {
            for ((_, p), (_, g)) in params.tensors_mut().into_iter().zip(grads.tensors()) {
                p.zip_mut_with(g, |pv, &gv| *pv -= lr * gv);
            }
        }
        OptimizerState::Adam { m, v, step } => {
            *step += 1;
            let t = *step as i32;
            let (b1, b2, eps) = (config.adam_beta1, config.adam_beta2, config.adam_epsilon);
            let m_corr = 1.0 - b1.powi(t);
            let v_corr = 1.0 - b2.powi(t);
            for ((((_, p), (_, g)), (_, m_t)), (_, v_t)) in params
                .tensors_mut()
                .into_iter()
                .zip(grads.tensors())
                .zip(m.tensors_mut())
                .zip(v.tensors_mut())
            {
                ndarray::Zip::from(p)
                    .and(g)
                    .and(m_t)
                    .and(v_t)
                    .for_each(|pv, &gv, mv, vv| {
                        *mv = b1 * *mv + (1.0 - b1) * gv;
                        *vv = b2 * *vv + (1.0 - b2) * gv * gv;
                        let m_hat = *mv / m_corr;
                        let v_hat = *vv / v_corr;
                        *pv -= lr * m_hat / (v_hat.sqrt() + eps);
                    });
            }
        }
    }
    Ok(())
}

/// Incremental training driver. [`run_training`] wraps it; tests and tools
/// that need mid-run access to parameters drive it directly.
pub struct Trainer<'a> {
    graph: &'a HeteroGraph,
    config: TrainConfig,
    noise: Option<&'a NoiseRecord>,
    params: RelationalModelParams,
    opt_state: OptimizerState,
    schedule_state: Option<ScheduleState>,
    rows: Vec<EpochRow>,
    best_val_acc: f64,
    best_val_epoch: usize,
    test_acc_at_best: f64,
    /// Consecutive full-set epochs without a validation improvement.
    stall: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(
        graph: &'a HeteroGraph,
        config: TrainConfig,
        noise: Option<&'a NoiseRecord>,
    ) -> Result<Trainer<'a>> {
        config.validate()?;
        graph.validate()?;
        for (name, split) in [
            ("train", &graph.splits.train),
            ("val", &graph.splits.val),
            ("test", &graph.splits.test),
        ] {
            if split.is_empty() {
                return Err(Error::Config(format!("graph has an empty {name} split")));
            }
        }
        let dims = ModelDims {
            input_dim: graph.input_feature_dim()?,
            hidden_dim: config.hidden_dim,
            num_layers: config.num_layers,
            num_classes: graph.num_classes,
        };
        let params = init_params(graph, &dims, config.seed)?;
        let opt_state = OptimizerState::new(config.optimizer, &params);
        let schedule_state = config.schedule.as_ref().map(ScheduleState::initial);
        Ok(Trainer {
            graph,
            config,
            noise,
            params,
            opt_state,
            schedule_state,
            rows: Vec::new(),
            best_val_acc: f64::NEG_INFINITY,
            best_val_epoch: 0,
            test_acc_at_best: 0.0,
            stall: 0,
        })
    }

    pub fn params(&self) -> &RelationalModelParams {
        &self.params
    }

    pub fn epochs_run(&self) -> usize {
        self.rows.len()
    }

    fn partial_report(&self) -> TrainReport {
        TrainReport {
            rows: self.rows.clone(),
            best_val_epoch: self.best_val_epoch,
            best_val_acc: if self.best_val_acc.is_finite() { self.best_val_acc } else { 0.0 },
            test_acc_at_best: self.test_acc_at_best,
        }
    }

    fn diverged(&self, epoch: usize, reason: String) -> Error {
        Error::Diverged {
            epoch,
            learning_rate: self.config.learning_rate,
            reason,
            partial: Box::new(self.partial_report()),
        }
    }

    /// Runs one epoch and records its row.
    pub fn train_epoch(&mut self) -> Result<EpochRow> {
        let epoch = self.rows.len();
        let started = Instant::now();

        let lambda = self.schedule_state.map_or(1.0, |s| s.proportion);
        let counted_phase = self.schedule_state.map_or(true, |s| s.phase == Phase::FullSet);

        let (logits, trace) = forward(self.graph, &self.params)?;
        let train = &self.graph.splits.train;
        let losses = per_node_losses(&logits, &self.graph.labels, train)?;
        if let Some(bad) = losses.iter().position(|l| !l.is_finite()) {
            return Err(self.diverged(
                epoch,
                format!("loss for train node {} is not finite", train[bad]),
            ));
        }
        let selection = select_nodes(&losses, lambda)?;
        let selected_nodes: Vec<usize> =
            selection.selected.iter().map(|&pos| train[pos]).collect();
        let mean_loss = selection.mean_selected_loss;
        if !mean_loss.is_finite() {
            return Err(self.diverged(epoch, "mean selected loss is not finite".into()));
        }

        let grads = backward(&trace, &selected_nodes, self.graph, &self.params)?;
        optimizer_step(&mut self.params, &grads, &mut self.opt_state, &self.config)?;
        if !self.params.all_finite() {
            return Err(self.diverged(epoch, "parameters are not finite after the update".into()));
        }

        let (eval_logits, _) = forward(self.graph, &self.params)?;
        let preds = argmax_predictions(&eval_logits);
        let acc_over = |split: &[usize]| -> Result<f64> {
            let p: Vec<usize> = split.iter().map(|&i| preds[i]).collect();
            let y: Vec<usize> = split.iter().map(|&i| self.graph.labels[i]).collect();
            accuracy(&p, &y)
        };
        let train_acc = acc_over(train)?;
        let val_acc = acc_over(&self.graph.splits.val)?;
        let test_acc = acc_over(&self.graph.splits.test)?;

        let (excl_noisy_frac, global_noisy_frac) = match self.noise {
            Some(noise) => {
                let (e, g) = exclusion_purity(&selection, train, noise)?;
                (Some(e), Some(g))
            }
            None => (None, None),
        };

        let row = EpochRow {
            epoch,
            lambda,
            selected: selected_nodes.len(),
            mean_loss,
            train_acc,
            val_acc,
            test_acc,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
            excl_noisy_frac,
            global_noisy_frac,
        };
        self.rows.push(row.clone());

        if val_acc > self.best_val_acc {
            self.best_val_acc = val_acc;
            self.best_val_epoch = epoch;
            self.test_acc_at_best = test_acc;
            self.stall = 0;
        } else if counted_phase {
            self.stall += 1;
        }

        if let Some(state) = &self.schedule_state {
            self.schedule_state = Some(advance(state, self.config.schedule.as_ref().unwrap()));
        }
        Ok(row)
    }

    /// True once the epoch budget is spent or validation accuracy has not
    /// improved for `patience` consecutive full-set epochs.
    pub fn should_stop(&self) -> bool {
        self.rows.len() >= self.config.max_epochs || self.stall >= self.config.patience
    }

    pub fn finish(self) -> TrainReport {
        self.partial_report()
    }
}

/// Trains to completion: curriculum ramp (when configured), then full-set
/// epochs until early stopping or `max_epochs`. The reported test accuracy
/// is the one observed at the best-validation epoch.
pub fn run_training(
    graph: &HeteroGraph,
    config: &TrainConfig,
    noise: Option<&NoiseRecord>,
) -> Result<TrainReport> {
    let mut trainer = Trainer::new(graph, config.clone(), noise)?;
    loop {
        trainer.train_epoch()?;
        if trainer.should_stop() {
            return Ok(trainer.finish());
        }
    }
}

/// Runs a baseline arm (`schedule = None`) and a curriculum arm per seed
/// and aggregates best-validation test accuracies. Seeds run in parallel;
/// results are collected in seed order, so the report is deterministic.
pub fn compare_schedules(
    graph: &HeteroGraph,
    base: &TrainConfig,
    schedule: Option<&ScheduleConfig>,
    seeds: &[u64],
) -> Result<CompareReport> {
    if seeds.is_empty() {
        return Err(Error::Config("compare needs at least one seed".into()));
    }
    let per_seed: Vec<SeedComparison> = seeds
        .par_iter()
        .map(|&seed| -> Result<SeedComparison> {
            let baseline_cfg = TrainConfig { schedule: None, seed, ..base.clone() };
            let curriculum_cfg =
                TrainConfig { schedule: schedule.copied(), seed, ..base.clone() };
            let baseline = run_training(graph, &baseline_cfg, None)?;
            let curriculum = run_training(graph, &curriculum_cfg, None)?;
            Ok(SeedComparison {
                seed,
                baseline_val: baseline.best_val_acc,
                baseline_test: baseline.test_acc_at_best,
                curriculum_val: curriculum.best_val_acc,
                curriculum_test: curriculum.test_acc_at_best,
                delta_test: curriculum.test_acc_at_best - baseline.test_acc_at_best,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CompareReport::from_seeds(per_seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_synthetic, SyntheticSpec};
    use crate::model::finite_difference_gradients;
    use crate::schedule::SchedulerKind;

    fn graph() -> HeteroGraph {
        generate_synthetic(&SyntheticSpec::citation(60, 30, 2), 13).unwrap()
    }

    fn quick_config() -> TrainConfig {
        TrainConfig {
            hidden_dim: 8,
            max_epochs: 10,
            patience: 100,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn sgd_step_matches_definition() {
        let g = graph();
        let cfg = TrainConfig {
            optimizer: OptimizerKind::Sgd,
            learning_rate: 0.1,
            ..quick_config()
        };
        let mut trainer = Trainer::new(&g, cfg.clone(), None).unwrap();
        let mut params = trainer.params.clone();
        params.output_head = ndarray::Array2::from_elem((8, 2), 1.0);
        let mut grads = params.zeros_like();
        grads.output_head.fill(2.0);
        let mut state = OptimizerState::Sgd;
        optimizer_step(&mut params, &grads, &mut state, &cfg).unwrap();
        for &x in params.output_head.iter() {
            assert!((x - 0.8).abs() < 1e-15);
        }
        // Zero gradient leaves parameters exactly unchanged.
        let before = params.clone();
        let zero = params.zeros_like();
        optimizer_step(&mut params, &zero, &mut state, &cfg).unwrap();
        assert_eq!(before, params);
        let _ = &mut trainer;
    }

    #[test]
    fn first_adam_step_has_learning_rate_magnitude() {
        let g = graph();
        let cfg = TrainConfig { learning_rate: 0.01, ..quick_config() };
        let trainer = Trainer::new(&g, cfg.clone(), None).unwrap();
        let mut params = trainer.params.clone();
        let before = params.output_head.clone();
        let mut grads = params.zeros_like();
        grads.output_head.fill(0.5);
        let mut state = OptimizerState::new(OptimizerKind::Adam, &params);
        optimizer_step(&mut params, &grads, &mut state, &cfg).unwrap();
        for (after, b) in params.output_head.iter().zip(before.iter()) {
            let delta = (after - b).abs();
            assert!((delta - cfg.learning_rate).abs() < 1e-6, "delta {delta}");
        }
    }

    #[test]
    fn adam_zero_gradient_is_a_no_op() {
        let g = graph();
        let cfg = quick_config();
        let trainer = Trainer::new(&g, cfg.clone(), None).unwrap();
        let mut params = trainer.params.clone();
        let before = params.clone();
        let zero = params.zeros_like();
        let mut state = OptimizerState::new(OptimizerKind::Adam, &params);
        optimizer_step(&mut params, &zero, &mut state, &cfg).unwrap();
        for ((_, a), (_, b)) in params.tensors().into_iter().zip(before.tensors()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    /// One SGD epoch moves parameters by exactly -lr times the gradient of
    /// the mean over the k easiest nodes; finite differences recompute that
    /// gradient independently.
    #[test]
    fn sgd_epoch_applies_mean_of_k_smallest_losses() {
        let g = generate_synthetic(&SyntheticSpec::citation(10, 5, 2), 31).unwrap();
        let cfg = TrainConfig {
            optimizer: OptimizerKind::Sgd,
            learning_rate: 0.05,
            hidden_dim: 4,
            schedule: Some(ScheduleConfig::new(0.5, 4, SchedulerKind::Linear).unwrap()),
            max_epochs: 4,
            patience: 10,
            ..TrainConfig::default()
        };
        let mut trainer = Trainer::new(&g, cfg.clone(), None).unwrap();
        let before = trainer.params.clone();

        // Reproduce the selection the epoch will make.
        let (logits, _) = forward(&g, &before).unwrap();
        let losses = per_node_losses(&logits, &g.labels, &g.splits.train).unwrap();
        let sel = select_nodes(&losses, 0.5).unwrap();
        let selected: Vec<usize> = sel.selected.iter().map(|&p| g.splits.train[p]).collect();
        let fd = finite_difference_gradients(&g, &before, &selected, 1e-5).unwrap();

        trainer.train_epoch().unwrap();
        for (((name, after), (_, b)), (_, grad)) in trainer
            .params()
            .tensors()
            .into_iter()
            .zip(before.tensors())
            .zip(fd.tensors())
        {
            for ((a, b), gv) in after.iter().zip(b.iter()).zip(grad.iter()) {
                let expected = b - cfg.learning_rate * gv;
                assert!(
                    (a - expected).abs() < 1e-6,
                    "{name}: got {a} expected {expected}"
                );
            }
        }
    }

    #[test]
    fn lambda_one_schedule_degenerates_to_baseline() {
        let g = graph();
        let baseline_cfg = TrainConfig { schedule: None, ..quick_config() };
        let lts_cfg = TrainConfig {
            schedule: Some(ScheduleConfig::new(1.0, 1, SchedulerKind::Linear).unwrap()),
            ..quick_config()
        };
        let mut a = Trainer::new(&g, baseline_cfg, None).unwrap();
        let mut b = Trainer::new(&g, lts_cfg, None).unwrap();
        for _ in 0..10 {
            let ra = a.train_epoch().unwrap();
            let rb = b.train_epoch().unwrap();
            assert_eq!(ra.lambda.to_bits(), rb.lambda.to_bits());
            assert_eq!(ra.selected, rb.selected);
            assert_eq!(ra.mean_loss.to_bits(), rb.mean_loss.to_bits());
        }
        assert_eq!(a.params(), b.params());
    }

    #[test]
    fn identical_configs_give_identical_reports() {
        let g = graph();
        let cfg = TrainConfig {
            schedule: Some(ScheduleConfig::new(0.3, 5, SchedulerKind::Root).unwrap()),
            ..quick_config()
        };
        let a = run_training(&g, &cfg, None).unwrap();
        let b = run_training(&g, &cfg, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn lambda_column_traces_the_linear_schedule() {
        let g = graph();
        let cfg = TrainConfig {
            schedule: Some(ScheduleConfig::new(0.5, 4, SchedulerKind::Linear).unwrap()),
            max_epochs: 7,
            ..quick_config()
        };
        let report = run_training(&g, &cfg, None).unwrap();
        let lambdas: Vec<f64> = report.rows.iter().map(|r| r.lambda).collect();
        assert_eq!(lambdas, vec![0.5, 0.625, 0.75, 0.875, 1.0, 1.0, 1.0]);
        let n = g.splits.train.len();
        for r in &report.rows {
            let expect = ((n as f64 * r.lambda).floor() as usize).clamp(1, n);
            assert_eq!(r.selected, expect, "epoch {}", r.epoch);
        }
    }

    #[test]
    fn report_never_exceeds_max_epochs() {
        let g = graph();
        let cfg = TrainConfig { max_epochs: 5, patience: 1, ..quick_config() };
        let report = run_training(&g, &cfg, None).unwrap();
        assert!(report.rows.len() <= 5);
        for (i, r) in report.rows.iter().enumerate() {
            assert_eq!(r.epoch, i);
        }
    }

    #[test]
    fn stopping_respects_patience_after_best_epoch() {
        let g = graph();
        let cfg = TrainConfig { max_epochs: 300, patience: 7, ..quick_config() };
        let report = run_training(&g, &cfg, None).unwrap();
        if report.rows.len() < 300 {
            assert_eq!(report.rows.len(), report.best_val_epoch + 7 + 1);
        }
        let best_row = &report.rows[report.best_val_epoch];
        assert_eq!(best_row.val_acc, report.best_val_acc);
        assert_eq!(best_row.test_acc, report.test_acc_at_best);
    }

    #[test]
    fn huge_learning_rate_reports_divergence_with_partial_rows() {
        let g = graph();
        let cfg = TrainConfig {
            learning_rate: 1e200,
            optimizer: OptimizerKind::Sgd,
            ..quick_config()
        };
        match run_training(&g, &cfg, None) {
            Err(Error::Diverged { epoch, learning_rate, partial, .. }) => {
                assert_eq!(learning_rate, 1e200);
                assert_eq!(partial.rows.len(), epoch);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn max_epochs_below_t_is_rejected() {
        let cfg = TrainConfig {
            schedule: Some(ScheduleConfig::new(0.5, 50, SchedulerKind::Linear).unwrap()),
            max_epochs: 10,
            ..quick_config()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn compare_with_no_schedule_gives_zero_deltas() {
        let g = graph();
        let base = TrainConfig { max_epochs: 6, ..quick_config() };
        let report = compare_schedules(&g, &base, None, &[1, 2, 3]).unwrap();
        assert_eq!(report.per_seed.len(), 3);
        for s in &report.per_seed {
            assert_eq!(s.delta_test, 0.0);
        }
        assert_eq!(report.wins, 0);
    }

    #[test]
    fn noise_record_adds_diagnostics_columns() {
        let g = graph();
        let (noisy, record) = crate::graph::inject_label_noise(&g, 0.3, 5).unwrap();
        let cfg = TrainConfig {
            schedule: Some(ScheduleConfig::new(0.25, 8, SchedulerKind::Linear).unwrap()),
            ..quick_config()
        };
        let report = run_training(&noisy, &cfg, Some(&record)).unwrap();
        for r in &report.rows {
            let g_frac = r.global_noisy_frac.expect("diagnostics recorded");
            assert!((g_frac - 0.3).abs() < 1e-12);
            let e = r.excl_noisy_frac.expect("diagnostics recorded");
            assert!((0.0..=1.0).contains(&e));
            if r.lambda == 1.0 {
                assert_eq!(e, 0.0, "nothing excluded at lambda 1");
            }
        }
        assert!(report.to_csv().contains("excl_noisy_frac"));
    }
}
