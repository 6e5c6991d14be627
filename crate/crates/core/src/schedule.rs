//! Loss-paced curriculum schedule: pacing functions and easiest-first
//! subset selection.
//!
//! A schedule maps epoch `t` to a proportion `lambda_t` in (0, 1] of the
//! training nodes to use, starting from `lambda0` and reaching exactly 1 at
//! epoch `T` (`ramp_epochs`). Nodes are ranked by their current per-node
//! loss and the easiest `max(1, floor(n * lambda_t))` are kept.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::str::FromStr;

/// Pacing family: how fast the proportion grows from `lambda0` to 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchedulerKind {
    /// `min(1, lambda0 + (1 - lambda0) * t / T)`
    Linear,
    /// `min(1, sqrt(lambda0^2 + (1 - lambda0^2) * t / T))`
    Root,
    /// `min(1, 2^(log2(lambda0) - log2(lambda0) * t / T))`
    Geom,
}

impl SchedulerKind {
    pub fn name(&self) -> &'static str {
        match self {
            SchedulerKind::Linear => "linear",
            SchedulerKind::Root => "root",
            SchedulerKind::Geom => "geom",
        }
    }
}

impl FromStr for SchedulerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(SchedulerKind::Linear),
            "root" => Ok(SchedulerKind::Root),
            "geom" => Ok(SchedulerKind::Geom),
            other => Err(Error::Config(format!(
                "unknown scheduler '{other}' (expected linear, root or geom)"
            ))),
        }
    }
}

/// Curriculum schedule parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    /// Initial proportion of easiest nodes, in (0, 1].
    pub lambda0: f64,
    /// Epoch at which the proportion first reaches 1.
    #[serde(rename = "T")]
    pub ramp_epochs: usize,
    pub scheduler: SchedulerKind,
}

impl ScheduleConfig {
    pub fn new(lambda0: f64, ramp_epochs: usize, scheduler: SchedulerKind) -> Result<Self> {
        let cfg = ScheduleConfig { lambda0, ramp_epochs, scheduler };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda0 > 0.0 && self.lambda0 <= 1.0) {
            return Err(Error::Config(format!(
                "lambda0 must lie in (0, 1], got {}",
                self.lambda0
            )));
        }
        if self.ramp_epochs == 0 {
            return Err(Error::Config("T must be at least 1".into()));
        }
        Ok(())
    }
}

/// Proportion of easiest training nodes to use at epoch `t`.
///
/// All three families analytically equal `lambda0` at `t = 0` and 1 at
/// `t = T`; those two cases are returned directly so the boundary values
/// are float-exact rather than one rounding step away.
pub fn pacing_value(config: &ScheduleConfig, t: usize) -> f64 {
    if t == 0 {
        return config.lambda0;
    }
    if t >= config.ramp_epochs {
        return 1.0;
    }
    let lam = config.lambda0;
    let x = t as f64 / config.ramp_epochs as f64;
    let raw = match config.scheduler {
        SchedulerKind::Linear => lam + (1.0 - lam) * x,
        SchedulerKind::Root => (lam * lam + (1.0 - lam * lam) * x).sqrt(),
        SchedulerKind::Geom => (lam.log2() - lam.log2() * x).exp2(),
    };
    raw.min(1.0)
}

/// Whether the schedule is still ramping or has handed over to the full set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Curriculum,
    FullSet,
}

/// Position of a run inside its schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleState {
    pub epoch: usize,
    pub proportion: f64,
    pub phase: Phase,
}

impl ScheduleState {
    /// State at epoch 0.
    pub fn initial(config: &ScheduleConfig) -> ScheduleState {
        ScheduleState {
            epoch: 0,
            proportion: pacing_value(config, 0),
            phase: Phase::Curriculum,
        }
    }
}

/// Advances to the next epoch. The phase flips to full-set at the first
/// epoch strictly beyond `T` and never reverts.
pub fn advance(state: &ScheduleState, config: &ScheduleConfig) -> ScheduleState {
    let epoch = state.epoch + 1;
    let phase = if state.phase == Phase::FullSet || epoch > config.ramp_epochs {
        Phase::FullSet
    } else {
        Phase::Curriculum
    };
    ScheduleState { epoch, proportion: pacing_value(config, epoch), phase }
}

/// Outcome of ranking losses and keeping the easiest prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    /// All positions `0..n`, sorted by ascending loss (ties keep index order).
    pub sorted_indices: Vec<usize>,
    /// The first `max(1, floor(n * lambda))` of `sorted_indices`.
    pub selected: Vec<usize>,
    /// Arithmetic mean of the selected losses.
    pub mean_selected_loss: f64,
}

impl SelectionResult {
    /// Positions not selected this epoch (the hardest suffix).
    pub fn excluded(&self) -> &[usize] {
        &self.sorted_indices[self.selected.len()..]
    }
}

/// Ranks `losses` ascending and selects the easiest `max(1, floor(n * proportion))`.
///
/// Positions in the result index into `losses`; callers map them back to
/// node ids. The sort is stable, so equal losses keep their original order.
pub fn select_nodes(losses: &[f64], proportion: f64) -> Result<SelectionResult> {
    if losses.is_empty() {
        return Err(Error::Contract("select_nodes called with an empty loss vector".into()));
    }
    if !(proportion > 0.0 && proportion <= 1.0) {
        return Err(Error::Contract(format!(
            "selection proportion must lie in (0, 1], got {proportion}"
        )));
    }
    if let Some(bad) = losses.iter().position(|l| !l.is_finite()) {
        return Err(Error::Data(format!(
            "loss for node position {bad} is not finite ({})",
            losses[bad]
        )));
    }
    let n = losses.len();
    let mut sorted_indices: Vec<usize> = (0..n).collect();
    sorted_indices.sort_by(|&a, &b| losses[a].partial_cmp(&losses[b]).expect("finite losses"));
    let k = ((n as f64 * proportion).floor() as usize).clamp(1, n);
    let selected: Vec<usize> = sorted_indices[..k].to_vec();
    let mean_selected_loss = selected.iter().map(|&i| losses[i]).sum::<f64>() / k as f64;
    Ok(SelectionResult { sorted_indices, selected, mean_selected_loss })
}
