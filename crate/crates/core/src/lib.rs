//! Loss-paced curriculum training for relational graph convolutions.
//!
//! The crate trains a small heterogeneous graph-convolution backbone while
//! ranking training nodes by their current per-node loss and admitting only
//! the easiest fraction each epoch. The fraction grows from `lambda0` to 1
//! over `T` epochs under a linear, root or geometric pacing function; after
//! that the full training set is used until validation accuracy stops
//! improving.
//!
//! Layout:
//! - [`graph`]: heterogeneous graph model, synthetic generation, label
//!   noise, JSON I/O
//! - [`model`]: relational GCN forward/backward with a finite-difference
//!   gradient oracle
//! - [`schedule`]: pacing functions and easiest-first selection
//! - [`trainer`]: full-batch training loop, optimizers, multi-seed
//!   comparisons
//! - [`metrics`]: accuracy and noise-exclusion diagnostics
//! - [`report`]: per-epoch CSV and summary formats

pub mod error;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod report;
pub mod schedule;
pub mod trainer;

pub use error::{Error, Result};
pub use graph::{
    generate_synthetic, inject_label_noise, load_graph, save_graph, HeteroGraph, NoiseRecord,
    SyntheticSpec,
};
pub use model::{
    backward, check_gradients, forward, init_params, per_node_losses, ModelDims,
    RelationalModelParams,
};
pub use report::{CompareReport, EpochRow, TrainReport};
pub use schedule::{
    advance, pacing_value, select_nodes, Phase, ScheduleConfig, ScheduleState, SchedulerKind,
    SelectionResult,
};
pub use trainer::{
    compare_schedules, optimizer_step, run_training, OptimizerKind, OptimizerState, TrainConfig,
    Trainer,
};
