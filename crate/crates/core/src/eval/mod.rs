//! Evaluation protocols: fixed person-independent splits, speaker-inclusive
//! random splits, speaker-exclusive k-fold, cross-dataset transfer, the
//! modality grid, metrics and report tables.

mod metrics;
mod pipeline;
mod protocols;
mod splits;
mod table;

pub use metrics::{metrics, MetricsReport};
pub use pipeline::{evaluate_partition, CellResult, CheckpointSink, ModelConfig, ModelKind, PartitionReport};
pub use protocols::{
    run_cross_dataset, run_modality_grid, run_speaker_exclusive, run_speaker_inclusive, CellMean,
    ExclusiveReport, FoldOutcome,
};
pub use splits::{
    carve_validation, fold_partition, make_fixed_split, make_speaker_exclusive_folds,
    make_speaker_inclusive_split, Fold, FoldPlan, Partition,
};
pub use table::{render_table, ResultTable, TableStyle};
