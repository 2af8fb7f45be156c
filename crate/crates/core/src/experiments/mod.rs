//! Configurations, single runs, grids, presets and result tables.

pub mod config;
pub mod grid;
pub mod metrics;
pub mod pipeline;
pub mod presets;
pub mod table;

pub use config::{ClassifierSpec, FeatureSource, PipelineConfig};
pub use grid::{average_runs, average_runs_with, run_grid, sort_rows, GridRow, Manifest, ManifestRow, RunStats};
pub use metrics::{confusion, metrics, Confusion, Metrics};
pub use pipeline::{
    fit_pipeline, fit_pipeline_with, run_config, run_config_with, EvalResult, Needs, ResourceFile, ResourcePaths, Resources,
    TrainedPipeline,
};
pub use presets::{Preset, Target, AVERAGED_RUNS};
pub use table::{emit_stats_table, emit_table, failures_csv, format_f1, results_csv, TableFormat};
