//! Experiment orchestration: seed sweeps, shot sweeps, sensitivity grids
//! and report files.
//!
//! An experiment directory holds `experiment.json` (the configuration and
//! per-strategy costs), one `runs/<strategy>/seed-<seed>.jsonl` file per
//! finished run, and the CSV reports. Existing run files are never
//! recomputed, so an interrupted experiment resumes where it stopped.
//! Runs that fail (an error or a non-finite loss) are recorded, excluded
//! from the statistics and counted in the reports.

mod config;
mod report;
mod run;

pub use config::{
    prepare, pretrain_backbone, BackboneSource, DataSource, ExperimentConfig, ModelOptions, Prepared, SampleBudget,
};
pub use report::{box_stats, quantile, report, BoxStats};
pub use run::{
    run_experiment, run_path, run_sensitivity, run_shot_sweep, Manifest, Outcome, RunRecord, StrategyEntry,
    SweepPoint, SweepSpec, MANIFEST,
};
