//! Experiment files, seeded runs, ratio sweeps and analysis tables.
//!
//! Each run writes under `<output_dir>/seed-<seed>/`: `eval.csv`,
//! `train.csv`, checkpoints with their mask files, an optional
//! `replay.jsonl`, and `summary.json`. Every CSV starts with a
//! `# config_hash=... seed=...` line. Wall-clock numbers only appear in
//! `summary.json` and `resources.csv`, so rerunning a config reproduces
//! the other CSVs byte for byte.

mod config;
mod output;
mod report;
mod run;
mod sweep;

pub use config::{parse_schedule, Algorithm, EnvBlock, EnvInstance, EnvKind, ExperimentConfig};
pub use output::{read_csv, CsvSink, Provenance};
pub use report::{dump_features, load_observations, report_resources, ResourceRow};
pub use run::{
    build_networks, evaluate_policy, parameter_summary, run_dir, run_experiment, run_seed, CurvePoint,
    ParameterSummary, RunNetworks, RunRecord,
};
pub use sweep::{sweep_pruning_ratio, SweepAxis, SweepRow};
