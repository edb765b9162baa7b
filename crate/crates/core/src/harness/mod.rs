//! Experiment orchestration: the synthesizer grid over m, proper and k
//! repetitions, generation timing, and summary tables.

mod config;
mod run;
mod tables;

pub use config::{DataConfig, ExperimentConfig, GridEntry, MetricsConfig, PreprocessConfig, SynthesizerConfig};
pub use run::{
    apo_metric, benchmark_generation, cell_seed, read_timings, run_experiment, run_experiment_on, write_timings,
    Evaluator, ExperimentOutcome, RunOptions, TimingRecord, REPORT_FILE, RUN_MANIFEST_FILE, TIMINGS_FILE,
};
pub use tables::emit_tables;
