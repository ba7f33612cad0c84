//! Experiment harness: trials, retries, CSV rows and scaling sweeps.

pub mod config;
pub mod experiment;

pub use config::{derived_p, Algo, ConfigError, ExperimentConfig, PartialConfig, ProbSpec};
pub use experiment::{
    append_csv, deterministic_text, load_verified, median_rounds, plot_script, predicted_ratio, run_experiment,
    run_trial, sweep, transcript_text, trial_graph, ExperimentError, ResultRow, SweepReport, TrialOutcome, HEADER,
};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/experiments.md")]
mod book_experiments {}
