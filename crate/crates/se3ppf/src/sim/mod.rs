//! Scenario configuration, the simulation run loop, and output artifacts
//! (per-run CSV time series plus JSON summaries) for the command-line
//! harness.

mod config;
mod euler;
mod runner;
mod summary;

pub use config::{
    AttitudeInit, ConfigError, EstimateInit, FilterSelection, PpfTable, ScenarioConfig,
    TruthInit, VelocityProfile, PAPER_SCENARIO,
};
pub use euler::{euler_from_rotation, rotation_from_euler};
pub use runner::{
    run_monte_carlo, run_scenario, run_to_dir, MonteCarloReport, RunError, RunOutcome, RunReport,
    RunResult, SeriesRecord, CSV_HEADER,
};
pub use summary::{summarize, ChannelSummary, RunSummary};
