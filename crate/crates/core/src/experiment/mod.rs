//! Config-driven Monte Carlo experiments and their CSV and SVG outputs.

mod compare;
mod config;
mod quantile;
mod runner;
mod svg;
mod tables;
mod verify;

pub use compare::{compare, CompareRow};
pub use config::{default_checkpoints, Algorithm, BackendKind, ExperimentConfig, ModelKind};
pub use quantile::{quantile, QuantileRow, QuantileTable};
pub use runner::{run_experiment, run_replication, simulate_stream, ExperimentOutput, Failure, SimulatedStream};
pub use svg::quantile_plot;
pub use tables::{
    read_quantiles, read_raw, write_observations, write_quantiles, write_raw, RawRow, RawTable, OBSERVATION_HEADER,
    QUANTILE_HEADER, RAW_HEADER,
};
pub use verify::{forgetting_trials, random_finite_params, TrialReport};
