//! Operator commands: simulate a port, run it end to end, analyze a stored
//! run, and score the simulated detector.

pub mod analysis;
pub mod commands;

use portmon_core::detection::DetectionError;
use portmon_core::ingest::IngestError;
use portmon_core::node::NodeError;
use portmon_core::sim::SimError;
use portmon_core::telemetry::TelemetryError;

pub use analysis::{AnalysisReport, Range, SessionAnalysis, TiltTemperaturePoint};
pub use commands::{
    cmd_analyze, cmd_eval_detection, cmd_export_dataset, cmd_run, cmd_simulate, evaluate_detection, load_noise,
    load_scenario, EvalReport, RunOptions, RunOutcome, SimulateOutcome,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Node(#[from] NodeError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Telemetry(#[from] TelemetryError),
    #[error(transparent)]
    Detection(#[from] DetectionError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot write output: {0}")]
    Output(String),
}
