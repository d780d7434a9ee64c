//! The edge node: rest, trigger, capture, detection request, sized sensing
//! session, transmit, rest; plus remote-config polling between cycles.

mod config;
mod runner;

pub use config::NodeConfig;
pub use runner::{EventRecord, Node, NodeLog, Transition};

use serde::{Deserialize, Serialize};

use crate::ingest::IngestError;
use crate::telemetry::TelemetryError;
use crate::trigger::{TriggerError, TriggerKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeState {
    Rest,
    Capturing,
    AwaitingDetection,
    Sensing { cause: TriggerKind, duration_s: f64, started_t: f64 },
    Transmitting,
}

/// [`NodeState`] without its payload, for transition logs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeStateKind {
    Rest,
    Capturing,
    AwaitingDetection,
    Sensing,
    Transmitting,
}

impl NodeState {
    pub fn kind(&self) -> NodeStateKind {
        match self {
            NodeState::Rest => NodeStateKind::Rest,
            NodeState::Capturing => NodeStateKind::Capturing,
            NodeState::AwaitingDetection => NodeStateKind::AwaitingDetection,
            NodeState::Sensing { .. } => NodeStateKind::Sensing,
            NodeState::Transmitting => NodeStateKind::Transmitting,
        }
    }
}

impl NodeStateKind {
    /// The single successor on the cycle.
    pub fn next(self) -> Self {
        match self {
            NodeStateKind::Rest => NodeStateKind::Capturing,
            NodeStateKind::Capturing => NodeStateKind::AwaitingDetection,
            NodeStateKind::AwaitingDetection => NodeStateKind::Sensing,
            NodeStateKind::Sensing => NodeStateKind::Transmitting,
            NodeStateKind::Transmitting => NodeStateKind::Rest,
        }
    }
}

/// True iff `log` is `(Rest Capturing AwaitingDetection Sensing Transmitting)* Rest`.
pub fn is_valid_transition_log(log: &[NodeStateKind]) -> bool {
    match (log.first(), log.last()) {
        (Some(NodeStateKind::Rest), Some(NodeStateKind::Rest)) => log.windows(2).all(|w| w[0].next() == w[1]),
        _ => false,
    }
}

/// One sensing session as the node ran it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingSession {
    pub session_id: String,
    pub sensor_id: String,
    pub trigger_t: f64,
    pub start_t: f64,
    pub trigger_kind: TriggerKind,
    pub ship_present: bool,
    /// Gate verdict; selects the long duration.
    pub berthing: bool,
    pub detection_timed_out: bool,
    pub duration_s: f64,
    pub temperature_c: f64,
    pub distance_m: f64,
    pub row_count: usize,
    pub packets_sent: u64,
    pub packets_failed: u64,
}

impl SensingSession {
    pub fn end_t(&self) -> f64 {
        self.start_t + self.duration_s
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NodeError {
    #[error("invalid node config: {0}")]
    Config(String),
    #[error(transparent)]
    Trigger(#[from] TriggerError),
    #[error(transparent)]
    Telemetry(#[from] TelemetryError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("session {session_id} produced {got} rows, expected {expected}")]
    RowCount { session_id: String, expected: usize, got: usize },
}

#[cfg(test)]
mod tests {
    use super::*;
    use NodeStateKind::*;

    #[test]
    fn transition_language() {
        assert!(is_valid_transition_log(&[Rest]));
        assert!(is_valid_transition_log(&[Rest, Capturing, AwaitingDetection, Sensing, Transmitting, Rest]));
        assert!(!is_valid_transition_log(&[]));
        assert!(!is_valid_transition_log(&[Rest, Capturing, Sensing, Transmitting, Rest]));
        assert!(!is_valid_transition_log(&[Rest, Capturing, AwaitingDetection]));
    }
}
