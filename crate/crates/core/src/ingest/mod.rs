//! The cloud side: wildcard subscription, per-sensor series and info stores,
//! bulk file storage, detection requests, and the versioned remote-config store.

mod config;
mod http;
mod service;
mod store;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use config::{apply_trigger_params, gate_from_params, ConfigStore, VerdictRecord, CONFIG_KEYS};
pub use http::{HttpLink, HttpServer};
pub use service::{IngestService, IngestStats};
pub use store::{SeriesStore, SessionSummary};

use crate::detection::{Detection, DetectionError};
use crate::telemetry::{BulkUpload, TelemetryError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IngestError {
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("invalid value for {key}: {value}")]
    InvalidValue { key: String, value: f64 },
    #[error(transparent)]
    Telemetry(#[from] TelemetryError),
    #[error(transparent)]
    Detection(#[from] DetectionError),
    #[error("io error: {0}")]
    Io(String),
    #[error("link error: {0}")]
    Link(String),
}

impl From<std::io::Error> for IngestError {
    fn from(e: std::io::Error) -> Self {
        IngestError::Io(e.to_string())
    }
}

/// A node's request to classify the scene it just captured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRequest {
    pub sensor_id: String,
    pub session_id: String,
    /// Scene annotation document (JSON).
    pub scene: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResponse {
    pub ship_present: bool,
    pub berthing: bool,
    pub boxes: Vec<Detection<f64>>,
    pub latency_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Parameter set of one sensor at one version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub version: u64,
    pub params: BTreeMap<String, f64>,
}

/// What a node needs from the cloud: detection, config polling, bulk upload.
pub trait CloudLink: Send + Sync {
    fn detect(&self, request: &DetectionRequest) -> Result<DetectionResponse, IngestError>;
    fn poll_config(&self, sensor_id: &str, since_version: u64) -> Result<Option<ConfigSnapshot>, IngestError>;
    fn upload(&self, bulk: &BulkUpload) -> Result<(), IngestError>;
}
