//! The wire layer: 5-row JSON packets over topic-based pub/sub, bulk CSV upload,
//! and server-side reconciliation of the two paths.
//!
//! Topics are `sensors/<id>/data` and `sensors/<id>/info`; the server subscribes
//! to `sensors/+/data` and `sensors/+/info`. Data values travel as decimal text
//! with 6 fractional digits (3 for time) on both paths, so a row that survives
//! either path decodes to the same `f64`s.

mod csv;
#[cfg(feature = "mqtt")]
mod mqtt;
mod packet;
mod reconcile;
mod transport;

pub use csv::{decode_csv, encode_csv, CSV_HEADER};
#[cfg(feature = "mqtt")]
pub use mqtt::MqttTransport;
pub use packet::{package_rows, BulkUpload, DataPacket, InfoRecord, Packetizer, ROWS_PER_PACKET};
pub use reconcile::{reconcile, LossReport, Reconciled, RowSource, StreamAssembly};
pub use transport::{
    topic_matches, FaultConfig, LoopbackBroker, LoopbackTransport, Message, Subscribe, Transport, TransportStats,
};

use crate::dsp::ChainSample;

pub const DATA_FILTER: &str = "sensors/+/data";
pub const INFO_FILTER: &str = "sensors/+/info";

/// One output-rate record: acceleration in mg, tilt in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub t: f64,
    pub ax_mg: f64,
    pub ay_mg: f64,
    pub az_mg: f64,
    pub roll_deg: f64,
    pub pitch_deg: f64,
}

impl Row {
    pub fn from_chain(s: &ChainSample<f64>) -> Self {
        Self {
            t: s.frame.t,
            ax_mg: s.frame.ax * 1000.0,
            ay_mg: s.frame.ay * 1000.0,
            az_mg: s.frame.az * 1000.0,
            roll_deg: s.tilt.roll_deg,
            pitch_deg: s.tilt.pitch_deg,
        }
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self { t: v[0], ax_mg: v[1], ay_mg: v[2], az_mg: v[3], roll_deg: v[4], pitch_deg: v[5] }
    }

    /// Appends the six fields, comma separated, in wire precision.
    pub fn write_fields(&self, out: &mut String) {
        use std::fmt::Write;
        let _ = write!(
            out,
            "{:.3},{:.6},{:.6},{:.6},{:.6},{:.6}",
            self.t, self.ax_mg, self.ay_mg, self.az_mg, self.roll_deg, self.pitch_deg
        );
    }

    pub fn encoded(&self) -> String {
        let mut s = String::with_capacity(64);
        self.write_fields(&mut s);
        s
    }

    /// The row as it decodes after crossing the wire.
    pub fn quantized(&self) -> Self {
        let text = self.encoded();
        let mut v = [0.0; 6];
        for (slot, field) in v.iter_mut().zip(text.split(',')) {
            *slot = field.parse().expect("formatted float parses");
        }
        Self::from_array(v)
    }
}

pub fn validate_sensor_id(id: &str) -> Result<(), TelemetryError> {
    if id.is_empty() || id.chars().any(|c| matches!(c, '/' | '+' | '#') || c.is_whitespace() || c.is_control()) {
        return Err(TelemetryError::InvalidSensorId(id.to_string()));
    }
    Ok(())
}

pub fn data_topic(sensor_id: &str) -> String {
    format!("sensors/{sensor_id}/data")
}

pub fn info_topic(sensor_id: &str) -> String {
    format!("sensors/{sensor_id}/info")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Data,
    Info,
}

/// Splits `sensors/<id>/<channel>`.
pub fn parse_topic(topic: &str) -> Option<(&str, Channel)> {
    let rest = topic.strip_prefix("sensors/")?;
    let (id, channel) = rest.split_once('/')?;
    if id.is_empty() || id.contains('/') {
        return None;
    }
    match channel {
        "data" => Some((id, Channel::Data)),
        "info" => Some((id, Channel::Info)),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TelemetryError {
    #[error("malformed payload: {0}")]
    Malformed(String),
    #[error("invalid sensor id {0:?}")]
    InvalidSensorId(String),
    #[error("transport down")]
    Down,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("session lost: neither stream nor bulk data present")]
    SessionLost,
    #[error("row count mismatch: header says {expected}, payload has {got}")]
    RowCountMismatch { expected: usize, got: usize },
    #[error("csv error: {0}")]
    Csv(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topics() {
        assert_eq!(data_topic("7"), "sensors/7/data");
        assert_eq!(parse_topic("sensors/7/info"), Some(("7", Channel::Info)));
        assert_eq!(parse_topic("sensors/7/other"), None);
        assert_eq!(parse_topic("sensors//data"), None);
        assert_eq!(parse_topic("other/7/data"), None);
    }

    #[test]
    fn sensor_ids() {
        assert!(validate_sensor_id("7").is_ok());
        assert!(validate_sensor_id("quay-3").is_ok());
        for bad in ["", "a/b", "+", "#", "a b"] {
            assert!(validate_sensor_id(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn quantization_is_idempotent() {
        let r =
            Row { t: 1.0004, ax_mg: -1e-9, ay_mg: 0.1234567, az_mg: 999.9999996, roll_deg: 0.0, pitch_deg: 1.0 / 3.0 };
        let q = r.quantized();
        assert_eq!(q.encoded(), r.encoded());
        assert_eq!(q.quantized().encoded(), q.encoded());
        assert_eq!(r.encoded(), "1.000,-0.000000,0.123457,1000.000000,0.000000,0.333333");
    }
}
