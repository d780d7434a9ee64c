use serde::{Deserialize, Serialize};

use super::{data_topic, Row, TelemetryError};
use crate::trigger::TriggerKind;

pub const ROWS_PER_PACKET: usize = 5;

/// A real-time telemetry packet: up to five consecutive rows of one session.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPacket {
    pub topic: String,
    pub sensor_id: String,
    pub session_id: String,
    pub seq: u64,
    pub rows: Vec<Row>,
    pub final_packet: bool,
}

#[derive(Deserialize)]
struct WirePacket {
    sid: String,
    ses: String,
    seq: u64,
    fin: bool,
    rows: Vec<[f64; 6]>,
}

impl DataPacket {
    /// `{"sid":..,"ses":..,"seq":..,"fin":..,"rows":[[t,ax,ay,az,roll,pitch],..]}`
    pub fn encode(&self) -> String {
        let mut out = String::with_capacity(64 + self.rows.len() * 72);
        out.push_str("{\"sid\":");
        out.push_str(&serde_json::to_string(&self.sensor_id).expect("string encodes"));
        out.push_str(",\"ses\":");
        out.push_str(&serde_json::to_string(&self.session_id).expect("string encodes"));
        out.push_str(&format!(",\"seq\":{},\"fin\":{},\"rows\":[", self.seq, self.final_packet));
        for (i, r) in self.rows.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push('[');
            r.write_fields(&mut out);
            out.push(']');
        }
        out.push_str("]}");
        out
    }

    pub fn decode(topic: &str, payload: &str) -> Result<Self, TelemetryError> {
        let w: WirePacket = serde_json::from_str(payload).map_err(|e| TelemetryError::Malformed(e.to_string()))?;
        let packet = Self {
            topic: topic.to_string(),
            sensor_id: w.sid,
            session_id: w.ses,
            seq: w.seq,
            rows: w.rows.into_iter().map(Row::from_array).collect(),
            final_packet: w.fin,
        };
        packet.validate()?;
        Ok(packet)
    }

    pub fn validate(&self) -> Result<(), TelemetryError> {
        let n = self.rows.len();
        if n == 0 || n > ROWS_PER_PACKET || (!self.final_packet && n != ROWS_PER_PACKET) {
            return Err(TelemetryError::Malformed(format!("packet with {n} rows (final={})", self.final_packet)));
        }
        if self.rows.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(TelemetryError::Malformed("row timestamps not increasing".into()));
        }
        if self.rows.iter().any(|r| !r.t.is_finite()) {
            return Err(TelemetryError::Malformed("non-finite timestamp".into()));
        }
        if self.session_id.is_empty() {
            return Err(TelemetryError::Malformed("empty session id".into()));
        }
        super::validate_sensor_id(&self.sensor_id)
    }
}

/// Groups a session's rows five at a time. A full group is held back until the
/// next row arrives, so the last packet of a session is always flagged final.
#[derive(Debug, Clone)]
pub struct Packetizer {
    sensor_id: String,
    session_id: String,
    topic: String,
    seq: u64,
    buf: Vec<Row>,
}

impl Packetizer {
    pub fn new(sensor_id: &str, session_id: &str) -> Self {
        Self {
            sensor_id: sensor_id.to_string(),
            session_id: session_id.to_string(),
            topic: data_topic(sensor_id),
            seq: 0,
            buf: Vec::with_capacity(ROWS_PER_PACKET),
        }
    }

    fn emit(&mut self, final_packet: bool) -> DataPacket {
        let p = DataPacket {
            topic: self.topic.clone(),
            sensor_id: self.sensor_id.clone(),
            session_id: self.session_id.clone(),
            seq: self.seq,
            rows: std::mem::take(&mut self.buf),
            final_packet,
        };
        self.seq += 1;
        p
    }

    pub fn push(&mut self, row: Row) -> Option<DataPacket> {
        let out = (self.buf.len() == ROWS_PER_PACKET).then(|| self.emit(false));
        self.buf.push(row);
        out
    }

    pub fn finish(mut self) -> Option<DataPacket> {
        (!self.buf.is_empty()).then(|| self.emit(true))
    }
}

pub fn package_rows(sensor_id: &str, session_id: &str, rows: &[Row]) -> Vec<DataPacket> {
    let mut p = Packetizer::new(sensor_id, session_id);
    let mut out: Vec<DataPacket> = rows.iter().filter_map(|&r| p.push(r)).collect();
    out.extend(p.finish());
    out
}

/// Per-session metadata published on the info topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoRecord {
    pub sensor_id: String,
    pub session_id: String,
    pub trigger_time: f64,
    pub distance_m: f64,
    pub temperature_c: f64,
    pub trigger_type: TriggerKind,
    pub ship_present: bool,
    #[serde(default)]
    pub berthing: bool,
    #[serde(default)]
    pub detection_timed_out: bool,
    #[serde(default)]
    pub start_t: f64,
    #[serde(default)]
    pub duration_s: f64,
}

impl InfoRecord {
    pub fn encode(&self) -> String {
        serde_json::to_string(self).expect("info record encodes")
    }

    pub fn decode(payload: &str) -> Result<Self, TelemetryError> {
        let r: Self = serde_json::from_str(payload).map_err(|e| TelemetryError::Malformed(e.to_string()))?;
        super::validate_sensor_id(&r.sensor_id)?;
        Ok(r)
    }
}

/// The bulk path: the whole session as CSV, plus the captured scene.
#[derive(Debug, Clone, PartialEq)]
pub struct BulkUpload {
    pub sensor_id: String,
    pub session_id: String,
    pub ship_present: bool,
    pub row_count: usize,
    pub csv: String,
    pub scene: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(n: usize) -> Vec<Row> {
        (0..n)
            .map(|i| Row {
                t: i as f64 * 0.01,
                ax_mg: i as f64,
                ay_mg: -(i as f64),
                az_mg: 1000.0,
                roll_deg: 0.001,
                pitch_deg: -0.002,
            })
            .collect()
    }

    #[test]
    fn grouping() {
        let p = package_rows("7", "s", &rows(12));
        assert_eq!(p.iter().map(|p| p.rows.len()).collect::<Vec<_>>(), vec![5, 5, 2]);
        assert_eq!(p.iter().map(|p| p.final_packet).collect::<Vec<_>>(), vec![false, false, true]);
        assert_eq!(p.iter().map(|p| p.seq).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(package_rows("7", "s", &[]).is_empty());
        assert_eq!(package_rows("7", "s", &rows(3000)).len(), 600);
        let even = package_rows("7", "s", &rows(10));
        assert_eq!(even.len(), 2);
        assert!(even[1].final_packet && even[1].rows.len() == 5);
    }

    #[test]
    fn wire_format() {
        let p = DataPacket {
            topic: "sensors/7/data".into(),
            sensor_id: "7".into(),
            session_id: "7-300.000".into(),
            seq: 3,
            rows: rows(2)[..1].to_vec(),
            final_packet: true,
        };
        let text = p.encode();
        assert_eq!(
            text,
            r#"{"sid":"7","ses":"7-300.000","seq":3,"fin":true,"rows":[[0.000,0.000000,-0.000000,1000.000000,0.001000,-0.002000]]}"#
        );
        let back = DataPacket::decode("sensors/7/data", &text).unwrap();
        assert_eq!(back.encode(), text);
    }

    #[test]
    fn decode_rejects_malformed() {
        assert!(DataPacket::decode("t", "{").is_err());
        // short non-final packet
        let short = package_rows("7", "s", &rows(2)).remove(0);
        let text = short.encode().replace("\"fin\":true", "\"fin\":false");
        assert!(DataPacket::decode("t", &text).is_err());
        let bad_id = short.encode().replace("\"sid\":\"7\"", "\"sid\":\"a/b\"");
        assert!(DataPacket::decode("t", &bad_id).is_err());
    }

    #[test]
    fn info_roundtrip() {
        let r = InfoRecord {
            sensor_id: "7".into(),
            session_id: "7-300.200".into(),
            trigger_time: 300.0,
            distance_m: 100.0,
            temperature_c: 24.5,
            trigger_type: TriggerKind::Schedule,
            ship_present: false,
            berthing: false,
            detection_timed_out: false,
            start_t: 300.2,
            duration_s: 30.0,
        };
        assert_eq!(InfoRecord::decode(&r.encode()).unwrap(), r);
        assert!(r.encode().contains("\"trigger_type\":\"Schedule\""));
    }
}
