use std::sync::mpsc::Receiver;
use std::sync::Mutex;

use super::config::gate_from_params;
use super::{
    CloudLink, ConfigSnapshot, ConfigStore, DetectionRequest, DetectionResponse, IngestError, SeriesStore,
    VerdictRecord,
};
use crate::detection::{classify_berthing, detect, AnnotationScene, DetectorNoise};
use crate::sim::{fnv1a, mix_seed};
use crate::telemetry::{parse_topic, BulkUpload, Channel, DataPacket, InfoRecord, Message, TelemetryError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub packets: u64,
    pub duplicate_packets: u64,
    pub info_records: u64,
    pub bulk_uploads: u64,
    pub malformed: u64,
    pub detections: u64,
}

/// The server: message handlers, detection endpoint, and the two stores.
#[derive(Debug)]
pub struct IngestService {
    store: SeriesStore,
    config: ConfigStore,
    noise: DetectorNoise,
    seed: u64,
    stats: Mutex<IngestStats>,
}

impl IngestService {
    pub fn new(store: SeriesStore, config: ConfigStore, noise: DetectorNoise, seed: u64) -> Self {
        Self { store, config, noise, seed, stats: Mutex::new(IngestStats::default()) }
    }

    pub fn in_memory(noise: DetectorNoise, seed: u64) -> Self {
        Self::new(SeriesStore::in_memory(), ConfigStore::in_memory(), noise, seed)
    }

    pub fn store(&self) -> &SeriesStore {
        &self.store
    }

    pub fn config(&self) -> &ConfigStore {
        &self.config
    }

    pub fn stats(&self) -> IngestStats {
        *self.stats.lock().expect("stats lock")
    }

    fn bump(&self, f: impl FnOnce(&mut IngestStats)) {
        f(&mut self.stats.lock().expect("stats lock"));
    }

    /// Routes one subscribed message to the data or info handler. Malformed
    /// messages are counted and logged, never stored.
    pub fn handle_message(&self, msg: &Message) {
        if let Err(e) = self.try_handle(msg) {
            log::warn!("dropping message on {}: {e}", msg.topic);
            self.bump(|s| s.malformed += 1);
        }
    }

    fn try_handle(&self, msg: &Message) -> Result<(), IngestError> {
        let (sensor_id, channel) =
            parse_topic(&msg.topic).ok_or_else(|| TelemetryError::Malformed(format!("topic {:?}", msg.topic)))?;
        match channel {
            Channel::Data => {
                let packet = DataPacket::decode(&msg.topic, &msg.payload)?;
                if packet.sensor_id != sensor_id {
                    return Err(TelemetryError::Malformed("sensor id does not match topic".into()).into());
                }
                let fresh = self.store.handle_packet(&packet)?;
                self.bump(|s| {
                    s.packets += 1;
                    if !fresh {
                        s.duplicate_packets += 1;
                    }
                });
            }
            Channel::Info => {
                let record = InfoRecord::decode(&msg.payload)?;
                if record.sensor_id != sensor_id {
                    return Err(TelemetryError::Malformed("sensor id does not match topic".into()).into());
                }
                self.store.handle_info(&record)?;
                self.bump(|s| s.info_records += 1);
            }
        }
        Ok(())
    }

    /// Drains a subscription until every publisher has gone away.
    pub fn consume(&self, rx: Receiver<Message>) {
        for msg in rx {
            self.handle_message(&msg);
        }
    }

    /// Runs the detector and the berthing gate on a captured scene, and records
    /// the verdict for audit.
    pub fn handle_detection(&self, req: &DetectionRequest) -> DetectionResponse {
        self.bump(|s| s.detections += 1);
        let scene = match AnnotationScene::from_json(&req.scene) {
            Ok(s) => s,
            Err(e) => {
                return DetectionResponse {
                    ship_present: false,
                    berthing: false,
                    boxes: Vec::new(),
                    latency_s: self.noise.latency_s,
                    error: Some(e.to_string()),
                }
            }
        };
        let seed = mix_seed(&[self.seed, fnv1a(req.session_id.as_bytes())]);
        let boxes = detect(&scene, &self.noise, seed);
        let ship_present = !boxes.is_empty();
        let (berthing, error) = match gate_from_params(&self.config.current(&req.sensor_id), scene.width, scene.height)
        {
            Ok(gate) => (classify_berthing(&boxes, &gate).berthing, None),
            Err(e) => (false, Some(e.to_string())),
        };
        let verdict = VerdictRecord {
            sensor_id: req.sensor_id.clone(),
            session_id: req.session_id.clone(),
            ship_present,
            berthing,
        };
        if let Err(e) = self.config.record_verdict(verdict) {
            log::warn!("could not record verdict: {e}");
        }
        DetectionResponse { ship_present, berthing, boxes, latency_s: self.noise.latency_s, error }
    }

    pub fn flush(&self) -> Result<(), IngestError> {
        self.store.flush()
    }
}

impl CloudLink for IngestService {
    fn detect(&self, request: &DetectionRequest) -> Result<DetectionResponse, IngestError> {
        Ok(self.handle_detection(request))
    }

    fn poll_config(&self, sensor_id: &str, since_version: u64) -> Result<Option<ConfigSnapshot>, IngestError> {
        Ok(self.config.get_config(sensor_id, since_version))
    }

    fn upload(&self, bulk: &BulkUpload) -> Result<(), IngestError> {
        self.store.store_bulk(bulk)?;
        self.bump(|s| s.bulk_uploads += 1);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::{BBox, LabeledBox};
    use crate::telemetry::{package_rows, Row};

    fn service() -> IngestService {
        IngestService::in_memory(DetectorNoise::perfect(), 1)
    }

    fn request(boxes: &[(f64, f64, f64, f64)]) -> DetectionRequest {
        let mut scene = AnnotationScene::empty("s", 1024.0, 1024.0);
        for &(a, b, c, d) in boxes {
            scene.boxes.push(LabeledBox::ship(BBox::new(a, b, c, d).unwrap()));
        }
        DetectionRequest { sensor_id: "7".into(), session_id: "7-1.000".into(), scene: scene.to_json() }
    }

    #[test]
    fn detection_cases() {
        let svc = service();
        let big = svc.handle_detection(&request(&[(212.0, 400.0, 812.0, 900.0)]));
        assert!(big.ship_present && big.berthing);
        let empty = svc.handle_detection(&request(&[]));
        assert!(!empty.ship_present && !empty.berthing);
        let small = svc.handle_detection(&request(&[(500.0, 600.0, 540.0, 630.0)]));
        assert!(small.ship_present && !small.berthing);
        let junk = svc.handle_detection(&DetectionRequest {
            sensor_id: "7".into(),
            session_id: "x".into(),
            scene: "not json".into(),
        });
        assert!(!junk.ship_present && junk.error.is_some());
        assert_eq!(svc.config().verdicts().len(), 3);
        assert_eq!(svc.config().version("7"), 0);
    }

    #[test]
    fn routing_and_malformed() {
        let svc = service();
        let rows: Vec<Row> = (0..5).map(|i| Row::from_array([i as f64 * 0.01, 0.0, 0.0, 1000.0, 0.0, 0.0])).collect();
        let p = package_rows("7", "a", &rows).remove(0);
        svc.handle_message(&Message { topic: p.topic.clone(), payload: p.encode() });
        svc.handle_message(&Message { topic: p.topic.clone(), payload: p.encode() });
        svc.handle_message(&Message { topic: "sensors/8/data".into(), payload: p.encode() });
        svc.handle_message(&Message { topic: "sensors/7/data".into(), payload: "{}".into() });
        let s = svc.stats();
        assert_eq!((s.packets, s.duplicate_packets, s.malformed), (2, 1, 2));
        assert_eq!(svc.store().query_series("7", 0.0, 1.0).len(), 5);
    }
}
