use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use super::IngestError;
use crate::telemetry::{
    decode_csv, reconcile, validate_sensor_id, BulkUpload, DataPacket, InfoRecord, LossReport, Reconciled, Row,
    RowSource, StreamAssembly, TelemetryError,
};

const SERIES_DIR: &str = "series";

#[derive(Debug, Default)]
struct SessionData {
    stream: StreamAssembly,
    bulk: Option<Vec<Row>>,
}

#[derive(Debug, Default)]
struct SensorData {
    sessions: BTreeMap<String, SessionData>,
    /// Keyed by session id: one info record per session.
    info: BTreeMap<String, InfoRecord>,
    log: Option<BufWriter<File>>,
    info_log: Option<BufWriter<File>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionSummary {
    pub session_id: String,
    pub info: Option<InfoRecord>,
    pub row_count: usize,
    pub source: Option<RowSource>,
    pub report: LossReport,
}

/// Per-sensor main series (`sensor<id>`) and info series (`sensor<id>_info`).
///
/// Streamed packets and bulk files are kept per session and reconciled on
/// read, so the order in which the two paths arrive does not matter. When
/// opened on a directory every accepted write is appended to a log, and bulk
/// files land in `<root>/{ship|noship}/sensor<id>/<session_id>.csv`.
#[derive(Debug, Default)]
pub struct SeriesStore {
    sensors: Mutex<BTreeMap<String, Arc<Mutex<SensorData>>>>,
    root: Option<PathBuf>,
}

fn series_log(root: &Path, sensor_id: &str) -> PathBuf {
    root.join(SERIES_DIR).join(format!("sensor{sensor_id}.log"))
}

fn info_log(root: &Path, sensor_id: &str) -> PathBuf {
    root.join(SERIES_DIR).join(format!("sensor{sensor_id}_info.log"))
}

fn appender(path: &Path) -> Result<BufWriter<File>, IngestError> {
    Ok(BufWriter::new(OpenOptions::new().create(true).append(true).open(path)?))
}

impl SeriesStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens a store rooted at `dir`, replaying any existing logs.
    pub fn open(dir: &Path) -> Result<Self, IngestError> {
        fs::create_dir_all(dir.join(SERIES_DIR))?;
        let mut store = Self::default();
        let mut ids = Vec::new();
        for entry in fs::read_dir(dir.join(SERIES_DIR))? {
            let name = entry?.file_name().to_string_lossy().into_owned();
            if let Some(id) = name.strip_prefix("sensor").and_then(|n| n.strip_suffix(".log")) {
                if !id.ends_with("_info") {
                    ids.push(id.to_string());
                }
            }
        }
        ids.sort();
        for id in &ids {
            store.replay(dir, id)?;
        }
        store.root = Some(dir.to_path_buf());
        Ok(store)
    }

    fn replay(&self, root: &Path, sensor_id: &str) -> Result<(), IngestError> {
        let corrupt = |m: String| IngestError::Io(format!("sensor{sensor_id}.log: {m}"));
        if let Ok(f) = File::open(series_log(root, sensor_id)) {
            for line in BufReader::new(f).lines() {
                let line = line?;
                if let Some(json) = line.strip_prefix("P ") {
                    let p = DataPacket::decode(&crate::telemetry::data_topic(sensor_id), json)?;
                    self.handle_packet(&p)?;
                } else if let Some(rest) = line.strip_prefix("B ") {
                    let (session_id, rel) = rest.split_once(' ').ok_or_else(|| corrupt(line.clone()))?;
                    let rows = decode_csv(&fs::read_to_string(root.join(rel))?)?;
                    self.with_sensor(sensor_id, |s| {
                        s.sessions.entry(session_id.to_string()).or_default().bulk = Some(rows);
                    });
                } else if !line.trim().is_empty() {
                    return Err(corrupt(line));
                }
            }
        }
        if let Ok(f) = File::open(info_log(root, sensor_id)) {
            for line in BufReader::new(f).lines() {
                let line = line?;
                if !line.trim().is_empty() {
                    self.handle_info(&InfoRecord::decode(&line)?)?;
                }
            }
        }
        Ok(())
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    fn sensor(&self, sensor_id: &str) -> Arc<Mutex<SensorData>> {
        let mut sensors = self.sensors.lock().expect("store lock");
        Arc::clone(sensors.entry(sensor_id.to_string()).or_default())
    }

    fn with_sensor<R>(&self, sensor_id: &str, f: impl FnOnce(&mut SensorData) -> R) -> R {
        let s = self.sensor(sensor_id);
        let mut guard = s.lock().expect("sensor lock");
        f(&mut guard)
    }

    fn existing<R>(&self, sensor_id: &str, f: impl FnOnce(&SensorData) -> R) -> Option<R> {
        let s = self.sensors.lock().expect("store lock").get(sensor_id).cloned()?;
        let guard = s.lock().expect("sensor lock");
        Some(f(&guard))
    }

    /// Stores a streamed packet. Returns false for a duplicate `(session, seq)`.
    pub fn handle_packet(&self, packet: &DataPacket) -> Result<bool, IngestError> {
        packet.validate()?;
        let root = self.root.clone();
        self.with_sensor(&packet.sensor_id, |s| {
            let fresh = s.sessions.entry(packet.session_id.clone()).or_default().stream.insert(packet);
            if fresh {
                if let Some(root) = root {
                    if s.log.is_none() {
                        s.log = Some(appender(&series_log(&root, &packet.sensor_id))?);
                    }
                    let w = s.log.as_mut().expect("log opened");
                    writeln!(w, "P {}", packet.encode())?;
                }
            }
            Ok(fresh)
        })
    }

    /// Stores the info record of a session. Returns false if the session already has one.
    pub fn handle_info(&self, record: &InfoRecord) -> Result<bool, IngestError> {
        validate_sensor_id(&record.sensor_id)?;
        let root = self.root.clone();
        self.with_sensor(&record.sensor_id, |s| {
            if s.info.contains_key(&record.session_id) {
                return Ok(false);
            }
            s.info.insert(record.session_id.clone(), record.clone());
            if let Some(root) = root {
                if s.info_log.is_none() {
                    s.info_log = Some(appender(&info_log(&root, &record.sensor_id))?);
                }
                writeln!(s.info_log.as_mut().expect("log opened"), "{}", record.encode())?;
            }
            Ok(true)
        })
    }

    /// Relative path of a session's bulk file.
    pub fn bulk_path(sensor_id: &str, session_id: &str, ship_present: bool) -> PathBuf {
        PathBuf::from(if ship_present { "ship" } else { "noship" })
            .join(format!("sensor{sensor_id}"))
            .join(format!("{session_id}.csv"))
    }

    /// Stores a bulk upload. Re-uploading the same session overwrites it with
    /// identical content.
    pub fn store_bulk(&self, bulk: &BulkUpload) -> Result<(), IngestError> {
        validate_sensor_id(&bulk.sensor_id)?;
        let rows = decode_csv(&bulk.csv)?;
        if rows.len() != bulk.row_count {
            return Err(TelemetryError::RowCountMismatch { expected: bulk.row_count, got: rows.len() }.into());
        }
        let rel = Self::bulk_path(&bulk.sensor_id, &bulk.session_id, bulk.ship_present);
        let root = self.root.clone();
        self.with_sensor(&bulk.sensor_id, |s| {
            let session = s.sessions.entry(bulk.session_id.clone()).or_default();
            let first = session.bulk.is_none();
            if let Some(root) = &root {
                let path = root.join(&rel);
                fs::create_dir_all(path.parent().expect("bulk path has a parent"))?;
                fs::write(&path, &bulk.csv)?;
                if let Some(scene) = &bulk.scene {
                    fs::write(path.with_extension("scene.json"), scene)?;
                }
                if first {
                    if s.log.is_none() {
                        s.log = Some(appender(&series_log(root, &bulk.sensor_id))?);
                    }
                    let w = s.log.as_mut().expect("log opened");
                    writeln!(w, "B {} {}", bulk.session_id, rel.display())?;
                }
            }
            session.bulk = Some(rows);
            Ok(())
        })
    }

    /// Stores the scene document captured for a session next to its bulk file.
    pub fn store_scene(
        &self,
        sensor_id: &str,
        session_id: &str,
        ship_present: bool,
        scene: &str,
    ) -> Result<(), IngestError> {
        validate_sensor_id(sensor_id)?;
        if let Some(root) = &self.root {
            let path = root.join(Self::bulk_path(sensor_id, session_id, ship_present));
            fs::create_dir_all(path.parent().expect("bulk path has a parent"))?;
            fs::write(path.with_extension("scene.json"), scene)?;
        }
        Ok(())
    }

    pub fn flush(&self) -> Result<(), IngestError> {
        let sensors: Vec<_> = self.sensors.lock().expect("store lock").values().cloned().collect();
        for s in sensors {
            let mut g = s.lock().expect("sensor lock");
            if let Some(w) = g.log.as_mut() {
                w.flush()?;
            }
            if let Some(w) = g.info_log.as_mut() {
                w.flush()?;
            }
        }
        Ok(())
    }

    pub fn sensors(&self) -> Vec<String> {
        self.sensors.lock().expect("store lock").keys().cloned().collect()
    }

    pub fn session_ids(&self, sensor_id: &str) -> Vec<String> {
        self.existing(sensor_id, |s| {
            let mut ids: Vec<String> = s.sessions.keys().chain(s.info.keys()).cloned().collect();
            ids.sort();
            ids.dedup();
            ids
        })
        .unwrap_or_default()
    }

    /// Reconciled rows of one session.
    pub fn session(&self, sensor_id: &str, session_id: &str) -> Result<Reconciled, IngestError> {
        self.existing(sensor_id, |s| match s.sessions.get(session_id) {
            Some(d) => Ok(reconcile(&d.stream, d.bulk.as_deref())?),
            None => Err(TelemetryError::SessionLost.into()),
        })
        .unwrap_or(Err(TelemetryError::SessionLost.into()))
    }

    pub fn session_summaries(&self, sensor_id: &str) -> Vec<SessionSummary> {
        let ids = self.session_ids(sensor_id);
        self.existing(sensor_id, |s| {
            ids.iter()
                .map(|id| {
                    let info = s.info.get(id).cloned();
                    let empty = SessionData::default();
                    let data = s.sessions.get(id).unwrap_or(&empty);
                    match reconcile(&data.stream, data.bulk.as_deref()) {
                        Ok(r) => SessionSummary {
                            session_id: id.clone(),
                            info,
                            row_count: r.rows.len(),
                            source: Some(r.source),
                            report: r.report,
                        },
                        Err(_) => SessionSummary {
                            session_id: id.clone(),
                            info,
                            row_count: 0,
                            source: None,
                            report: LossReport {
                                received_packets: 0,
                                expected_packets: None,
                                missing: Vec::new(),
                                duplicates: 0,
                            },
                        },
                    }
                })
                .collect()
        })
        .unwrap_or_default()
    }

    /// Rows with `start <= t < end`, time-ordered. Unknown sensors yield nothing.
    pub fn query_series(&self, sensor_id: &str, start: f64, end: f64) -> Vec<Row> {
        let mut rows: Vec<Row> = self
            .existing(sensor_id, |s| {
                s.sessions
                    .values()
                    .filter_map(|d| reconcile(&d.stream, d.bulk.as_deref()).ok())
                    .flat_map(|r| r.rows)
                    .filter(|r| r.t >= start && r.t < end)
                    .collect()
            })
            .unwrap_or_default();
        rows.sort_by(|a, b| a.t.total_cmp(&b.t));
        rows
    }

    /// Info records with `start <= trigger_time < end`, ordered by trigger time.
    pub fn query_info(&self, sensor_id: &str, start: f64, end: f64) -> Vec<InfoRecord> {
        let mut out: Vec<InfoRecord> = self
            .existing(sensor_id, |s| {
                s.info.values().filter(|r| r.trigger_time >= start && r.trigger_time < end).cloned().collect()
            })
            .unwrap_or_default();
        out.sort_by(|a, b| a.trigger_time.total_cmp(&b.trigger_time));
        out
    }
}

impl Drop for SeriesStore {
    fn drop(&mut self) {
        let _ = self.flush();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::{encode_csv, package_rows};
    use crate::trigger::TriggerKind;

    fn rows(t0: f64, n: usize) -> Vec<Row> {
        (0..n).map(|i| Row::from_array([t0 + i as f64 * 0.01, 1.0, 2.0, 1000.0, 0.01, 0.02]).quantized()).collect()
    }

    fn info(session: &str, t: f64) -> InfoRecord {
        InfoRecord {
            sensor_id: "7".into(),
            session_id: session.into(),
            trigger_time: t,
            distance_m: 100.0,
            temperature_c: 20.0,
            trigger_type: TriggerKind::Schedule,
            ship_present: false,
            berthing: false,
            detection_timed_out: false,
            start_t: t + 0.2,
            duration_s: 30.0,
        }
    }

    fn bulk(session: &str, r: &[Row], ship: bool) -> BulkUpload {
        BulkUpload {
            sensor_id: "7".into(),
            session_id: session.into(),
            ship_present: ship,
            row_count: r.len(),
            csv: encode_csv(r),
            scene: None,
        }
    }

    #[test]
    fn packets_dedup_and_query() {
        let s = SeriesStore::in_memory();
        let a = rows(300.2, 3000);
        for p in package_rows("7", "7-300.200", &a) {
            assert!(s.handle_packet(&p).unwrap());
        }
        let first = package_rows("7", "7-300.200", &a).remove(0);
        assert!(!s.handle_packet(&first).unwrap());
        assert_eq!(s.query_series("7", 0.0, f64::INFINITY), a);
        assert!(s.query_series("9", 0.0, f64::INFINITY).is_empty());
        // half-open
        let end = a[10].t;
        assert_eq!(s.query_series("7", 0.0, end).len(), 10);
    }

    #[test]
    fn two_sessions_ordered() {
        let s = SeriesStore::in_memory();
        let a = rows(300.2, 50);
        let b = rows(600.2, 50);
        for p in package_rows("7", "b", &b).into_iter().chain(package_rows("7", "a", &a)) {
            s.handle_packet(&p).unwrap();
        }
        let all = s.query_series("7", 0.0, 1e9);
        assert_eq!(all, [a, b].concat());
    }

    #[test]
    fn bulk_layout_idempotence_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let s = SeriesStore::open(dir.path()).unwrap();
        let r = rows(10.0, 25);
        s.store_bulk(&bulk("7-10.000", &r, true)).unwrap();
        let path = dir.path().join("ship/sensor7/7-10.000.csv");
        let before = fs::read(&path).unwrap();
        s.store_bulk(&bulk("7-10.000", &r, true)).unwrap();
        assert_eq!(fs::read(&path).unwrap(), before);
        assert_eq!(s.query_series("7", 0.0, 1e9), r);

        let mut bad = bulk("7-20.000", &r, false);
        bad.row_count = 24;
        assert!(matches!(
            s.store_bulk(&bad),
            Err(IngestError::Telemetry(TelemetryError::RowCountMismatch { expected: 24, got: 25 }))
        ));
    }

    #[test]
    fn info_once_per_session() {
        let s = SeriesStore::in_memory();
        assert!(s.handle_info(&info("a", 300.0)).unwrap());
        assert!(!s.handle_info(&info("a", 300.0)).unwrap());
        assert!(s.handle_info(&info("b", 600.0)).unwrap());
        assert_eq!(s.query_info("7", 0.0, 600.0).len(), 1);
        assert_eq!(s.query_info("7", 0.0, 601.0).len(), 2);
    }

    #[test]
    fn replay_restores_everything() {
        let dir = tempfile::tempdir().unwrap();
        let a = rows(300.2, 12);
        let b = rows(600.2, 7);
        {
            let s = SeriesStore::open(dir.path()).unwrap();
            for p in package_rows("7", "a", &a) {
                s.handle_packet(&p).unwrap();
            }
            s.store_bulk(&bulk("b", &b, false)).unwrap();
            s.handle_info(&info("a", 300.0)).unwrap();
            s.handle_info(&info("b", 600.0)).unwrap();
        }
        let s = SeriesStore::open(dir.path()).unwrap();
        assert_eq!(s.sensors(), vec!["7".to_string()]);
        assert_eq!(s.query_series("7", 0.0, 1e9), [a, b].concat());
        assert_eq!(s.query_info("7", 0.0, 1e9).len(), 2);
        let sums = s.session_summaries("7");
        assert_eq!(sums.len(), 2);
        assert_eq!(sums[1].source, Some(RowSource::Bulk));
    }
}
