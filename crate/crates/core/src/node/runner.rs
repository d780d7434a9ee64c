use std::sync::mpsc::sync_channel;
use std::thread;

use serde::{Deserialize, Serialize};

use super::{NodeConfig, NodeError, NodeState, NodeStateKind, SensingSession};
use crate::dsp::AccelFrame;
use crate::fmt_time;
use crate::ingest::{apply_trigger_params, CloudLink, DetectionRequest};
use crate::sim::{SimClock, World};
use crate::telemetry::{encode_csv, info_topic, BulkUpload, InfoRecord, Packetizer, Row, Transport};
use crate::trigger::{arbitrate, Arbitration, DistanceDetector, ScheduleTimer, TriggerEvent};

/// Raw frames handed from the generator thread to the chain per message.
const CHUNK: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub t: f64,
    pub state: NodeStateKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub event: TriggerEvent,
    pub decision: Arbitration,
}

/// Everything a node did during a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeLog {
    pub transitions: Vec<Transition>,
    pub events: Vec<EventRecord>,
    pub sessions: Vec<SensingSession>,
    /// `(t, version)` of every applied remote config.
    pub config_updates: Vec<(f64, u64)>,
    pub readings: u64,
    pub publish_failures: u64,
    pub upload_failures: u64,
    /// Bulk uploads still undelivered when the run ended.
    pub pending_uploads: usize,
}

impl NodeLog {
    pub fn state_word(&self) -> Vec<NodeStateKind> {
        self.transitions.iter().map(|t| t.state).collect()
    }
}

/// One edge node wired to a world, a cloud link, and a publish transport.
pub struct Node<'a, T: Transport> {
    cfg: NodeConfig,
    world: &'a World,
    link: &'a dyn CloudLink,
    transport: T,
    clock: SimClock,
    state: NodeState,
    log: NodeLog,
    pending_uploads: Vec<BulkUpload>,
    pending_info: Vec<(String, String)>,
}

/// Rounds up to the next whole millisecond.
fn ceil_ms(t: f64) -> f64 {
    (t * 1000.0 - 1e-6).ceil() / 1000.0
}

impl<'a, T: Transport> Node<'a, T> {
    pub fn new(
        cfg: NodeConfig,
        world: &'a World,
        link: &'a dyn CloudLink,
        transport: T,
        clock: SimClock,
    ) -> Result<Self, NodeError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            world,
            link,
            transport,
            clock,
            state: NodeState::Rest,
            log: NodeLog::default(),
            pending_uploads: Vec::new(),
            pending_info: Vec::new(),
        })
    }

    pub fn config(&self) -> &NodeConfig {
        &self.cfg
    }

    pub fn state(&self) -> NodeState {
        self.state
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    fn enter(&mut self, t: f64, state: NodeState) {
        self.state = state;
        self.log.transitions.push(Transition { t, state: state.kind() });
    }

    /// Runs the control loop from t = 0 until `end_t`. Schedule ticks and 1 Hz
    /// rangefinder readings are merged in time order (the schedule first on a
    /// tie); events that arrive while a session is open are suppressed.
    pub fn run(mut self, end_t: f64) -> Result<NodeLog, NodeError> {
        self.enter(0.0, NodeState::Rest);
        let mut timer = ScheduleTimer::new(0.0);
        let mut detector = DistanceDetector::new();
        let mut reading_k: u64 = 0;
        let mut busy_until = f64::NEG_INFINITY;

        loop {
            let sched_t = timer.next_fire(self.cfg.trigger.schedule_period_s);
            let read_t = reading_k as f64;
            if sched_t.min(read_t) >= end_t {
                break;
            }
            let event = if sched_t <= read_t {
                Some(timer.fire(self.cfg.trigger.schedule_period_s))
            } else {
                reading_k += 1;
                self.log.readings += 1;
                detector.evaluate(self.world.distance_reading(read_t), &self.cfg.trigger)?
            };
            let Some(event) = event else { continue };
            self.clock.wait_until(event.t);
            let decision = arbitrate(&event, event.t < busy_until);
            self.log.events.push(EventRecord { event, decision });
            if decision == Arbitration::Accept {
                let session = self.run_cycle(event)?;
                busy_until = session.end_t();
                self.log.sessions.push(session);
                self.poll_config(busy_until);
                self.retry_pending();
            }
        }
        self.retry_pending();
        self.log.pending_uploads = self.pending_uploads.len();
        Ok(self.log)
    }

    /// One pass around the cycle for an accepted trigger.
    pub fn run_cycle(&mut self, event: TriggerEvent) -> Result<SensingSession, NodeError> {
        let sensor = self.cfg.sensor_id.clone();
        self.enter(event.t, NodeState::Capturing);
        let scene_id = format!("{sensor}-{}", fmt_time(event.t));
        let snapshot = self.world.scene(event.t, &scene_id);
        let temperature_c = self.world.temperature(event.t);
        let distance_m = self.world.distance(event.t);

        self.enter(event.t, NodeState::AwaitingDetection);
        let request =
            DetectionRequest { sensor_id: sensor.clone(), session_id: scene_id, scene: snapshot.scene.to_json() };
        let timeout = self.cfg.detection_timeout_s;
        let (ship_present, berthing, timed_out, waited) = match self.link.detect(&request) {
            Ok(r) if r.latency_s <= timeout => (r.ship_present, r.berthing && r.ship_present, false, r.latency_s),
            Ok(_) => (false, false, true, timeout),
            Err(e) => {
                log::warn!("node {sensor}: detection request failed: {e}");
                (false, false, true, timeout)
            }
        };

        let start_t = ceil_ms(event.t + waited);
        let duration_s = self.cfg.trigger.sensing_duration(berthing);
        let session_id = format!("{sensor}-{}", fmt_time(start_t));
        self.enter(start_t, NodeState::Sensing { cause: event.kind, duration_s, started_t: start_t });

        let info = InfoRecord {
            sensor_id: sensor.clone(),
            session_id: session_id.clone(),
            trigger_time: event.t,
            distance_m,
            temperature_c,
            trigger_type: event.kind,
            ship_present,
            berthing,
            detection_timed_out: timed_out,
            start_t,
            duration_s,
        };
        self.pending_info.push((info_topic(&sensor), info.encode()));
        self.flush_info();

        let (n_raw, expected_rows) = self.world.session_size(duration_s);
        let k0 = self.world.sample_index(start_t);
        let (rows, sent, failed) = self.sense(&session_id, k0, n_raw);
        if rows.len() != expected_rows {
            return Err(NodeError::RowCount { session_id, expected: expected_rows, got: rows.len() });
        }

        let end_t = start_t + duration_s;
        self.enter(end_t, NodeState::Transmitting);
        if self.cfg.bulk_upload {
            let bulk = BulkUpload {
                sensor_id: sensor.clone(),
                session_id: session_id.clone(),
                ship_present,
                row_count: rows.len(),
                csv: encode_csv(&rows),
                scene: Some(snapshot.scene.to_json()),
            };
            if let Err(e) = self.link.upload(&bulk) {
                log::warn!("node {sensor}: bulk upload of {session_id} failed, queued: {e}");
                self.log.upload_failures += 1;
                self.pending_uploads.push(bulk);
            }
        }
        self.enter(end_t, NodeState::Rest);

        Ok(SensingSession {
            session_id,
            sensor_id: sensor,
            trigger_t: event.t,
            start_t,
            trigger_kind: event.kind,
            ship_present,
            berthing,
            detection_timed_out: timed_out,
            duration_s,
            temperature_c,
            distance_m,
            row_count: rows.len(),
            packets_sent: sent,
            packets_failed: failed,
        })
    }

    /// Generates raw samples on a producer thread and runs the chain and the
    /// packetizer here, publishing each packet as it fills.
    fn sense(&mut self, session_id: &str, k0: u64, n_raw: usize) -> (Vec<Row>, u64, u64) {
        let world = self.world;
        let sensor = self.cfg.sensor_id.clone();
        let mut chain = world.new_chain();
        let mut packetizer = Packetizer::new(&sensor, session_id);
        let mut rows = Vec::with_capacity(n_raw / world.scenario().chain.factor.max(1));
        let (mut sent, mut failed) = (0u64, 0u64);

        thread::scope(|scope| {
            let (tx, rx) = sync_channel::<Vec<AccelFrame<f64>>>(8);
            scope.spawn(move || {
                let mut frames = world.raw_frames(&sensor, k0, n_raw);
                loop {
                    let chunk: Vec<_> = frames.by_ref().take(CHUNK).collect();
                    if chunk.is_empty() || tx.send(chunk).is_err() {
                        break;
                    }
                }
            });
            let mut publish =
                |transport: &mut T, p: crate::telemetry::DataPacket| match transport.publish(&p.topic, &p.encode()) {
                    Ok(()) => sent += 1,
                    Err(_) => failed += 1,
                };
            for chunk in rx {
                if let Some(last) = chunk.last() {
                    self.clock.wait_until(last.t);
                }
                for frame in chunk {
                    if let Some(s) = chain.push(frame) {
                        let row = Row::from_chain(&s);
                        rows.push(row);
                        if let Some(p) = packetizer.push(row) {
                            publish(&mut self.transport, p);
                        }
                    }
                }
            }
            if let Some(p) = packetizer.finish() {
                publish(&mut self.transport, p);
            }
        });
        self.log.publish_failures += failed;
        (rows, sent, failed)
    }

    fn flush_info(&mut self) {
        let mut still = Vec::new();
        for (topic, payload) in std::mem::take(&mut self.pending_info) {
            if let Err(e) = self.transport.publish(&topic, &payload) {
                log::warn!("node {}: info publish failed, will retry: {e}", self.cfg.sensor_id);
                self.log.publish_failures += 1;
                still.push((topic, payload));
            }
        }
        self.pending_info = still;
    }

    fn retry_pending(&mut self) {
        self.flush_info();
        let mut still = Vec::new();
        for bulk in std::mem::take(&mut self.pending_uploads) {
            if let Err(e) = self.link.upload(&bulk) {
                log::warn!("node {}: retry of {} failed: {e}", self.cfg.sensor_id, bulk.session_id);
                self.log.upload_failures += 1;
                still.push(bulk);
            }
        }
        self.pending_uploads = still;
    }

    /// Applies any parameter set newer than the node's version. An unreachable
    /// store or an invalid parameter set leaves the trigger config unchanged.
    fn poll_config(&mut self, t: f64) {
        match self.link.poll_config(&self.cfg.sensor_id, self.cfg.config_version) {
            Ok(Some(snap)) if snap.version > self.cfg.config_version => {
                let next = apply_trigger_params(&self.cfg.trigger, &snap.params);
                match next.validate() {
                    Ok(()) => self.cfg.trigger = next,
                    Err(e) => log::warn!("node {}: ignoring config v{}: {e}", self.cfg.sensor_id, snap.version),
                }
                self.cfg.config_version = snap.version;
                self.log.config_updates.push((t, snap.version));
            }
            Ok(_) => {}
            Err(e) => log::warn!("node {}: config poll failed: {e}", self.cfg.sensor_id),
        }
    }
}
