use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc::Receiver;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use portmon_core::detection::DetectorNoise;
use portmon_core::ingest::{
    CloudLink, ConfigSnapshot, DetectionRequest, DetectionResponse, HttpLink, HttpServer, IngestError, IngestService,
};
use portmon_core::node::{is_valid_transition_log, Node, NodeConfig, NodeLog};
use portmon_core::sim::{Scenario, ShipEvent, SimClock, World};
use portmon_core::telemetry::{
    BulkUpload, FaultConfig, LoopbackBroker, LoopbackTransport, Message, Row, RowSource, Subscribe, DATA_FILTER,
    INFO_FILTER,
};
use portmon_core::trigger::{Arbitration, TriggerKind};

/// Half an hour with one ship crossing 20 m at 570 s and berthing.
fn world() -> World {
    let mut s = Scenario::new(1800.0);
    s.seed = 21;
    s.ship_events.push(ShipEvent {
        appear_t: 410.0,
        start_m: 100.0,
        speed_mps: 0.5,
        berth_m: 10.0,
        impact_t: 592.0,
        impact_amp_mg: [1.0, 2.0, 3.0],
        impact_freq_hz: 2.0,
        impact_decay_s: 5.0,
        departs_t: 1700.0,
        passing: false,
    });
    World::new(s).unwrap()
}

fn truth(world: &World, sensor: &str, start_t: f64, duration_s: f64) -> Vec<Row> {
    world.session_rows(sensor, start_t, duration_s).iter().map(Row::quantized).collect()
}

fn wire(faults: FaultConfig) -> (LoopbackTransport, Receiver<Message>) {
    let broker = LoopbackBroker::new();
    let rx = broker.subscribe(&[DATA_FILTER, INFO_FILTER]).unwrap();
    (broker.transport(faults), rx)
}

/// Runs one node against `service` with a consumer draining the subscription.
fn drive(
    world: &World,
    link: &dyn CloudLink,
    service: &IngestService,
    cfg: NodeConfig,
    (transport, rx): (LoopbackTransport, Receiver<Message>),
) -> NodeLog {
    let end_t = world.scenario().duration_s;
    thread::scope(|scope| {
        let consumer = scope.spawn(|| service.consume(rx));
        let log = Node::new(cfg, world, link, transport, SimClock::unpaced()).unwrap().run(end_t).unwrap();
        consumer.join().unwrap();
        log
    })
}

fn summary(log: &NodeLog) -> Vec<(f64, TriggerKind, bool, f64)> {
    log.sessions.iter().map(|s| (s.trigger_t, s.trigger_kind, s.berthing, s.duration_s)).collect()
}

#[test]
fn sessions_are_sized_by_the_verdict_and_match_ground_truth() {
    let world = world();
    let service = IngestService::in_memory(DetectorNoise::perfect(), 0);
    let log = drive(&world, &service, &service, NodeConfig::new("1"), wire(FaultConfig::lossless()));

    assert_eq!(
        summary(&log),
        vec![(300.0, TriggerKind::Schedule, false, 30.0), (570.0, TriggerKind::Rangefinder, true, 1200.0)]
    );
    assert!(is_valid_transition_log(&log.state_word()));
    assert_eq!(log.transitions.len(), 1 + 5 * log.sessions.len());
    for s in &log.sessions {
        // detection latency pushes the start to the next millisecond
        assert!(s.start_t > s.trigger_t && s.start_t - s.trigger_t < 1.0);
        assert_eq!(s.row_count as f64, s.duration_s * 100.0);
        let stored = service.store().session("1", &s.session_id).unwrap();
        assert_eq!(stored.rows, truth(&world, "1", s.start_t, s.duration_s));
        assert!(stored.report.missing.is_empty());
    }
    let suppressed: Vec<f64> =
        log.events.iter().filter(|e| e.decision == Arbitration::Suppress).map(|e| e.event.t).collect();
    assert_eq!(suppressed, vec![600.0, 900.0, 1200.0, 1500.0]);
}

#[test]
fn stream_alone_survives_duplicates() {
    let world = world();
    let service = IngestService::in_memory(DetectorNoise::perfect(), 0);
    let mut cfg = NodeConfig::new("2");
    cfg.bulk_upload = false;
    let faults = FaultConfig { loss_rate: 0.0, duplicate_rate: 0.3, seed: 5 };
    let log = drive(&world, &service, &service, cfg, wire(faults));
    for s in &log.sessions {
        let stored = service.store().session("2", &s.session_id).unwrap();
        assert_eq!(stored.source, RowSource::Stream);
        assert_eq!(stored.rows, truth(&world, "2", s.start_t, s.duration_s));
    }
    assert!(service.stats().duplicate_packets > 0);
}

/// Takes the network down from the first detection request until the first
/// config poll, so the whole first session's stream and info publish fail.
struct Outage<'a> {
    service: &'a IngestService,
    down: Arc<AtomicBool>,
    detects: AtomicUsize,
}

impl CloudLink for Outage<'_> {
    fn detect(&self, request: &DetectionRequest) -> Result<DetectionResponse, IngestError> {
        if self.detects.fetch_add(1, Ordering::SeqCst) == 0 {
            self.down.store(true, Ordering::SeqCst);
        }
        self.service.detect(request)
    }

    fn poll_config(&self, sensor_id: &str, since_version: u64) -> Result<Option<ConfigSnapshot>, IngestError> {
        self.down.store(false, Ordering::SeqCst);
        self.service.poll_config(sensor_id, since_version)
    }

    fn upload(&self, bulk: &BulkUpload) -> Result<(), IngestError> {
        self.service.upload(bulk)
    }
}

#[test]
fn bulk_upload_covers_a_link_outage() {
    let world = world();
    let service = IngestService::in_memory(DetectorNoise::perfect(), 0);
    let wired = wire(FaultConfig::lossless());
    let link = Outage { service: &service, down: wired.0.outage_switch(), detects: AtomicUsize::new(0) };
    let log = drive(&world, &link, &service, NodeConfig::new("1"), wired);
    let first = &log.sessions[0];
    assert_eq!(first.packets_sent, 0);
    assert_eq!(first.packets_failed, 600);
    let stored = service.store().session("1", &first.session_id).unwrap();
    assert_eq!(stored.source, RowSource::Bulk);
    assert_eq!(stored.rows, truth(&world, "1", first.start_t, first.duration_s));
    assert_eq!(stored.report.missing_count(), 600);
    // the retried info record arrived once the link came back
    let info = service.store().query_info("1", 0.0, 1800.0);
    assert!(info.iter().any(|r| r.session_id == first.session_id));
    assert_eq!(log.pending_uploads, 0);
}

/// Answers every detection request late, or not at all.
struct SlowDetector<'a> {
    service: &'a IngestService,
    latency_s: Option<f64>,
}

impl CloudLink for SlowDetector<'_> {
    fn detect(&self, request: &DetectionRequest) -> Result<DetectionResponse, IngestError> {
        match self.latency_s {
            Some(latency_s) => Ok(DetectionResponse { latency_s, ..self.service.detect(request)? }),
            None => Err(IngestError::Link("detector offline".into())),
        }
    }

    fn poll_config(&self, sensor_id: &str, since_version: u64) -> Result<Option<ConfigSnapshot>, IngestError> {
        self.service.poll_config(sensor_id, since_version)
    }

    fn upload(&self, bulk: &BulkUpload) -> Result<(), IngestError> {
        self.service.upload(bulk)
    }
}

#[test]
fn detection_timeout_falls_back_to_the_short_session() {
    for latency_s in [Some(15.0), None] {
        let world = world();
        let service = IngestService::in_memory(DetectorNoise::perfect(), 0);
        let link = SlowDetector { service: &service, latency_s };
        let log = drive(&world, &link, &service, NodeConfig::new("1"), wire(FaultConfig::lossless()));
        assert!(is_valid_transition_log(&log.state_word()));
        // every session is short, even the one triggered by the berthing ship
        assert!(log.sessions.iter().all(|s| s.detection_timed_out && !s.berthing && s.duration_s == 30.0));
        let crossing = log.sessions.iter().find(|s| s.trigger_kind == TriggerKind::Rangefinder).unwrap();
        assert_eq!(crossing.trigger_t, 570.0);
        assert_eq!(crossing.start_t, 580.0);
        assert_eq!(crossing.session_id, "1-580.000");
        let info = service.store().query_info("1", 0.0, 1800.0);
        assert!(info.iter().all(|r| r.detection_timed_out && !r.ship_present));
    }
}

#[test]
fn remote_config_applies_after_the_first_cycle() {
    let world = world();
    let service = IngestService::in_memory(DetectorNoise::perfect(), 0);
    let updates: BTreeMap<String, f64> =
        [("schedule_period_s".to_string(), 600.0), ("distance_threshold_m".to_string(), 30.0)].into();
    assert_eq!(service.config().set_config("1", &updates).unwrap(), 1);
    let log = drive(&world, &service, &service, NodeConfig::new("1"), wire(FaultConfig::lossless()));

    assert_eq!(log.config_updates.len(), 1);
    assert_eq!(log.config_updates[0].1, 1);
    // 30 m is reached at 410 + 70 / 0.5, still outside the final approach, so
    // the crossing is short and the next tick finds the ship moored
    assert_eq!(
        summary(&log),
        vec![
            (300.0, TriggerKind::Schedule, false, 30.0),
            (550.0, TriggerKind::Rangefinder, false, 30.0),
            (900.0, TriggerKind::Schedule, true, 1200.0),
        ]
    );
    let ticks: Vec<f64> =
        log.events.iter().filter(|e| e.event.kind == TriggerKind::Schedule).map(|e| e.event.t).collect();
    assert_eq!(ticks, vec![300.0, 900.0, 1500.0]);
}

#[test]
fn invalid_remote_config_is_refused() {
    let service = IngestService::in_memory(DetectorNoise::perfect(), 0);
    let bad: BTreeMap<String, f64> = [("schedule_period_s".to_string(), -5.0)].into();
    assert!(service.config().set_config("1", &bad).is_err());
    let unknown: BTreeMap<String, f64> = [("warp_factor".to_string(), 9.0)].into();
    assert!(service.config().set_config("1", &unknown).is_err());
    assert_eq!(service.config().version("1"), 0);
}

#[test]
fn node_runs_end_to_end_over_http() {
    let world = world();
    let service = Arc::new(IngestService::in_memory(DetectorNoise::perfect(), 0));
    let server = HttpServer::start(Arc::clone(&service), "127.0.0.1:0").unwrap();
    let link = HttpLink::new(&server.base_url(), Duration::from_secs(10));
    let updates: BTreeMap<String, f64> = [("distance_threshold_m".to_string(), 30.0)].into();
    assert_eq!(link.set_config("1", &updates).unwrap(), 1);

    // lose a fifth of the stream; the bulk files still restore every session
    let faults = FaultConfig { loss_rate: 0.2, duplicate_rate: 0.0, seed: 8 };
    let log = drive(&world, &link, &service, NodeConfig::new("1"), wire(faults));
    drop(server);

    assert_eq!(summary(&log)[1], (550.0, TriggerKind::Rangefinder, false, 30.0));
    assert_eq!(summary(&log)[2], (600.0, TriggerKind::Schedule, true, 1200.0));
    for s in &log.sessions {
        let stored = service.store().session("1", &s.session_id).unwrap();
        assert_eq!(stored.source, RowSource::Bulk);
        assert_eq!(stored.rows, truth(&world, "1", s.start_t, s.duration_s));
    }
    assert_eq!(service.stats().detections, 3);
}
