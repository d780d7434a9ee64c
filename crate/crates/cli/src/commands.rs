use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::mpsc::Receiver;
use std::thread;

use portmon_core::detection::{
    average_precision, bundled_test_scenes, detect, load_dataset, pr_sweep, save_dataset, DetectorNoise, PrPoint,
    SceneEval,
};
use portmon_core::ingest::{ConfigStore, IngestService, IngestStats, SeriesStore};
use portmon_core::node::{Node, NodeConfig, NodeError, NodeLog};
use portmon_core::sim::{fnv1a, mix_seed, GroundTruthLog, Scenario, SimClock, World};
use portmon_core::telemetry::{FaultConfig, LoopbackBroker, Message, Subscribe, Transport, DATA_FILTER, INFO_FILTER};
use serde::Serialize;

use crate::analysis::AnalysisReport;
use crate::CliError;

pub const PR_SWEEP_FILE: &str = "pr_sweep.csv";
pub const STORE_DIR: &str = "store";
pub const CONFIG_DIR: &str = "config";
pub const ANALYSIS_DIR: &str = "analysis";
pub const NODES_DIR: &str = "nodes";
pub const TRUTH_DIR: &str = "truth";
pub const RUN_SUMMARY_FILE: &str = "run.json";

/// Loads a scenario file and applies a seed override.
pub fn load_scenario(path: &Path, seed: Option<u64>) -> Result<Scenario, CliError> {
    let mut scenario = Scenario::load(path)?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    scenario.validate()?;
    Ok(scenario)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOutcome {
    pub log: GroundTruthLog,
    /// Times a non-passing ship entered final approach.
    pub berthing_events: usize,
}

/// Writes the ground-truth log of `scenario` into `out`.
pub fn cmd_simulate(scenario: Scenario, out: &Path) -> Result<SimulateOutcome, CliError> {
    let world = World::new(scenario)?;
    let log = GroundTruthLog::build(&world);
    log.write(&world, out)?;
    Ok(SimulateOutcome { berthing_events: GroundTruthLog::berthing_events(&world), log })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub sensors: usize,
    pub loss_rate: f64,
    pub duplicate_rate: f64,
    pub bulk_upload: bool,
    /// External MQTT broker; the in-process broker is used when absent.
    pub broker: Option<String>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { sensors: 1, loss_rate: 0.0, duplicate_rate: 0.0, bulk_upload: true, broker: None }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub world: World,
    /// Node logs in sensor order ("1", "2", ...).
    pub logs: Vec<NodeLog>,
    pub stats: IngestStats,
    pub reports: Vec<AnalysisReport>,
}

pub fn sensor_ids(n: usize) -> Vec<String> {
    (1..=n).map(|i| i.to_string()).collect()
}

fn ensure_fresh(dir: &Path) -> Result<(), CliError> {
    if dir.exists() && fs::read_dir(dir)?.next().is_some() {
        return Err(CliError::Usage(format!("{} already holds a run", dir.display())));
    }
    Ok(())
}

/// Runs world, nodes, and ingest in one process until the scenario ends, then
/// writes the store, node logs, ground truth, and per-sensor analysis under `out`.
/// Outputs written before a failure are kept.
pub fn cmd_run(scenario: Scenario, opts: &RunOptions, out: &Path) -> Result<RunOutcome, CliError> {
    if opts.sensors == 0 {
        return Err(CliError::Usage("need at least one sensor".into()));
    }
    let faults = FaultConfig { loss_rate: opts.loss_rate, duplicate_rate: opts.duplicate_rate, seed: 0 };
    faults.validate()?;
    let seed = scenario.seed;
    let end_t = scenario.duration_s;
    let world = World::new(scenario)?;
    ensure_fresh(&out.join(STORE_DIR))?;
    ensure_fresh(&out.join(CONFIG_DIR))?;
    let service = IngestService::new(
        SeriesStore::open(&out.join(STORE_DIR))?,
        ConfigStore::open(&out.join(CONFIG_DIR))?,
        world.scenario().detector,
        seed,
    );
    let ids = sensor_ids(opts.sensors);
    let node_cfgs: Vec<NodeConfig> = ids
        .iter()
        .map(|id| {
            let mut cfg = NodeConfig::new(id.clone());
            cfg.trigger = world.scenario().trigger;
            cfg.detection_timeout_s = world.scenario().detection_timeout_s;
            cfg.bulk_upload = opts.bulk_upload;
            cfg.broker_url = opts.broker.clone();
            cfg
        })
        .collect();
    let clock = match world.scenario().time_compression {
        Some(c) => SimClock::compressed(c, 0.0),
        None => SimClock::unpaced(),
    };

    let results = match &opts.broker {
        None => {
            let broker = LoopbackBroker::new();
            let rx = broker.subscribe(&[DATA_FILTER, INFO_FILTER])?;
            let transports = (1..=opts.sensors as u64)
                .map(|i| broker.transport(FaultConfig { seed: mix_seed(&[seed, i]), ..faults }))
                .collect();
            drop(broker);
            run_nodes(&world, &service, node_cfgs, transports, rx, &clock, end_t, false)
        }
        Some(url) => run_external(&world, &service, node_cfgs, url, &clock, end_t)?,
    };
    service.flush()?;

    let mut logs = Vec::new();
    let mut first_err = None;
    for (id, r) in ids.iter().zip(results) {
        match r {
            Ok(log) => {
                write_node_log(&out.join(NODES_DIR), id, &log)?;
                logs.push(log);
            }
            Err(e) => {
                log::error!("sensor {id}: {e}");
                first_err.get_or_insert(e);
            }
        }
    }
    let truth = GroundTruthLog::build(&world);
    truth.write(&world, &out.join(TRUTH_DIR))?;
    let reports: Vec<AnalysisReport> = ids.iter().map(|id| AnalysisReport::build(service.store(), id)).collect();
    for r in &reports {
        r.write(&out.join(ANALYSIS_DIR).join(format!("sensor{}", r.sensor_id)))?;
    }
    let stats = service.stats();
    write_run_summary(out, &world, opts, &stats, &logs)?;
    if let Some(e) = first_err {
        return Err(e.into());
    }
    Ok(RunOutcome { world, logs, stats, reports })
}

#[allow(clippy::too_many_arguments)]
fn run_nodes<T: Transport>(
    world: &World,
    service: &IngestService,
    cfgs: Vec<NodeConfig>,
    transports: Vec<T>,
    rx: Receiver<Message>,
    clock: &SimClock,
    end_t: f64,
    external: bool,
) -> Vec<Result<NodeLog, NodeError>> {
    thread::scope(|scope| {
        let nodes: Vec<_> = cfgs
            .into_iter()
            .zip(transports)
            .map(|(cfg, transport)| {
                let clock = clock.clone();
                scope.spawn(move || Node::new(cfg, world, service, transport, clock)?.run(end_t))
            })
            .collect();
        if external {
            // An external subscription never closes; drain until the nodes are
            // done and the broker has gone quiet.
            let results: Vec<_> = nodes.into_iter().map(|h| h.join().expect("node thread")).collect();
            while let Ok(msg) = rx.recv_timeout(std::time::Duration::from_secs(2)) {
                service.handle_message(&msg);
            }
            results
        } else {
            let consumer = scope.spawn(move || service.consume(rx));
            let results = nodes.into_iter().map(|h| h.join().expect("node thread")).collect();
            consumer.join().expect("consumer thread");
            results
        }
    })
}

#[cfg(feature = "mqtt")]
fn run_external(
    world: &World,
    service: &IngestService,
    cfgs: Vec<NodeConfig>,
    url: &str,
    clock: &SimClock,
    end_t: f64,
) -> Result<Vec<Result<NodeLog, NodeError>>, CliError> {
    use portmon_core::telemetry::MqttTransport;
    let sub = MqttTransport::connect(url, "portmon-ingest")?;
    let rx = sub.subscribe(&[DATA_FILTER, INFO_FILTER])?;
    let transports = cfgs
        .iter()
        .map(|c| MqttTransport::connect(url, &format!("portmon-node-{}", c.sensor_id)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(run_nodes(world, service, cfgs, transports, rx, clock, end_t, true))
}

#[cfg(not(feature = "mqtt"))]
fn run_external(
    _world: &World,
    _service: &IngestService,
    _cfgs: Vec<NodeConfig>,
    _url: &str,
    _clock: &SimClock,
    _end_t: f64,
) -> Result<Vec<Result<NodeLog, NodeError>>, CliError> {
    Err(CliError::Usage("--broker needs a build with the `mqtt` feature".into()))
}

fn write_node_log(dir: &Path, sensor_id: &str, log: &NodeLog) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let mut sessions = String::from(
        "session_id,trigger_t,start_t,trigger_type,ship_present,berthing,detection_timed_out,duration_s,rows,packets_sent,packets_failed\n",
    );
    for s in &log.sessions {
        let _ = writeln!(
            sessions,
            "{},{:.3},{:.3},{},{},{},{},{},{},{},{}",
            s.session_id,
            s.trigger_t,
            s.start_t,
            s.trigger_kind.as_str(),
            s.ship_present,
            s.berthing,
            s.detection_timed_out,
            s.duration_s,
            s.row_count,
            s.packets_sent,
            s.packets_failed
        );
    }
    fs::write(dir.join(format!("sensor{sensor_id}_sessions.csv")), sessions)?;
    let mut events = String::from("t,kind,decision\n");
    for e in &log.events {
        let _ = writeln!(events, "{:.3},{},{:?}", e.event.t, e.event.kind.as_str(), e.decision);
    }
    fs::write(dir.join(format!("sensor{sensor_id}_events.csv")), events)?;
    let mut states = String::from("t,state\n");
    for tr in &log.transitions {
        let _ = writeln!(states, "{:.3},{:?}", tr.t, tr.state);
    }
    fs::write(dir.join(format!("sensor{sensor_id}_states.csv")), states)?;
    Ok(())
}

#[derive(Serialize)]
struct RunSummary<'a> {
    seed: u64,
    duration_s: f64,
    sensors: usize,
    loss_rate: f64,
    duplicate_rate: f64,
    bulk_upload: bool,
    packets: u64,
    duplicate_packets: u64,
    info_records: u64,
    bulk_uploads: u64,
    malformed: u64,
    detections: u64,
    sessions: Vec<usize>,
    pending_uploads: Vec<usize>,
    broker: Option<&'a str>,
}

fn write_run_summary(
    out: &Path,
    world: &World,
    opts: &RunOptions,
    stats: &IngestStats,
    logs: &[NodeLog],
) -> Result<(), CliError> {
    let summary = RunSummary {
        seed: world.scenario().seed,
        duration_s: world.scenario().duration_s,
        sensors: opts.sensors,
        loss_rate: opts.loss_rate,
        duplicate_rate: opts.duplicate_rate,
        bulk_upload: opts.bulk_upload,
        packets: stats.packets,
        duplicate_packets: stats.duplicate_packets,
        info_records: stats.info_records,
        bulk_uploads: stats.bulk_uploads,
        malformed: stats.malformed,
        detections: stats.detections,
        sessions: logs.iter().map(|l| l.sessions.len()).collect(),
        pending_uploads: logs.iter().map(|l| l.pending_uploads).collect(),
        broker: opts.broker.as_deref(),
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Output(e.to_string()))?;
    fs::write(out.join(RUN_SUMMARY_FILE), json + "\n")?;
    Ok(())
}

/// Analyzes one sensor of a stored run and writes the report into `out`.
pub fn cmd_analyze(store_dir: &Path, sensor_id: &str, out: &Path) -> Result<AnalysisReport, CliError> {
    if !store_dir.is_dir() {
        return Err(CliError::Usage(format!("no store at {}", store_dir.display())));
    }
    let store = SeriesStore::open(store_dir)?;
    let report = AnalysisReport::build(&store, sensor_id);
    report.write(out)?;
    Ok(report)
}

/// Reads a detector noise model: a JSON file, or one of `perfect`,
/// `calibrated`, `all-miss`.
pub fn load_noise(source: &str) -> Result<DetectorNoise, CliError> {
    let noise = match source {
        "perfect" => DetectorNoise::perfect(),
        "calibrated" => DetectorNoise::calibrated(),
        "all-miss" => DetectorNoise::all_miss(),
        path => {
            let text = fs::read_to_string(path)?;
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{path}: {e}")))?
        }
    };
    noise.validate()?;
    Ok(noise)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub scenes: usize,
    pub ground_truth: usize,
    pub detections: usize,
    pub ap: f64,
    pub sweep: Vec<PrPoint>,
}

impl EvalReport {
    pub fn sweep_csv(&self) -> String {
        let mut out = String::from("threshold,precision,recall\n");
        for p in &self.sweep {
            let _ = writeln!(out, "{:.2},{:.6},{:.6}", p.threshold, p.precision, p.recall);
        }
        out
    }
}

pub const IOU_THRESHOLD: f64 = 0.5;

/// Score thresholds of the PR sweep: 0.00 to 1.00 in steps of 0.05.
pub fn sweep_thresholds() -> Vec<f64> {
    (0..=20).map(|i| i as f64 * 0.05).collect()
}

/// Runs the simulated detector over a dataset and scores it at IoU 0.5.
/// Each scene gets its own RNG stream keyed by `seed` and the scene id.
pub fn evaluate_detection(dataset: &Path, noise: &DetectorNoise, seed: u64) -> Result<EvalReport, CliError> {
    let scenes = load_dataset(dataset)?;
    if scenes.is_empty() {
        return Err(CliError::Usage(format!("dataset {} is empty", dataset.display())));
    }
    let evals = scenes
        .iter()
        .map(|s| {
            Ok(SceneEval {
                scene_id: s.scene_id.clone(),
                detections: detect(s, noise, mix_seed(&[seed, fnv1a(s.scene_id.as_bytes())])),
                ground_truth: s.ground_truth()?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(EvalReport {
        scenes: evals.len(),
        ground_truth: evals.iter().map(|e| e.ground_truth.len()).sum(),
        detections: evals.iter().map(|e| e.detections.len()).sum(),
        ap: average_precision(&evals, IOU_THRESHOLD)?,
        sweep: pr_sweep(&evals, &sweep_thresholds(), IOU_THRESHOLD)?,
    })
}

/// [`evaluate_detection`] plus the PR-sweep CSV written into `out`.
pub fn cmd_eval_detection(
    dataset: &Path,
    noise: &DetectorNoise,
    seed: u64,
    out: &Path,
) -> Result<EvalReport, CliError> {
    let report = evaluate_detection(dataset, noise, seed)?;
    fs::create_dir_all(out)?;
    fs::write(out.join(PR_SWEEP_FILE), report.sweep_csv())?;
    Ok(report)
}

/// Writes the built-in 24-scene test set.
pub fn cmd_export_dataset(out: &Path) -> Result<PathBuf, CliError> {
    save_dataset(out, &bundled_test_scenes())?;
    Ok(out.to_path_buf())
}
