use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ConfigSnapshot, IngestError};
use crate::detection::BerthingGate;
use crate::trigger::TriggerConfig;

/// Remotely adjustable parameters.
pub const CONFIG_KEYS: [&str; 12] = [
    "schedule_period_s",
    "sensing_s_noship",
    "sensing_s_ship",
    "distance_threshold_m",
    "rearm_margin_m",
    "cooldown_s",
    "gate_roi_x_min",
    "gate_roi_y_min",
    "gate_roi_x_max",
    "gate_roi_y_max",
    "gate_area_min_frac",
    "gate_area_max_frac",
];

const CONFIG_LOG: &str = "config.log";
const VERDICT_LOG: &str = "verdicts.log";

/// Overlays the trigger keys of `params` on `base`.
pub fn apply_trigger_params(base: &TriggerConfig, params: &BTreeMap<String, f64>) -> TriggerConfig {
    let mut c = *base;
    for (k, &v) in params {
        match k.as_str() {
            "schedule_period_s" => c.schedule_period_s = v,
            "sensing_s_noship" => c.sensing_s_noship = v,
            "sensing_s_ship" => c.sensing_s_ship = v,
            "distance_threshold_m" => c.distance_threshold_m = v,
            "rearm_margin_m" => c.rearm_margin_m = v,
            "cooldown_s" => c.cooldown_s = v,
            _ => {}
        }
    }
    c
}

/// Builds the berthing gate for a frame from the `gate_*` keys, defaulting to
/// the central 80% x lower 70% region and area fraction in [0.05, 0.9].
pub fn gate_from_params(
    params: &BTreeMap<String, f64>,
    width: f64,
    height: f64,
) -> Result<BerthingGate<f64>, IngestError> {
    let get = |k: &str, d: f64| params.get(k).copied().unwrap_or(d);
    let roi = [
        get("gate_roi_x_min", 0.1),
        get("gate_roi_y_min", 0.3),
        get("gate_roi_x_max", 0.9),
        get("gate_roi_y_max", 1.0),
    ];
    Ok(BerthingGate::from_fractions(
        width,
        height,
        roi,
        get("gate_area_min_frac", 0.05),
        get("gate_area_max_frac", 0.9),
    )?)
}

/// A detection verdict kept for audit. Recording one does not bump the config version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub sensor_id: String,
    pub session_id: String,
    pub ship_present: bool,
    pub berthing: bool,
}

#[derive(Serialize, Deserialize)]
struct SetEntry {
    sensor_id: String,
    updates: BTreeMap<String, f64>,
}

#[derive(Debug)]
struct SensorConfig {
    /// `history[v]` is the parameter map at version `v`; version 0 is empty.
    history: Vec<BTreeMap<String, f64>>,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self { history: vec![BTreeMap::new()] }
    }
}

impl SensorConfig {
    fn version(&self) -> u64 {
        (self.history.len() - 1) as u64
    }

    fn current(&self) -> &BTreeMap<String, f64> {
        self.history.last().expect("version 0 always present")
    }
}

/// Per-sensor versioned parameter maps, optionally persisted as an append-only log.
#[derive(Debug, Default)]
pub struct ConfigStore {
    sensors: Mutex<BTreeMap<String, SensorConfig>>,
    verdicts: Mutex<Vec<VerdictRecord>>,
    dir: Option<PathBuf>,
}

fn validate_value(key: &str, v: f64) -> Result<(), IngestError> {
    let ok = v.is_finite()
        && match key {
            "rearm_margin_m" | "cooldown_s" => v >= 0.0,
            k if k.starts_with("gate_") => (0.0..=1.0).contains(&v),
            _ => v > 0.0,
        };
    if ok {
        Ok(())
    } else {
        Err(IngestError::InvalidValue { key: key.to_string(), value: v })
    }
}

impl ConfigStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (and replays) a store persisted under `dir`.
    pub fn open(dir: &Path) -> Result<Self, IngestError> {
        fs::create_dir_all(dir)?;
        let store = Self { dir: Some(dir.to_path_buf()), ..Self::default() };
        if let Ok(f) = File::open(dir.join(CONFIG_LOG)) {
            for line in BufReader::new(f).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let e: SetEntry = serde_json::from_str(&line).map_err(|e| IngestError::Io(e.to_string()))?;
                store.apply(&e.sensor_id, &e.updates)?;
            }
        }
        if let Ok(f) = File::open(dir.join(VERDICT_LOG)) {
            let mut v = store.verdicts.lock().expect("verdict lock");
            for line in BufReader::new(f).lines() {
                let line = line?;
                if !line.trim().is_empty() {
                    v.push(serde_json::from_str(&line).map_err(|e| IngestError::Io(e.to_string()))?);
                }
            }
        }
        Ok(store)
    }

    fn append(&self, file: &str, line: &str) -> Result<(), IngestError> {
        if let Some(dir) = &self.dir {
            let mut f = OpenOptions::new().create(true).append(true).open(dir.join(file))?;
            writeln!(f, "{line}")?;
        }
        Ok(())
    }

    fn apply(&self, sensor_id: &str, updates: &BTreeMap<String, f64>) -> Result<u64, IngestError> {
        for (k, &v) in updates {
            if !CONFIG_KEYS.contains(&k.as_str()) {
                return Err(IngestError::UnknownKey(k.clone()));
            }
            validate_value(k, v)?;
        }
        let mut sensors = self.sensors.lock().expect("config lock");
        let entry = sensors.entry(sensor_id.to_string()).or_default();
        let mut next = entry.current().clone();
        next.extend(updates.iter().map(|(k, v)| (k.clone(), *v)));
        apply_trigger_params(&TriggerConfig::default(), &next)
            .validate()
            .map_err(|e| IngestError::Link(e.to_string()))?;
        gate_from_params(&next, 1.0, 1.0)?;
        entry.history.push(next);
        Ok(entry.version())
    }

    /// Applies `updates` atomically and returns the new version. Unknown keys or
    /// values that make the resulting config invalid are rejected and leave the
    /// version unchanged.
    pub fn set_config(&self, sensor_id: &str, updates: &BTreeMap<String, f64>) -> Result<u64, IngestError> {
        let v = self.apply(sensor_id, updates)?;
        let entry = SetEntry { sensor_id: sensor_id.to_string(), updates: updates.clone() };
        self.append(CONFIG_LOG, &serde_json::to_string(&entry).expect("entry serializes"))?;
        Ok(v)
    }

    /// Current parameters if their version is newer than `since_version`.
    pub fn get_config(&self, sensor_id: &str, since_version: u64) -> Option<ConfigSnapshot> {
        let sensors = self.sensors.lock().expect("config lock");
        let entry = sensors.get(sensor_id)?;
        (entry.version() > since_version)
            .then(|| ConfigSnapshot { version: entry.version(), params: entry.current().clone() })
    }

    pub fn version(&self, sensor_id: &str) -> u64 {
        self.sensors.lock().expect("config lock").get(sensor_id).map_or(0, SensorConfig::version)
    }

    /// Parameters exactly as they were at `version`.
    pub fn at_version(&self, sensor_id: &str, version: u64) -> Option<BTreeMap<String, f64>> {
        let sensors = self.sensors.lock().expect("config lock");
        match sensors.get(sensor_id) {
            Some(e) => e.history.get(version as usize).cloned(),
            None => (version == 0).then(BTreeMap::new),
        }
    }

    pub fn current(&self, sensor_id: &str) -> BTreeMap<String, f64> {
        self.at_version(sensor_id, self.version(sensor_id)).unwrap_or_default()
    }

    pub fn record_verdict(&self, verdict: VerdictRecord) -> Result<(), IngestError> {
        self.append(VERDICT_LOG, &serde_json::to_string(&verdict).expect("verdict serializes"))?;
        self.verdicts.lock().expect("verdict lock").push(verdict);
        Ok(())
    }

    pub fn verdicts(&self) -> Vec<VerdictRecord> {
        self.verdicts.lock().expect("verdict lock").clone()
    }
}
