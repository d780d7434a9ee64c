use super::NodeError;
use crate::telemetry::validate_sensor_id;
use crate::trigger::TriggerConfig;

/// Startup configuration of one node.
///
/// The file form is `key = value` per line; `#` starts a comment. Keys:
/// `sensor_id` (required), the trigger parameters (`schedule_period_s`,
/// `distance_threshold_m`, `rearm_margin_m`, `cooldown_s`, `sensing_s_noship`,
/// `sensing_s_ship`), `detection_timeout_s`, `bulk_upload` (true/false),
/// `broker_url`, `upload_url`, and `config_version`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeConfig {
    pub sensor_id: String,
    pub trigger: TriggerConfig,
    pub detection_timeout_s: f64,
    pub bulk_upload: bool,
    pub broker_url: Option<String>,
    pub upload_url: Option<String>,
    /// Last remote-config version applied.
    pub config_version: u64,
}

impl NodeConfig {
    pub fn new(sensor_id: impl Into<String>) -> Self {
        Self {
            sensor_id: sensor_id.into(),
            trigger: TriggerConfig::default(),
            detection_timeout_s: 10.0,
            bulk_upload: true,
            broker_url: None,
            upload_url: None,
            config_version: 0,
        }
    }

    pub fn validate(&self) -> Result<(), NodeError> {
        validate_sensor_id(&self.sensor_id).map_err(|e| NodeError::Config(e.to_string()))?;
        self.trigger.validate().map_err(|e| NodeError::Config(e.to_string()))?;
        if !(self.detection_timeout_s > 0.0) {
            return Err(NodeError::Config("detection_timeout_s must be positive".into()));
        }
        Ok(())
    }

    pub fn parse_kv(text: &str) -> Result<Self, NodeError> {
        let mut cfg = Self::new("");
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| NodeError::Config(format!("line {}: expected key = value", i + 1)))?;
            let num =
                || value.parse::<f64>().map_err(|_| NodeError::Config(format!("line {}: {key} needs a number", i + 1)));
            let t = &mut cfg.trigger;
            match key {
                "sensor_id" => cfg.sensor_id = value.to_string(),
                "schedule_period_s" => t.schedule_period_s = num()?,
                "distance_threshold_m" => t.distance_threshold_m = num()?,
                "rearm_margin_m" => t.rearm_margin_m = num()?,
                "cooldown_s" => t.cooldown_s = num()?,
                "sensing_s_noship" => t.sensing_s_noship = num()?,
                "sensing_s_ship" => t.sensing_s_ship = num()?,
                "detection_timeout_s" => cfg.detection_timeout_s = num()?,
                "bulk_upload" => {
                    cfg.bulk_upload = value
                        .parse()
                        .map_err(|_| NodeError::Config(format!("line {}: bulk_upload is true or false", i + 1)))?
                }
                "broker_url" => cfg.broker_url = Some(value.to_string()),
                "upload_url" => cfg.upload_url = Some(value.to_string()),
                "config_version" => {
                    cfg.config_version = value
                        .parse()
                        .map_err(|_| NodeError::Config(format!("line {}: config_version is an integer", i + 1)))?
                }
                other => return Err(NodeError::Config(format!("line {}: unknown key {other:?}", i + 1))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
