use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::detection::DetectorNoise;
use crate::dsp::ChainConfig;
use crate::trigger::{TriggerConfig, RANGEFINDER_MAX_M};

/// One ship visit. The ship appears at `start_m`, closes at `speed_mps` to
/// `berth_m`, stays there until `departs_t`, then backs out at the same speed.
/// A passing ship follows the same distance profile (its `berth_m` is the
/// closest point of approach) but stays in the far lane of the camera frame
/// and never counts as berthing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShipEvent {
    pub appear_t: f64,
    pub start_m: f64,
    pub speed_mps: f64,
    pub berth_m: f64,
    pub impact_t: f64,
    #[serde(default)]
    pub impact_amp_mg: [f64; 3],
    #[serde(default = "default_impact_freq")]
    pub impact_freq_hz: f64,
    #[serde(default = "default_impact_decay")]
    pub impact_decay_s: f64,
    pub departs_t: f64,
    #[serde(default)]
    pub passing: bool,
}

fn default_impact_freq() -> f64 {
    2.0
}

fn default_impact_decay() -> f64 {
    5.0
}

impl ShipEvent {
    /// When the ship reaches `berth_m`.
    pub fn berthed_t(&self) -> f64 {
        self.appear_t + (self.start_m - self.berth_m) / self.speed_mps
    }

    /// When the departing ship passes out of rangefinder range.
    pub fn gone_t(&self) -> f64 {
        self.departs_t + (RANGEFINDER_MAX_M - self.berth_m) / self.speed_mps
    }

    pub fn validate(&self) -> Result<(), String> {
        let finite = [
            self.appear_t,
            self.start_m,
            self.speed_mps,
            self.berth_m,
            self.impact_t,
            self.impact_freq_hz,
            self.impact_decay_s,
            self.departs_t,
        ]
        .iter()
        .chain(self.impact_amp_mg.iter())
        .all(|v| v.is_finite());
        if !finite {
            return Err("non-finite field".into());
        }
        if !(self.start_m <= RANGEFINDER_MAX_M) {
            return Err(format!("start_m {} beyond the {RANGEFINDER_MAX_M} m range", self.start_m));
        }
        if !(self.berth_m > 0.0 && self.start_m > self.berth_m) {
            return Err(format!("need start_m > berth_m > 0, got {} and {}", self.start_m, self.berth_m));
        }
        if !(self.speed_mps > 0.0) {
            return Err("speed_mps must be positive".into());
        }
        if !(self.appear_t >= 0.0 && self.appear_t < self.impact_t && self.impact_t < self.departs_t) {
            return Err(format!(
                "need 0 <= appear_t < impact_t < departs_t, got {}, {}, {}",
                self.appear_t, self.impact_t, self.departs_t
            ));
        }
        if self.berthed_t() > self.departs_t {
            return Err(format!(
                "ship reaches its berth at {:.1} s, after departs_t {}",
                self.berthed_t(),
                self.departs_t
            ));
        }
        if !(self.impact_freq_hz > 0.0 && self.impact_decay_s > 0.0) {
            return Err("impact frequency and decay must be positive".into());
        }
        if self.impact_amp_mg.iter().any(|a| *a < 0.0) {
            return Err("impact amplitudes must be non-negative".into());
        }
        Ok(())
    }
}

/// `mean_c + amplitude_c * sin(2 pi t / period_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TemperatureModel {
    pub mean_c: f64,
    pub amplitude_c: f64,
    pub period_s: f64,
}

impl Default for TemperatureModel {
    fn default() -> Self {
        Self { mean_c: 24.0, amplitude_c: 6.0, period_s: 86_400.0 }
    }
}

/// Temperature-driven tilt: pitch follows `T - mean`, roll moves opposite to
/// temperature above the knee.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TiltDrift {
    pub pitch_coeff_deg_per_c: f64,
    pub roll_coeff_deg_per_c: f64,
    pub roll_knee_c: f64,
}

impl Default for TiltDrift {
    /// With the default temperature (24 +/- 6 C) this spans 0.0798 deg of pitch
    /// and 0.0416 deg of roll.
    fn default() -> Self {
        Self { pitch_coeff_deg_per_c: 0.0798 / 12.0, roll_coeff_deg_per_c: 0.0416 / 5.0, roll_knee_c: 25.0 }
    }
}

fn default_noise() -> f64 {
    0.003
}

fn default_final_approach() -> f64 {
    25.0
}

fn default_frame() -> f64 {
    1024.0
}

fn default_timeout() -> f64 {
    10.0
}

fn default_scene_interval() -> f64 {
    60.0
}

/// Declarative description of a simulated run. Loaded from JSON; every field
/// except `duration_s` has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub duration_s: f64,
    #[serde(default)]
    pub seed: u64,
    /// Post-chain acceleration noise floor per axis, mg.
    #[serde(default = "default_noise")]
    pub noise_rmse_target_mg: f64,
    #[serde(default)]
    pub ship_events: Vec<ShipEvent>,
    #[serde(default)]
    pub temperature: TemperatureModel,
    #[serde(default)]
    pub tilt_drift: TiltDrift,
    /// A non-passing approaching ship closer than this counts as berthing.
    #[serde(default = "default_final_approach")]
    pub final_approach_m: f64,
    #[serde(default = "default_frame")]
    pub frame_width: f64,
    #[serde(default = "default_frame")]
    pub frame_height: f64,
    #[serde(default)]
    pub trigger: TriggerConfig,
    #[serde(default = "DetectorNoise::perfect")]
    pub detector: DetectorNoise,
    #[serde(default = "default_timeout")]
    pub detection_timeout_s: f64,
    #[serde(default)]
    pub chain: ChainConfig,
    /// Simulated seconds per wall second; absent runs unpaced.
    #[serde(default)]
    pub time_compression: Option<f64>,
    /// Spacing of scene snapshots in the ground-truth log.
    #[serde(default = "default_scene_interval")]
    pub scene_interval_s: f64,
}

impl Scenario {
    pub fn new(duration_s: f64) -> Self {
        Self {
            duration_s,
            seed: 0,
            noise_rmse_target_mg: default_noise(),
            ship_events: Vec::new(),
            temperature: TemperatureModel::default(),
            tilt_drift: TiltDrift::default(),
            final_approach_m: default_final_approach(),
            frame_width: default_frame(),
            frame_height: default_frame(),
            trigger: TriggerConfig::default(),
            detector: DetectorNoise::perfect(),
            detection_timeout_s: default_timeout(),
            chain: ChainConfig::default(),
            time_compression: None,
            scene_interval_s: default_scene_interval(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidScenario(m));
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad(format!("duration_s must be positive, got {}", self.duration_s));
        }
        if !(self.noise_rmse_target_mg > 0.0 && self.noise_rmse_target_mg.is_finite()) {
            return bad(format!("noise_rmse_target_mg must be positive, got {}", self.noise_rmse_target_mg));
        }
        if !(self.frame_width > 0.0 && self.frame_height > 0.0) {
            return bad("frame size must be positive".into());
        }
        if !(self.final_approach_m > 0.0) {
            return bad("final_approach_m must be positive".into());
        }
        if !(self.temperature.period_s > 0.0 && self.temperature.amplitude_c >= 0.0) {
            return bad("temperature period must be positive and amplitude non-negative".into());
        }
        let d = &self.tilt_drift;
        if !(d.pitch_coeff_deg_per_c >= 0.0 && d.roll_coeff_deg_per_c >= 0.0 && d.roll_knee_c.is_finite()) {
            return bad("tilt drift coefficients must be non-negative magnitudes".into());
        }
        if !(self.detection_timeout_s > 0.0) {
            return bad("detection_timeout_s must be positive".into());
        }
        if !(self.scene_interval_s > 0.0) {
            return bad("scene_interval_s must be positive".into());
        }
        if let Some(c) = self.time_compression {
            if !(c > 0.0 && c.is_finite()) {
                return bad(format!("time_compression must be positive, got {c}"));
            }
        }
        self.trigger.validate().map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        self.detector.validate().map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        if self.chain.factor == 0 || self.chain.num_taps == 0 {
            return bad("chain factor and taps must be positive".into());
        }
        for (i, s) in self.ship_events.iter().enumerate() {
            s.validate().map_err(|m| SimError::InvalidScenario(format!("ship_events[{i}]: {m}")))?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let s: Self = serde_json::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Number of ships that berth (not passing).
    pub fn berthing_ships(&self) -> usize {
        self.ship_events.iter().filter(|s| !s.passing).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ship() -> ShipEvent {
        ShipEvent {
            appear_t: 100.0,
            start_m: 100.0,
            speed_mps: 1.0,
            berth_m: 10.0,
            impact_t: 195.0,
            impact_amp_mg: [1.0, 2.0, 3.0],
            impact_freq_hz: 2.0,
            impact_decay_s: 5.0,
            departs_t: 400.0,
            passing: false,
        }
    }

    #[test]
    fn minimal_json_gets_defaults() {
        let s = Scenario::from_json(r#"{"duration_s": 60}"#).unwrap();
        assert_eq!(s.noise_rmse_target_mg, 0.003);
        assert_eq!(s.trigger.schedule_period_s, 300.0);
        assert_eq!(s.detector, DetectorNoise::perfect());
        assert!(s.ship_events.is_empty());
    }

    #[test]
    fn rejects_zero_duration() {
        assert!(matches!(Scenario::from_json(r#"{"duration_s": 0}"#), Err(SimError::InvalidScenario(_))));
        assert!(matches!(Scenario::from_json("{"), Err(SimError::Parse(_))));
    }

    #[test]
    fn ship_validation() {
        assert!(ship().validate().is_ok());
        assert_eq!(ship().berthed_t(), 190.0);
        assert_eq!(ship().gone_t(), 490.0);
        let bad = ShipEvent { start_m: 120.0, ..ship() };
        assert!(bad.validate().is_err());
        let bad = ShipEvent { impact_t: 50.0, ..ship() };
        assert!(bad.validate().is_err());
        let bad = ShipEvent { departs_t: 180.0, impact_t: 150.0, ..ship() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn json_roundtrip() {
        let mut s = Scenario::new(600.0);
        s.ship_events.push(ship());
        let back = Scenario::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
    }
}
