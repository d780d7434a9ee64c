//! When to sense: a periodic schedule and a rangefinder threshold-crossing
//! detector, arbitrated against the node's busy state.

use serde::{Deserialize, Serialize};

/// Maximum range of the rangefinder.
pub const RANGEFINDER_MAX_M: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TriggerConfig {
    pub schedule_period_s: f64,
    pub distance_threshold_m: f64,
    pub rearm_margin_m: f64,
    pub cooldown_s: f64,
    pub sensing_s_noship: f64,
    pub sensing_s_ship: f64,
}

impl Default for TriggerConfig {
    fn default() -> Self {
        Self {
            schedule_period_s: 300.0,
            distance_threshold_m: 20.0,
            rearm_margin_m: 5.0,
            cooldown_s: 600.0,
            sensing_s_noship: 30.0,
            sensing_s_ship: 1200.0,
        }
    }
}

impl TriggerConfig {
    pub fn validate(&self) -> Result<(), TriggerError> {
        let positive = [
            ("schedule_period_s", self.schedule_period_s),
            ("distance_threshold_m", self.distance_threshold_m),
            ("sensing_s_noship", self.sensing_s_noship),
            ("sensing_s_ship", self.sensing_s_ship),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(TriggerError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("rearm_margin_m", self.rearm_margin_m), ("cooldown_s", self.cooldown_s)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(TriggerError::InvalidConfig(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.sensing_s_ship <= self.sensing_s_noship {
            return Err(TriggerError::InvalidConfig("sensing_s_ship must exceed sensing_s_noship".into()));
        }
        Ok(())
    }

    pub fn sensing_duration(&self, berthing: bool) -> f64 {
        if berthing {
            self.sensing_s_ship
        } else {
            self.sensing_s_noship
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceReading {
    pub t: f64,
    pub meters: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TriggerKind {
    Schedule,
    Rangefinder,
}

impl TriggerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TriggerKind::Schedule => "Schedule",
            TriggerKind::Rangefinder => "Rangefinder",
        }
    }
}

impl std::fmt::Display for TriggerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TriggerKind {
    type Err = TriggerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Schedule" => Ok(TriggerKind::Schedule),
            "Rangefinder" => Ok(TriggerKind::Rangefinder),
            other => Err(TriggerError::InvalidConfig(format!("unknown trigger kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriggerEvent {
    pub t: f64,
    pub kind: TriggerKind,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TriggerError {
    #[error("reading at t={t} is not after the previous reading at t={last}")]
    OutOfOrder { t: f64, last: f64 },
    #[error("invalid distance reading {0} m")]
    InvalidReading(f64),
    #[error("invalid trigger config: {0}")]
    InvalidConfig(String),
}

pub fn schedule_next(last_fire_t: f64, period_s: f64) -> f64 {
    last_fire_t + period_s
}

/// Periodic timer on the simulated clock.
#[derive(Debug, Clone)]
pub struct ScheduleTimer {
    last_fire_t: f64,
}

impl ScheduleTimer {
    /// The first event fires one period after `start_t`.
    pub fn new(start_t: f64) -> Self {
        Self { last_fire_t: start_t }
    }

    pub fn next_fire(&self, period_s: f64) -> f64 {
        schedule_next(self.last_fire_t, period_s)
    }

    pub fn fire(&mut self, period_s: f64) -> TriggerEvent {
        self.last_fire_t = self.next_fire(period_s);
        TriggerEvent { t: self.last_fire_t, kind: TriggerKind::Schedule }
    }
}

/// Edge-triggered threshold detector with re-arm hysteresis.
///
/// Starts disarmed; the first reading above the threshold arms it. It fires on an
/// above → at-or-below transition while armed, then stays disarmed until a reading
/// exceeds `threshold + rearm_margin` at least `cooldown_s` after the last fire.
#[derive(Debug, Clone, Default)]
pub struct DistanceDetector {
    armed: bool,
    above: bool,
    last_t: Option<f64>,
    last_fire_t: Option<f64>,
}

impl DistanceDetector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_armed(&self) -> bool {
        self.armed
    }

    pub fn evaluate(
        &mut self,
        reading: DistanceReading,
        config: &TriggerConfig,
    ) -> Result<Option<TriggerEvent>, TriggerError> {
        if let Some(last) = self.last_t {
            if !(reading.t > last) {
                return Err(TriggerError::OutOfOrder { t: reading.t, last });
            }
        }
        if !(reading.meters >= 0.0 && reading.meters.is_finite()) {
            return Err(TriggerError::InvalidReading(reading.meters));
        }

        let threshold = config.distance_threshold_m;
        let d = reading.meters;
        let mut event = None;

        if self.armed {
            if self.above && d <= threshold {
                self.armed = false;
                self.last_fire_t = Some(reading.t);
                event = Some(TriggerEvent { t: reading.t, kind: TriggerKind::Rangefinder });
            }
        } else {
            self.armed = match self.last_fire_t {
                None => d > threshold,
                Some(fired) => d > threshold + config.rearm_margin_m && reading.t - fired >= config.cooldown_s,
            };
        }

        self.above = d > threshold;
        self.last_t = Some(reading.t);
        Ok(event)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arbitration {
    Accept,
    Suppress,
}

pub fn arbitrate(_event: &TriggerEvent, node_busy: bool) -> Arbitration {
    if node_busy {
        Arbitration::Suppress
    } else {
        Arbitration::Accept
    }
}
