//! The synthetic port: a declarative [`Scenario`] and the deterministic
//! generators ([`World`]) that feed nodes and provide ground truth.

mod clock;
mod scenario;
mod truth;
mod world;

pub use clock::SimClock;
pub use scenario::{Scenario, ShipEvent, TemperatureModel, TiltDrift};
pub use truth::{GroundTruthLog, SceneRecord, TemperatureRecord};
pub use world::{impact_unit_peak, ShipPhase, World, WorldScene};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for SimError {
    fn from(e: std::io::Error) -> Self {
        SimError::Io(e.to_string())
    }
}

/// Stable 64-bit FNV-1a, used to derive per-sensor seeds from string ids.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// SplitMix64 finalizer; mixes several words into one seed.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut z: u64 = 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        z = z.wrapping_add(p).wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
    }
    z
}
