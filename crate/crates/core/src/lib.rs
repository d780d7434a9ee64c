//! Event-triggered port structure monitoring.
//!
//! A simulated port ([`sim`]) feeds edge nodes ([`node`]) that decide when to sense
//! ([`trigger`]), run the acceleration chain ([`dsp`]), and stream telemetry
//! ([`telemetry`]) to a cloud ingest service ([`ingest`]) which also hosts ship
//! detection and the berthing gate ([`detection`]).
//!
//! Numeric kernels are generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix the `f64` instantiation used by the node and server.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detection;
pub mod dsp;
pub mod ingest;
pub mod node;
mod scalar;
pub mod sim;
pub mod telemetry;
pub mod trigger;

pub use scalar::Scalar;

pub type AccelFrame = dsp::AccelFrame<f64>;
pub type TiltSample = dsp::TiltSample<f64>;
pub type FirSpec = dsp::FirSpec<f64>;
pub type NoiseStats = dsp::NoiseStats<f64>;
pub type AcquisitionChain = dsp::AcquisitionChain<f64>;
pub type BBox = detection::BBox<f64>;
pub type Detection = detection::Detection<f64>;
pub type BerthingGate = detection::BerthingGate<f64>;

/// Formats simulated seconds with the millisecond precision used on the wire.
pub fn fmt_time(t: f64) -> String {
    format!("{t:.3}")
}
