//! Streaming signal processing for the acceleration channel: Kaiser FIR design,
//! filter-and-decimate, tilt estimation, tilt smoothing, and noise statistics.
//!
//! Every operator here is a single-consumer stream processor. Instances share no
//! state and can run on different threads for different streams.

mod chain;
mod decimate;
mod fir;
mod lowpass;
mod stats;
mod tilt;

pub use chain::{AcquisitionChain, ChainConfig, ChainSample};
pub use decimate::{filter_decimate, FirDecimator};
pub use fir::{bessel_i0, design_kaiser_fir, kaiser_beta, kaiser_window, FirSpec};
pub use lowpass::{lowpass_tilt, TiltLowpass};
pub use stats::{noise_rmse, NoiseStats};
pub use tilt::{estimate_tilt, TiltSample};

use crate::Scalar;

/// One timestamped tri-axial acceleration sample, in g.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccelFrame<T> {
    /// Seconds on the simulated clock.
    pub t: f64,
    pub ax: T,
    pub ay: T,
    pub az: T,
}

impl<T: Scalar> AccelFrame<T> {
    pub fn new(t: f64, ax: T, ay: T, az: T) -> Self {
        Self { t, ax, ay, az }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.ax.is_finite() && self.ay.is_finite() && self.az.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DspError {
    #[error("cutoff {cutoff_hz} Hz must lie in (0, {nyquist_hz}) Hz")]
    InvalidCutoff { cutoff_hz: f64, nyquist_hz: f64 },
    #[error("filter needs at least one tap")]
    ZeroTaps,
    #[error("decimation factor must be at least 1")]
    ZeroFactor,
    #[error("orientation undefined for an all-zero acceleration vector")]
    ZeroVector,
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample rate must be positive, got {0}")]
    InvalidSampleRate(f64),
}
