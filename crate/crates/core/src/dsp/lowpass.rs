use super::{DspError, TiltSample};
use crate::Scalar;

/// First-order recursive low-pass applied independently to pitch and roll.
///
/// `y[n] = y[n-1] + α (x[n] - y[n-1])` with `α = dt / (RC + dt)` and
/// `RC = 1 / (2π f_c)`. The state is seeded with the first input.
#[derive(Debug, Clone)]
pub struct TiltLowpass<T> {
    alpha: T,
    state: Option<(T, T)>,
}

impl<T: Scalar> TiltLowpass<T> {
    pub fn new(cutoff_hz: T, sample_rate_hz: T) -> Result<Self, DspError> {
        if !(sample_rate_hz > T::zero()) {
            return Err(DspError::InvalidSampleRate(sample_rate_hz.to_f64_lossy()));
        }
        let nyquist = sample_rate_hz / T::lit(2.0);
        if !(cutoff_hz > T::zero() && cutoff_hz < nyquist) {
            return Err(DspError::InvalidCutoff {
                cutoff_hz: cutoff_hz.to_f64_lossy(),
                nyquist_hz: nyquist.to_f64_lossy(),
            });
        }
        let dt = sample_rate_hz.recip();
        let rc = (T::lit(2.0) * T::PI() * cutoff_hz).recip();
        Ok(Self { alpha: dt / (rc + dt), state: None })
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn reset(&mut self) {
        self.state = None;
    }

    pub fn push(&mut self, s: TiltSample<T>) -> TiltSample<T> {
        let (p, r) = match self.state {
            None => (s.pitch_deg, s.roll_deg),
            Some((p, r)) => (p + self.alpha * (s.pitch_deg - p), r + self.alpha * (s.roll_deg - r)),
        };
        self.state = Some((p, r));
        TiltSample { t: s.t, pitch_deg: p, roll_deg: r }
    }
}

/// Smooths a whole tilt stream with a fresh filter.
pub fn lowpass_tilt<T: Scalar>(
    input: &[TiltSample<T>],
    cutoff_hz: T,
    sample_rate_hz: T,
) -> Result<Vec<TiltSample<T>>, DspError> {
    let mut lp = TiltLowpass::new(cutoff_hz, sample_rate_hz)?;
    Ok(input.iter().map(|&s| lp.push(s)).collect())
}
