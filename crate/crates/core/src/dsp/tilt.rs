use super::{AccelFrame, DspError};
use crate::Scalar;

/// Pitch and roll derived from the gravity direction, in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltSample<T> {
    pub t: f64,
    pub pitch_deg: T,
    pub roll_deg: T,
}

/// pitch = atan(ax / sqrt(ay² + az²)), roll = atan(ay / sqrt(ax² + az²)).
///
/// `atan2` with a non-negative second argument yields the same angle as the
/// ratio form and gives ±90° when the denominator vanishes.
pub fn estimate_tilt<T: Scalar>(frame: &AccelFrame<T>) -> Result<TiltSample<T>, DspError> {
    let (ax, ay, az) = (frame.ax, frame.ay, frame.az);
    if ax == T::zero() && ay == T::zero() && az == T::zero() {
        return Err(DspError::ZeroVector);
    }
    let pitch = ax.atan2(ay.hypot(az));
    let roll = ay.atan2(ax.hypot(az));
    Ok(TiltSample { t: frame.t, pitch_deg: pitch.to_degrees(), roll_deg: roll.to_degrees() })
}
