use serde::{Deserialize, Serialize};

use super::{design_kaiser_fir, estimate_tilt, AccelFrame, DspError, FirDecimator, FirSpec, TiltLowpass, TiltSample};
use crate::Scalar;

/// Parameters of the acquisition chain: 1 kHz input, Kaiser FIR, decimation, tilt LPF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    pub input_rate_hz: f64,
    pub num_taps: usize,
    pub cutoff_hz: f64,
    pub stopband_atten_db: f64,
    pub factor: usize,
    pub tilt_cutoff_hz: f64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            input_rate_hz: 1000.0,
            num_taps: 128,
            cutoff_hz: 110.0,
            stopband_atten_db: 60.0,
            factor: 10,
            tilt_cutoff_hz: 1.0,
        }
    }
}

impl ChainConfig {
    pub fn output_rate_hz(&self) -> f64 {
        self.input_rate_hz / self.factor as f64
    }

    /// Output rows whose FIR delay line still holds startup zeros are discarded by
    /// analysis; this is the conventional `num_taps` rows.
    pub fn warmup_rows(&self) -> usize {
        self.num_taps
    }

    pub fn design<T: Scalar>(&self) -> Result<FirSpec<T>, DspError> {
        design_kaiser_fir(
            self.num_taps,
            T::lit(self.cutoff_hz),
            T::lit(self.input_rate_hz),
            T::lit(self.stopband_atten_db),
        )
    }
}

/// One output-rate sample: the filtered acceleration and the smoothed tilt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainSample<T> {
    pub frame: AccelFrame<T>,
    pub tilt: TiltSample<T>,
}

/// Filter → decimate → tilt → tilt LPF, one sample at a time.
#[derive(Debug, Clone)]
pub struct AcquisitionChain<T> {
    decimator: FirDecimator<T>,
    lowpass: TiltLowpass<T>,
    last_tilt: Option<TiltSample<T>>,
}

impl<T: Scalar> AcquisitionChain<T> {
    pub fn new(cfg: &ChainConfig) -> Result<Self, DspError> {
        let fir = cfg.design::<T>()?;
        Self::with_fir(&fir, cfg.factor, T::lit(cfg.tilt_cutoff_hz))
    }

    pub fn with_fir(fir: &FirSpec<T>, factor: usize, tilt_cutoff_hz: T) -> Result<Self, DspError> {
        let decimator = FirDecimator::new(fir, factor)?;
        let out_rate = fir.sample_rate_hz / T::lit(factor as f64);
        let lowpass = TiltLowpass::new(tilt_cutoff_hz, out_rate)?;
        Ok(Self { decimator, lowpass, last_tilt: None })
    }

    pub fn reset(&mut self) {
        self.decimator.reset();
        self.lowpass.reset();
        self.last_tilt = None;
    }

    pub fn push(&mut self, frame: AccelFrame<T>) -> Option<ChainSample<T>> {
        let filtered = self.decimator.push(frame)?;
        let tilt = match estimate_tilt(&filtered) {
            Ok(raw) => self.lowpass.push(raw),
            // An exactly-zero filtered vector carries no orientation; hold the last estimate.
            Err(_) => {
                self.last_tilt.map_or(TiltSample { t: filtered.t, pitch_deg: T::zero(), roll_deg: T::zero() }, |s| {
                    TiltSample { t: filtered.t, ..s }
                })
            }
        };
        self.last_tilt = Some(tilt);
        Some(ChainSample { frame: filtered, tilt })
    }

    pub fn process<I>(&mut self, input: I) -> Vec<ChainSample<T>>
    where
        I: IntoIterator<Item = AccelFrame<T>>,
    {
        input.into_iter().filter_map(|f| self.push(f)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tilted_constant_input() {
        let a = 0.5_f64.to_radians();
        let input: Vec<_> = (0..10_000).map(|i| AccelFrame::new(i as f64 / 1000.0, a.sin(), 0.0, a.cos())).collect();
        let mut chain = AcquisitionChain::<f64>::new(&ChainConfig::default()).unwrap();
        let out = chain.process(input);
        assert_eq!(out.len(), 1000);
        // The leading FIR taps are negative, so the first rows point the wrong way;
        // the 1 Hz LPF needs ~20 time constants to forget that.
        for s in &out[500..] {
            assert!((s.tilt.pitch_deg - 0.5).abs() < 1e-9);
            assert!(s.tilt.roll_deg.abs() < 1e-12);
        }
    }

    #[test]
    fn zero_input_holds_tilt() {
        let mut chain = AcquisitionChain::<f64>::new(&ChainConfig::default()).unwrap();
        let out = chain.process((0..20).map(|i| AccelFrame::new(i as f64, 0.0, 0.0, 0.0)));
        assert_eq!(out.len(), 2);
        assert_eq!(out[1].tilt.pitch_deg, 0.0);
    }
}
