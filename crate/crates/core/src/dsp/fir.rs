use super::DspError;
use crate::Scalar;

/// A designed low-pass FIR filter.
#[derive(Debug, Clone, PartialEq)]
pub struct FirSpec<T> {
    pub num_taps: usize,
    pub cutoff_hz: T,
    pub sample_rate_hz: T,
    pub kaiser_beta: T,
    pub coefficients: Vec<T>,
}

impl<T: Scalar> FirSpec<T> {
    /// Group delay in input samples. Linear phase makes this constant.
    pub fn group_delay(&self) -> T {
        T::lit((self.num_taps - 1) as f64 / 2.0)
    }

    /// Coefficients as a plain-text column, one decimal per line.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.num_taps * 24);
        for c in &self.coefficients {
            out.push_str(&format!("{:.17e}\n", c.to_f64_lossy()));
        }
        out
    }
}

/// Kaiser window shape parameter for a target stopband attenuation in dB.
pub fn kaiser_beta<T: Scalar>(atten_db: T) -> T {
    let a = atten_db;
    if a > T::lit(50.0) {
        T::lit(0.1102) * (a - T::lit(8.7))
    } else if a >= T::lit(21.0) {
        let d = a - T::lit(21.0);
        T::lit(0.5842) * d.powf(T::lit(0.4)) + T::lit(0.07886) * d
    } else {
        T::zero()
    }
}

/// Zeroth-order modified Bessel function of the first kind, by power series.
pub fn bessel_i0<T: Scalar>(x: T) -> T {
    let half = x / T::lit(2.0);
    let mut term = T::one();
    let mut sum = T::one();
    let mut k = 1u32;
    loop {
        let r = half / T::lit(k as f64);
        term = term * r * r;
        sum = sum + term;
        if term <= sum * T::epsilon() {
            break;
        }
        k += 1;
        if k > 500 {
            break;
        }
    }
    sum
}

pub fn kaiser_window<T: Scalar>(len: usize, beta: T) -> Vec<T> {
    if len == 1 {
        return vec![T::one()];
    }
    let denom = bessel_i0(beta);
    let m = T::lit((len - 1) as f64);
    (0..len)
        .map(|n| {
            let r = T::lit(2.0 * n as f64) / m - T::one();
            let arg = (T::one() - r * r).max(T::zero()).sqrt();
            bessel_i0(beta * arg) / denom
        })
        .collect()
}

/// Windowed-sinc low-pass with a Kaiser window, normalized to unity DC gain.
pub fn design_kaiser_fir<T: Scalar>(
    num_taps: usize,
    cutoff_hz: T,
    sample_rate_hz: T,
    stopband_atten_db: T,
) -> Result<FirSpec<T>, DspError> {
    if num_taps == 0 {
        return Err(DspError::ZeroTaps);
    }
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

    let beta = kaiser_beta(stopband_atten_db);
    let window = kaiser_window(num_taps, beta);
    // normalized cutoff in cycles/sample
    let fc = cutoff_hz / sample_rate_hz;
    let two_fc = T::lit(2.0) * fc;
    let center = T::lit((num_taps - 1) as f64 / 2.0);

    let mut coefficients = vec![T::zero(); num_taps];
    // Mirror the lower half: taps are exactly symmetric.
    for n in 0..num_taps.div_ceil(2) {
        let x = T::lit(n as f64) - center;
        let sinc = if x == T::zero() { two_fc } else { (T::PI() * two_fc * x).sin() / (T::PI() * x) };
        let tap = sinc * window[n];
        coefficients[n] = tap;
        coefficients[num_taps - 1 - n] = tap;
    }

    let sum: T = coefficients.iter().copied().sum();
    for c in &mut coefficients {
        *c = *c / sum;
    }

    Ok(FirSpec { num_taps, cutoff_hz, sample_rate_hz, kaiser_beta: beta, coefficients })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_tap_is_unity() {
        let f = design_kaiser_fir(1, 110.0, 1000.0, 60.0).unwrap();
        assert_eq!(f.coefficients, vec![1.0]);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert_eq!(design_kaiser_fir(0, 110.0, 1000.0, 60.0), Err(DspError::ZeroTaps));
        assert!(matches!(design_kaiser_fir(128, 500.0, 1000.0, 60.0), Err(DspError::InvalidCutoff { .. })));
        assert!(matches!(design_kaiser_fir(128, 0.0, 1000.0, 60.0), Err(DspError::InvalidCutoff { .. })));
        assert!(matches!(design_kaiser_fir(128, -3.0, 1000.0, 60.0), Err(DspError::InvalidCutoff { .. })));
    }

    #[test]
    fn beta_matches_kaiser_formula() {
        assert!((kaiser_beta(60.0_f64) - 0.1102 * 51.3).abs() < 1e-12);
        assert!((kaiser_beta(30.0_f64) - (0.5842 * 9f64.powf(0.4) + 0.07886 * 9.0)).abs() < 1e-12);
        assert_eq!(kaiser_beta(10.0_f64), 0.0);
    }

    #[test]
    fn bessel_known_values() {
        // I0(1) and I0(5) from Abramowitz & Stegun tables
        assert!((bessel_i0(1.0_f64) - 1.266_065_877_752_008_4).abs() < 1e-14);
        assert!((bessel_i0(5.0_f64) - 27.239_871_823_604_442).abs() < 1e-11);
        assert_eq!(bessel_i0(0.0_f64), 1.0);
    }

    #[test]
    fn acquisition_filter_is_symmetric_with_unity_gain() {
        let f = design_kaiser_fir(128, 110.0_f64, 1000.0, 60.0).unwrap();
        assert_eq!(f.coefficients.len(), 128);
        let sum: f64 = f.coefficients.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        for i in 0..64 {
            assert_eq!(f.coefficients[i], f.coefficients[127 - i]);
        }
        assert_eq!(f.group_delay(), 63.5);
        assert_eq!(f.to_text().lines().count(), 128);
    }

    #[test]
    fn f32_design_is_usable() {
        let f = design_kaiser_fir(128, 110.0_f32, 1000.0, 60.0).unwrap();
        let sum: f32 = f.coefficients.iter().sum();
        assert!((sum - 1.0).abs() < 1e-5);
    }
}
