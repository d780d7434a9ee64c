use super::DspError;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseStats<T> {
    pub rmse: T,
    pub count: usize,
}

/// RMS of the mean-removed samples (population normalization).
pub fn noise_rmse<T: Scalar>(samples: &[T]) -> Result<NoiseStats<T>, DspError> {
    if samples.len() < 2 {
        return Err(DspError::TooFewSamples(samples.len()));
    }
    let n = T::lit(samples.len() as f64);
    let mean = samples.iter().copied().sum::<T>() / n;
    let ss: T = samples.iter().map(|&x| (x - mean) * (x - mean)).sum();
    Ok(NoiseStats { rmse: (ss / n).sqrt(), count: samples.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_has_zero_noise() {
        assert_eq!(noise_rmse(&[1.0, 1.0, 1.0, 1.0]).unwrap().rmse, 0.0);
    }

    #[test]
    fn square_wave() {
        let s = noise_rmse(&[1.0, -1.0, 1.0, -1.0]).unwrap();
        assert_eq!(s.rmse, 1.0);
        assert_eq!(s.count, 4);
    }

    #[test]
    fn too_few() {
        assert_eq!(noise_rmse::<f64>(&[1.0]), Err(DspError::TooFewSamples(1)));
        assert_eq!(noise_rmse::<f64>(&[]), Err(DspError::TooFewSamples(0)));
    }
}
