use super::{AccelFrame, DspError, FirSpec};
use crate::Scalar;

/// Streaming direct-form FIR filter followed by keep-every-`factor`-th decimation,
/// applied independently to each axis.
///
/// The delay line starts primed with zeros. Input sample `i` (0-based) is
/// retained when `(i + 1) % factor == 0`, so `N` inputs give `floor(N / factor)`
/// outputs. The filter is evaluated only at retained positions.
#[derive(Debug, Clone)]
pub struct FirDecimator<T> {
    taps: Vec<T>,
    factor: usize,
    // Each axis keeps a doubled ring so the newest `num_taps` samples are always
    // contiguous at `history[pos..pos + num_taps]`, newest first.
    history: [Vec<T>; 3],
    pos: usize,
    phase: usize,
}

impl<T: Scalar> FirDecimator<T> {
    pub fn new(fir: &FirSpec<T>, factor: usize) -> Result<Self, DspError> {
        if factor == 0 {
            return Err(DspError::ZeroFactor);
        }
        if fir.coefficients.is_empty() {
            return Err(DspError::ZeroTaps);
        }
        let n = fir.coefficients.len();
        Ok(Self {
            taps: fir.coefficients.clone(),
            factor,
            history: [vec![T::zero(); 2 * n], vec![T::zero(); 2 * n], vec![T::zero(); 2 * n]],
            pos: 0,
            phase: 0,
        })
    }

    pub fn factor(&self) -> usize {
        self.factor
    }

    pub fn reset(&mut self) {
        for h in &mut self.history {
            h.iter_mut().for_each(|v| *v = T::zero());
        }
        self.pos = 0;
        self.phase = 0;
    }

    /// Feeds one input frame, returning the filtered frame when this sample is retained.
    pub fn push(&mut self, frame: AccelFrame<T>) -> Option<AccelFrame<T>> {
        let n = self.taps.len();
        self.pos = if self.pos == 0 { n - 1 } else { self.pos - 1 };
        for (hist, v) in self.history.iter_mut().zip([frame.ax, frame.ay, frame.az]) {
            hist[self.pos] = v;
            hist[self.pos + n] = v;
        }

        self.phase += 1;
        if self.phase < self.factor {
            return None;
        }
        self.phase = 0;

        let [x, y, z] = &self.history;
        let window = self.pos..self.pos + n;
        Some(AccelFrame {
            t: frame.t,
            ax: dot(&self.taps, &x[window.clone()]),
            ay: dot(&self.taps, &y[window.clone()]),
            az: dot(&self.taps, &z[window]),
        })
    }

    pub fn process<I>(&mut self, input: I) -> Vec<AccelFrame<T>>
    where
        I: IntoIterator<Item = AccelFrame<T>>,
    {
        input.into_iter().filter_map(|f| self.push(f)).collect()
    }
}

#[inline]
fn dot<T: Scalar>(taps: &[T], samples: &[T]) -> T {
    taps.iter().zip(samples).fold(T::zero(), |acc, (&h, &x)| acc + h * x)
}

/// Filters and decimates a whole buffer with a fresh zero-primed decimator.
pub fn filter_decimate<T: Scalar>(
    input: &[AccelFrame<T>],
    fir: &FirSpec<T>,
    factor: usize,
) -> Result<Vec<AccelFrame<T>>, DspError> {
    let mut dec = FirDecimator::new(fir, factor)?;
    Ok(dec.process(input.iter().copied()))
}
