use std::f64::consts::PI;

use portmon_core::dsp::{
    estimate_tilt, lowpass_tilt, noise_rmse, AccelFrame, AcquisitionChain, ChainConfig, FirDecimator, TiltSample,
};
use proptest::prelude::*;

fn fir() -> portmon_core::FirSpec {
    ChainConfig::default().design().unwrap()
}

fn frames(xs: &[f64]) -> Vec<AccelFrame<f64>> {
    xs.iter().enumerate().map(|(i, &x)| AccelFrame::new(i as f64 / 1000.0, x, -x, 0.5 * x)).collect()
}

#[test]
fn impulse_response_peaks_at_group_delay() {
    let design = fir();
    let mut dec = FirDecimator::new(&design, 1).unwrap();
    let mut xs = vec![0.0; 200];
    xs[0] = 1.0;
    let out: Vec<f64> = dec.process(frames(&xs)).iter().map(|f| f.ax).collect();
    // the impulse response is the tap vector itself
    assert_eq!(&out[..128], &design.coefficients[..]);
    let peak = out.iter().cloned().fold(f64::MIN, f64::max);
    let at: Vec<usize> = (0..out.len()).filter(|&i| out[i] == peak).collect();
    // even length: the two centre taps tie around delay 63.5
    assert_eq!(at, vec![63, 64]);
    assert_eq!(design.group_delay(), 63.5);
}

/// Amplitude of the steady-state response to a unit sinusoid, by projecting
/// whole periods of the output onto sin and cos.
fn fir_gain(freq: f64) -> f64 {
    let mut dec = FirDecimator::new(&fir(), 1).unwrap();
    let xs: Vec<f64> = (0..5000).map(|i| (2.0 * PI * freq * i as f64 / 1000.0).sin()).collect();
    let out = dec.process(frames(&xs));
    let (mut s, mut c) = (0.0, 0.0);
    for (i, f) in out.iter().enumerate().skip(1000) {
        let w = 2.0 * PI * freq * i as f64 / 1000.0;
        s += f.ax * w.sin();
        c += f.ax * w.cos();
    }
    let n = (out.len() - 1000) as f64;
    2.0 * s.hypot(c) / n
}

#[test]
fn passband_and_stopband_by_simulation() {
    assert!((fir_gain(5.0) - 1.0).abs() < 1e-3);
    assert!((fir_gain(50.0) - 1.0).abs() < 1e-2, "50 Hz gain {}", fir_gain(50.0));
    for f in [200.0, 250.0, 333.0, 450.0] {
        assert!(fir_gain(f) < 1e-3, "{f} Hz gain {}", fir_gain(f));
    }
}

#[test]
fn f32_chain_tracks_f64() {
    let cfg = ChainConfig::default();
    let mut a = AcquisitionChain::<f64>::new(&cfg).unwrap();
    let mut b = AcquisitionChain::<f32>::new(&cfg).unwrap();
    for i in 0..5000 {
        let t = i as f64 / 1000.0;
        let x = 0.01 * (2.0 * PI * 3.0 * t).sin();
        let fa = a.push(AccelFrame::new(t, x, 0.02, 1.0));
        let fb = b.push(AccelFrame::new(t, x as f32, 0.02, 1.0));
        assert_eq!(fa.is_some(), fb.is_some());
        if let (Some(sa), Some(sb)) = (fa, fb) {
            assert!((sa.frame.ax - sb.frame.ax as f64).abs() < 1e-5);
            assert!((sa.tilt.roll_deg - sb.tilt.roll_deg as f64).abs() < 1e-3);
        }
    }
}

fn lp_gain(freq: f64) -> f64 {
    let n = ((40.0 / freq.min(1.0)) * 100.0) as usize + 2000;
    let input: Vec<TiltSample<f64>> = (0..n)
        .map(|i| {
            let v = (2.0 * PI * freq * i as f64 / 100.0).sin();
            TiltSample { t: i as f64 / 100.0, pitch_deg: v, roll_deg: 0.0 }
        })
        .collect();
    let out = lowpass_tilt(&input, 1.0, 100.0).unwrap();
    out[n / 2..].iter().map(|s| s.pitch_deg.abs()).fold(0.0, f64::max)
}

#[test]
fn lowpass_response() {
    assert!(lp_gain(10.0) <= 0.16, "10 Hz gain {}", lp_gain(10.0));
    assert!(lp_gain(0.01) >= 0.99, "0.01 Hz gain {}", lp_gain(0.01));
    // analytic first-order magnitude at the corner
    let corner = lp_gain(1.0);
    assert!((corner - 1.0 / 2f64.sqrt()).abs() < 0.03, "1 Hz gain {corner}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decimator_is_chunking_invariant(
        xs in prop::collection::vec(-1.0f64..1.0, 1..600),
        cut in 0usize..600,
        factor in 1usize..16,
    ) {
        let design = fir();
        let input = frames(&xs);
        let whole = FirDecimator::new(&design, factor).unwrap().process(input.clone());
        let cut = cut.min(input.len());
        let mut dec = FirDecimator::new(&design, factor).unwrap();
        let mut split = dec.process(input[..cut].iter().copied());
        split.extend(dec.process(input[cut..].iter().copied()));
        prop_assert_eq!(whole.len(), xs.len() / factor);
        prop_assert_eq!(whole, split);
    }

    #[test]
    fn decimator_is_linear(
        xs in prop::collection::vec(-1.0f64..1.0, 200),
        ys in prop::collection::vec(-1.0f64..1.0, 200),
        a in -3.0f64..3.0,
    ) {
        let design = fir();
        let run = |v: &[f64]| FirDecimator::new(&design, 10).unwrap().process(frames(v));
        let mix: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| a * x + y).collect();
        let (fx, fy, fm) = (run(&xs), run(&ys), run(&mix));
        for i in 0..fm.len() {
            prop_assert!((fm[i].ax - (a * fx[i].ax + fy[i].ax)).abs() < 1e-12);
        }
    }

    #[test]
    fn tilt_recovers_rotations(roll in -60.0f64..60.0, pitch in -60.0f64..60.0) {
        // gravity after rotating the sensor by roll about x, then pitch about y
        let (r, p) = (roll.to_radians(), pitch.to_radians());
        let g = [p.sin(), p.cos() * r.sin(), p.cos() * r.cos()];
        let s = estimate_tilt(&AccelFrame::new(0.0, g[0], g[1], g[2])).unwrap();
        prop_assert!((s.pitch_deg - pitch).abs() < 1e-9);
        // roll in this convention is asin(ay), i.e. measured against the full vector
        let want_roll = (p.cos() * r.sin()).asin().to_degrees();
        prop_assert!((s.roll_deg - want_roll).abs() < 1e-9);
    }

    #[test]
    fn tilt_is_scale_invariant(
        v in prop::array::uniform3(-1.0f64..1.0),
        k in 1e-3f64..1e3,
    ) {
        prop_assume!(v.iter().map(|c| c.abs()).sum::<f64>() > 1e-3);
        let a = estimate_tilt(&AccelFrame::new(0.0, v[0], v[1], v[2])).unwrap();
        let b = estimate_tilt(&AccelFrame::new(0.0, k * v[0], k * v[1], k * v[2])).unwrap();
        prop_assert!((a.pitch_deg - b.pitch_deg).abs() < 1e-9);
        prop_assert!((a.roll_deg - b.roll_deg).abs() < 1e-9);
    }

    #[test]
    fn lowpass_is_linear(
        xs in prop::collection::vec(-1.0f64..1.0, 2..300),
        a in -5.0f64..5.0,
        c in -5.0f64..5.0,
    ) {
        let mk = |f: &dyn Fn(f64) -> f64| -> Vec<TiltSample<f64>> {
            xs.iter().enumerate().map(|(i, &x)| TiltSample { t: i as f64 / 100.0, pitch_deg: f(x), roll_deg: 0.0 }).collect()
        };
        let base = lowpass_tilt(&mk(&|x| x), 1.0, 100.0).unwrap();
        let scaled = lowpass_tilt(&mk(&|x| a * x + c), 1.0, 100.0).unwrap();
        for (s, b) in scaled.iter().zip(&base) {
            prop_assert!((s.pitch_deg - (a * b.pitch_deg + c)).abs() < 1e-9);
        }
    }

    #[test]
    fn rmse_ignores_offsets(xs in prop::collection::vec(-1.0f64..1.0, 2..500), c in -1e3f64..1e3) {
        let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
        let a = noise_rmse(&xs).unwrap().rmse;
        let b = noise_rmse(&shifted).unwrap().rmse;
        prop_assert!((a - b).abs() < 1e-9 * (1.0 + c.abs()));
        prop_assert!(a >= 0.0);
    }
}
