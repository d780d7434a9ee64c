use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{fnv1a, mix_seed, Scenario, ShipEvent, SimError};
use crate::detection::{AnnotationScene, BBox, LabeledBox};
use crate::dsp::{noise_rmse, AccelFrame, AcquisitionChain, FirSpec};
use crate::telemetry::Row;
use crate::trigger::{DistanceReading, RANGEFINDER_MAX_M};

const CALIBRATION_TAG: u64 = 0xCA11_B0A7;
const CALIBRATION_SECONDS: u64 = 10;
/// Area fraction of a ship's box at its own berth (or closest-approach) distance.
const BERTH_AREA_FRACTION: f64 = 0.3;
const MAX_AREA_FRACTION: f64 = 0.9;
/// Boxes are twice as wide as tall, relative to the frame.
const BOX_ASPECT: f64 = 2.0;
/// Centroid of a ship in the berthing lane, as frame fractions.
const BERTH_LANE: (f64, f64) = (0.5, 0.62);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShipPhase {
    Approach,
    Moored,
    Departing,
}

/// A camera snapshot of the world with its ground-truth berthing flag.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldScene {
    pub t: f64,
    pub scene: AnnotationScene,
    pub berthing: bool,
}

/// Peak of `exp(-t/decay) * sin(2 pi f t)` for `t >= 0`.
pub fn impact_unit_peak(freq_hz: f64, decay_s: f64) -> f64 {
    let w = 2.0 * PI * freq_hz;
    let t_peak = (w * decay_s).atan() / w;
    (-t_peak / decay_s).exp() * (w * t_peak).sin()
}

/// Deterministic generators for everything a node can observe.
#[derive(Debug, Clone)]
pub struct World {
    scenario: Scenario,
    fir: FirSpec<f64>,
    sigma_g: f64,
    rate: u64,
}

impl World {
    /// Validates the scenario and calibrates the raw noise level: ten seconds of
    /// unit-variance noise go through the acquisition chain and the standard
    /// deviation is scaled so the post-chain RMSE hits the target.
    pub fn new(scenario: Scenario) -> Result<Self, SimError> {
        scenario.validate()?;
        let fir = scenario.chain.design::<f64>().map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        let rate = scenario.chain.input_rate_hz.round() as u64;
        if rate == 0 || (rate as f64 - scenario.chain.input_rate_hz).abs() > 1e-9 {
            return Err(SimError::InvalidScenario("input rate must be a whole number of Hz".into()));
        }
        let mut world = Self { scenario, fir, sigma_g: 1.0, rate };
        world.sigma_g = world.scenario.noise_rmse_target_mg / 1000.0 / world.unit_noise_rmse()?;
        Ok(world)
    }

    fn chain(&self) -> AcquisitionChain<f64> {
        AcquisitionChain::with_fir(&self.fir, self.scenario.chain.factor, self.scenario.chain.tilt_cutoff_hz)
            .expect("chain validated with scenario")
    }

    fn unit_noise_rmse(&self) -> Result<f64, SimError> {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[self.scenario.seed, CALIBRATION_TAG]));
        let n = (CALIBRATION_SECONDS * self.rate) as usize;
        let frames: Vec<AccelFrame<f64>> = (0..n)
            .map(|k| {
                let mut v = [0.0; 3];
                for x in &mut v {
                    *x = StandardNormal.sample(&mut rng);
                }
                AccelFrame::new(k as f64 / self.rate as f64, v[0], v[1], 1.0 + v[2])
            })
            .collect();
        let out = self.chain().process(frames);
        let skip = self.scenario.chain.warmup_rows().min(out.len() / 2);
        let mut total = 0.0;
        for axis in 0..3 {
            let series: Vec<f64> = out[skip..].iter().map(|s| [s.frame.ax, s.frame.ay, s.frame.az][axis]).collect();
            total += noise_rmse(&series).map_err(|e| SimError::InvalidScenario(e.to_string()))?.rmse;
        }
        Ok(total / 3.0)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn fir(&self) -> &FirSpec<f64> {
        &self.fir
    }

    /// Per-axis standard deviation of the raw noise, g.
    pub fn noise_sigma_g(&self) -> f64 {
        self.sigma_g
    }

    pub fn input_rate(&self) -> u64 {
        self.rate
    }

    /// Index of the first raw sample at or after `t`.
    pub fn sample_index(&self, t: f64) -> u64 {
        (t * self.rate as f64 - 1e-6).ceil().max(0.0) as u64
    }

    pub fn sample_time(&self, k: u64) -> f64 {
        k as f64 / self.rate as f64
    }

    pub fn ship_state(ship: &ShipEvent, t: f64) -> Option<(ShipPhase, f64)> {
        if t < ship.appear_t {
            None
        } else if t < ship.berthed_t() {
            Some((ShipPhase::Approach, ship.start_m - ship.speed_mps * (t - ship.appear_t)))
        } else if t < ship.departs_t {
            Some((ShipPhase::Moored, ship.berth_m))
        } else if t < ship.gone_t() {
            Some((ShipPhase::Departing, ship.berth_m + ship.speed_mps * (t - ship.departs_t)))
        } else {
            None
        }
    }

    /// Rangefinder distance: the nearest ship, clamped to the instrument range.
    pub fn distance(&self, t: f64) -> f64 {
        self.scenario
            .ship_events
            .iter()
            .filter_map(|s| Self::ship_state(s, t).map(|(_, d)| d))
            .fold(RANGEFINDER_MAX_M, f64::min)
    }

    pub fn distance_reading(&self, t: f64) -> DistanceReading {
        DistanceReading { t, meters: self.distance(t) }
    }

    pub fn temperature(&self, t: f64) -> f64 {
        let m = &self.scenario.temperature;
        m.mean_c + m.amplitude_c * (2.0 * PI * t / m.period_s).sin()
    }

    /// Injected structural tilt `(roll_deg, pitch_deg)`.
    pub fn drift(&self, t: f64) -> (f64, f64) {
        let temp = self.temperature(t);
        let d = &self.scenario.tilt_drift;
        let pitch = d.pitch_coeff_deg_per_c * (temp - self.scenario.temperature.mean_c);
        let roll = -d.roll_coeff_deg_per_c * (temp - d.roll_knee_c).max(0.0);
        (roll, pitch)
    }

    /// Inverse-square apparent size, scaled so the ship fills
    /// `BERTH_AREA_FRACTION` of the frame at its berth distance.
    pub fn box_area_fraction(ship: &ShipEvent, distance_m: f64) -> f64 {
        let k = BERTH_AREA_FRACTION * ship.berth_m * ship.berth_m;
        (k / (distance_m * distance_m)).clamp(0.0, MAX_AREA_FRACTION)
    }

    /// Whether some non-passing ship is in final approach or moored.
    pub fn berthing_at(&self, t: f64) -> bool {
        self.scenario.ship_events.iter().any(|s| {
            !s.passing
                && match Self::ship_state(s, t) {
                    Some((ShipPhase::Approach, d)) => d <= self.scenario.final_approach_m,
                    Some((ShipPhase::Moored, _)) => true,
                    _ => false,
                }
        })
    }

    fn ship_box(&self, ship: &ShipEvent, phase: ShipPhase, d: f64) -> BBox<f64> {
        let (w, h) = (self.scenario.frame_width, self.scenario.frame_height);
        let frac = Self::box_area_fraction(ship, d);
        let wf = (frac * BOX_ASPECT).sqrt().min(1.0);
        let hf = (frac / wf).min(1.0);
        let (bw, bh) = (wf * w, hf * h);
        let (cx, cy) = if ship.passing || phase == ShipPhase::Departing {
            // far lane: top edge of the frame
            (0.5 * w, 0.5 * bh)
        } else {
            (BERTH_LANE.0 * w, BERTH_LANE.1 * h)
        };
        let x0 = (cx - bw / 2.0).clamp(0.0, w - bw);
        let y0 = (cy - bh / 2.0).clamp(0.0, h - bh);
        BBox { x_min: x0, y_min: y0, x_max: x0 + bw, y_max: y0 + bh }
    }

    /// Camera snapshot at `t`: one ground-truth box per ship within range.
    pub fn scene(&self, t: f64, scene_id: &str) -> WorldScene {
        let mut scene = AnnotationScene::empty(scene_id, self.scenario.frame_width, self.scenario.frame_height);
        for ship in &self.scenario.ship_events {
            if let Some((phase, d)) = Self::ship_state(ship, t) {
                if d <= RANGEFINDER_MAX_M && Self::box_area_fraction(ship, d) > 0.0 {
                    let b = self.ship_box(ship, phase, d);
                    if b.x_max > b.x_min && b.y_max > b.y_min {
                        scene.boxes.push(LabeledBox::ship(b));
                    }
                }
            }
        }
        WorldScene { t, scene, berthing: self.berthing_at(t) }
    }

    /// Deterministic (noise-free) acceleration at `t`, g.
    pub fn clean_accel(&self, t: f64) -> [f64; 3] {
        let (roll, pitch) = self.drift(t);
        let sp = pitch.to_radians().sin();
        let sr = roll.to_radians().sin();
        let mut a = [sp, sr, (1.0 - sp * sp - sr * sr).sqrt()];
        for ship in &self.scenario.ship_events {
            let tau = t - ship.impact_t;
            if tau < 0.0 || tau > 40.0 * ship.impact_decay_s || ship.impact_amp_mg == [0.0; 3] {
                continue;
            }
            let shape = (-tau / ship.impact_decay_s).exp() * (2.0 * PI * ship.impact_freq_hz * tau).sin()
                / impact_unit_peak(ship.impact_freq_hz, ship.impact_decay_s);
            for (x, amp) in a.iter_mut().zip(ship.impact_amp_mg) {
                *x += amp / 1000.0 * shape;
            }
        }
        a
    }

    /// Raw 1 kHz frames `k0 .. k0 + n` for one sensor. Noise is drawn in
    /// one-second blocks seeded by (scenario seed, sensor, block), so any window
    /// reproduces the same samples.
    pub fn raw_frames(&self, sensor_id: &str, k0: u64, n: usize) -> RawFrames<'_> {
        RawFrames {
            world: self,
            sensor: fnv1a(sensor_id.as_bytes()),
            k: k0,
            end: k0 + n as u64,
            block: u64::MAX,
            noise: Vec::new(),
        }
    }

    /// Raw sample count and output row count of a session.
    pub fn session_size(&self, duration_s: f64) -> (usize, usize) {
        let factor = self.scenario.chain.factor;
        let rows = (duration_s * self.rate as f64 / factor as f64).round() as usize;
        (rows * factor, rows)
    }

    /// Reference output rows of a session, computed by a fresh acquisition chain.
    pub fn session_rows(&self, sensor_id: &str, start_t: f64, duration_s: f64) -> Vec<Row> {
        let (n_raw, _) = self.session_size(duration_s);
        let mut chain = self.chain();
        self.raw_frames(sensor_id, self.sample_index(start_t), n_raw)
            .filter_map(|f| chain.push(f))
            .map(|s| Row::from_chain(&s))
            .collect()
    }

    pub fn new_chain(&self) -> AcquisitionChain<f64> {
        self.chain()
    }
}

pub struct RawFrames<'a> {
    world: &'a World,
    sensor: u64,
    k: u64,
    end: u64,
    block: u64,
    noise: Vec<[f64; 3]>,
}

impl RawFrames<'_> {
    fn load_block(&mut self, b: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[self.world.scenario.seed, self.sensor, b]));
        let sigma = self.world.sigma_g;
        self.noise.clear();
        self.noise.extend((0..self.world.rate).map(|_| {
            let mut v = [0.0; 3];
            for x in &mut v {
                let z: f64 = StandardNormal.sample(&mut rng);
                *x = sigma * z;
            }
            v
        }));
        self.block = b;
    }
}

impl Iterator for RawFrames<'_> {
    type Item = AccelFrame<f64>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.k >= self.end {
            return None;
        }
        let rate = self.world.rate;
        let b = self.k / rate;
        if b != self.block {
            self.load_block(b);
        }
        let t = self.world.sample_time(self.k);
        let clean = self.world.clean_accel(t);
        let n = self.noise[(self.k % rate) as usize];
        self.k += 1;
        Some(AccelFrame::new(t, clean[0] + n[0], clean[1] + n[1], clean[2] + n[2]))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = (self.end - self.k) as usize;
        (n, Some(n))
    }
}
