use std::time::{Duration, Instant};

/// Simulated time source. With a compression factor `c`, simulated time runs `c`
/// times faster than the wall clock and [`SimClock::wait_until`] sleeps to keep
/// pace; without one, waiting is a no-op and the simulation runs flat out.
#[derive(Debug, Clone)]
pub struct SimClock {
    compression: Option<f64>,
    origin_sim: f64,
    origin_wall: Instant,
}

impl SimClock {
    pub fn unpaced() -> Self {
        Self { compression: None, origin_sim: 0.0, origin_wall: Instant::now() }
    }

    pub fn compressed(factor: f64, origin_sim: f64) -> Self {
        Self {
            compression: (factor > 0.0 && factor.is_finite()).then_some(factor),
            origin_sim,
            origin_wall: Instant::now(),
        }
    }

    pub fn compression(&self) -> Option<f64> {
        self.compression
    }

    /// Blocks until the wall clock has caught up with simulated time `t`.
    pub fn wait_until(&self, t: f64) {
        let Some(c) = self.compression else { return };
        let target = Duration::from_secs_f64(((t - self.origin_sim) / c).max(0.0));
        let elapsed = self.origin_wall.elapsed();
        if target > elapsed {
            std::thread::sleep(target - elapsed);
        }
    }

    /// Wall-clock duration that simulated span `dt` maps to.
    pub fn wall_span(&self, dt: f64) -> Duration {
        match self.compression {
            Some(c) => Duration::from_secs_f64((dt / c).max(0.0)),
            None => Duration::ZERO,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pacing() {
        let c = SimClock::compressed(1000.0, 0.0);
        let start = Instant::now();
        c.wait_until(50.0);
        assert!(start.elapsed() >= Duration::from_millis(49));
        let u = SimClock::unpaced();
        let start = Instant::now();
        u.wait_until(1e9);
        assert!(start.elapsed() < Duration::from_millis(10));
        assert_eq!(SimClock::compressed(0.0, 0.0).compression(), None);
    }
}
