use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::{SimError, World, WorldScene};
use crate::detection::AnnotationScene;
use crate::telemetry::{encode_csv, Row};
use crate::trigger::DistanceReading;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperatureRecord {
    pub t: f64,
    pub temp_c: f64,
    pub roll_deg: f64,
    pub pitch_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneRecord {
    pub t: f64,
    pub berthing: bool,
    pub scene: AnnotationScene,
}

/// Everything the world generated over a run, for oracle comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthLog {
    pub distances: Vec<DistanceReading>,
    pub scenes: Vec<SceneRecord>,
    pub temperatures: Vec<TemperatureRecord>,
    /// Output-rate reference rows of sensor "1" around each impact.
    pub impact_rows: Vec<Vec<Row>>,
}

/// Reference window around an impact: from 10 s before to 50 s after.
const IMPACT_WINDOW: (f64, f64) = (10.0, 60.0);

impl GroundTruthLog {
    pub fn build(world: &World) -> Self {
        let s = world.scenario();
        let whole_seconds = s.duration_s.floor() as u64;
        let distances =
            (0..=whole_seconds).map(|i| world.distance_reading(i as f64)).filter(|r| r.t < s.duration_s).collect();
        let n_snap = (s.duration_s / s.scene_interval_s).ceil() as u64;
        let mut scenes = Vec::new();
        let mut temperatures = Vec::new();
        for i in 0..n_snap {
            let t = i as f64 * s.scene_interval_s;
            let WorldScene { scene, berthing, .. } = world.scene(t, &format!("gt-{}", crate::fmt_time(t)));
            scenes.push(SceneRecord { t, berthing, scene });
            let (roll_deg, pitch_deg) = world.drift(t);
            temperatures.push(TemperatureRecord { t, temp_c: world.temperature(t), roll_deg, pitch_deg });
        }
        let impact_rows = s
            .ship_events
            .iter()
            .filter(|e| e.impact_amp_mg.iter().any(|a| *a > 0.0))
            .map(|e| {
                let start = (e.impact_t - IMPACT_WINDOW.0).max(0.0);
                world.session_rows("1", start, IMPACT_WINDOW.1)
            })
            .collect();
        Self { distances, scenes, temperatures, impact_rows }
    }

    /// Rising edges of the berthing flag in the 1 Hz world timeline.
    pub fn berthing_events(world: &World) -> usize {
        let mut prev = false;
        let mut count = 0;
        let mut t = 0.0;
        while t < world.scenario().duration_s {
            let now = world.berthing_at(t);
            if now && !prev {
                count += 1;
            }
            prev = now;
            t += 1.0;
        }
        count
    }

    /// Writes `distance.csv`, `environment.csv`, `ships.csv`, `scenes.jsonl`, and
    /// `impact_<i>.csv` into `dir`.
    pub fn write(&self, world: &World, dir: &Path) -> Result<(), SimError> {
        fs::create_dir_all(dir)?;
        let mut text = String::from("t,distance_m\n");
        for r in &self.distances {
            let _ = writeln!(text, "{:.3},{:.6}", r.t, r.meters);
        }
        fs::write(dir.join("distance.csv"), text)?;

        let mut text = String::from("t,temp_c,roll_deg,pitch_deg\n");
        for r in &self.temperatures {
            let _ = writeln!(text, "{:.3},{:.6},{:.6},{:.6}", r.t, r.temp_c, r.roll_deg, r.pitch_deg);
        }
        fs::write(dir.join("environment.csv"), text)?;

        let mut text = String::from("ship,appear_t,berthed_t,impact_t,departs_t,passing,berthing\n");
        for (i, e) in world.scenario().ship_events.iter().enumerate() {
            let _ = writeln!(
                text,
                "{i},{:.3},{:.3},{:.3},{:.3},{},{}",
                e.appear_t,
                e.berthed_t(),
                e.impact_t,
                e.departs_t,
                e.passing,
                !e.passing
            );
        }
        fs::write(dir.join("ships.csv"), text)?;

        let mut text = String::new();
        for r in &self.scenes {
            text.push_str(&serde_json::to_string(r).expect("scene record serializes"));
            text.push('\n');
        }
        fs::write(dir.join("scenes.jsonl"), text)?;

        for (i, rows) in self.impact_rows.iter().enumerate() {
            fs::write(dir.join(format!("impact_{i}.csv")), encode_csv(rows))?;
        }
        Ok(())
    }
}
