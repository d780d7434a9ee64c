use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use portmon_core::dsp::{noise_rmse, ChainConfig};
use portmon_core::ingest::SeriesStore;
use portmon_core::telemetry::{Row, RowSource};
use portmon_core::trigger::TriggerKind;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const REPORT_FILE: &str = "report.json";
pub const SESSIONS_FILE: &str = "sessions.csv";
pub const TILT_TEMPERATURE_FILE: &str = "tilt_temperature.csv";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
    pub range: f64,
    pub mean: f64,
}

impl Range {
    fn of(values: impl Iterator<Item = f64>) -> Option<Self> {
        let (mut min, mut max, mut sum, mut n) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
        for v in values {
            min = min.min(v);
            max = max.max(v);
            sum += v;
            n += 1;
        }
        (n > 0).then(|| Self { min, max, range: max - min, mean: sum / n as f64 })
    }
}

/// Amplitude, noise, and tilt figures of one stored session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionAnalysis {
    pub session_id: String,
    pub trigger_t: f64,
    pub start_t: f64,
    pub trigger_type: TriggerKind,
    pub ship_present: bool,
    pub berthing: bool,
    pub duration_s: f64,
    pub temperature_c: f64,
    pub rows: usize,
    /// Rows skipped at the start while the filters settle.
    pub warmup_rows: usize,
    pub from_bulk: bool,
    pub missing_packets: u64,
    /// Largest |a - mean| per axis (x, y, z), mg.
    pub peak_mg: [f64; 3],
    /// Mean-removed RMS per axis, mg.
    pub rmse_mg: [f64; 3],
    pub roll_deg: Range,
    pub pitch_deg: Range,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltTemperaturePoint {
    pub t: f64,
    pub temp_c: f64,
    pub roll_deg: f64,
    pub pitch_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub sensor_id: String,
    pub sessions: Vec<SessionAnalysis>,
    /// Session-mean tilt against trigger-time temperature.
    pub tilt_temperature: Vec<TiltTemperaturePoint>,
    pub roll_trend: Option<Range>,
    pub pitch_trend: Option<Range>,
    /// Pearson correlation of session-mean tilt with temperature.
    pub roll_temp_corr: Option<f64>,
    pub pitch_temp_corr: Option<f64>,
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

fn axis_stats(rows: &[Row], axis: impl Fn(&Row) -> f64) -> (f64, f64) {
    let values: Vec<f64> = rows.iter().map(axis).collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let peak = values.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    let rmse = noise_rmse(&values).map(|s| s.rmse).unwrap_or(0.0);
    (peak, rmse)
}

impl AnalysisReport {
    /// Analyzes every session of `sensor_id` that has both an info record and rows.
    pub fn build(store: &SeriesStore, sensor_id: &str) -> Self {
        let warmup = ChainConfig::default().warmup_rows();
        let mut sessions = Vec::new();
        for info in store.query_info(sensor_id, f64::NEG_INFINITY, f64::INFINITY) {
            let Ok(rec) = store.session(sensor_id, &info.session_id) else {
                log::warn!("session {} has no rows", info.session_id);
                continue;
            };
            let skip = if rec.rows.len() > 2 * warmup { warmup } else { 0 };
            let rows = &rec.rows[skip..];
            if rows.len() < 2 {
                continue;
            }
            let (px, rx) = axis_stats(rows, |r| r.ax_mg);
            let (py, ry) = axis_stats(rows, |r| r.ay_mg);
            let (pz, rz) = axis_stats(rows, |r| r.az_mg);
            sessions.push(SessionAnalysis {
                session_id: info.session_id.clone(),
                trigger_t: info.trigger_time,
                start_t: info.start_t,
                trigger_type: info.trigger_type,
                ship_present: info.ship_present,
                berthing: info.berthing,
                duration_s: info.duration_s,
                temperature_c: info.temperature_c,
                rows: rec.rows.len(),
                warmup_rows: skip,
                from_bulk: rec.source == RowSource::Bulk,
                missing_packets: rec.report.missing_count(),
                peak_mg: [px, py, pz],
                rmse_mg: [rx, ry, rz],
                roll_deg: Range::of(rows.iter().map(|r| r.roll_deg)).expect("rows present"),
                pitch_deg: Range::of(rows.iter().map(|r| r.pitch_deg)).expect("rows present"),
            });
        }
        let tilt_temperature: Vec<TiltTemperaturePoint> = sessions
            .iter()
            .map(|s| TiltTemperaturePoint {
                t: s.trigger_t,
                temp_c: s.temperature_c,
                roll_deg: s.roll_deg.mean,
                pitch_deg: s.pitch_deg.mean,
            })
            .collect();
        let temps: Vec<f64> = tilt_temperature.iter().map(|p| p.temp_c).collect();
        let rolls: Vec<f64> = tilt_temperature.iter().map(|p| p.roll_deg).collect();
        let pitches: Vec<f64> = tilt_temperature.iter().map(|p| p.pitch_deg).collect();
        Self {
            sensor_id: sensor_id.to_string(),
            roll_trend: Range::of(rolls.iter().copied()),
            pitch_trend: Range::of(pitches.iter().copied()),
            roll_temp_corr: pearson(&temps, &rolls),
            pitch_temp_corr: pearson(&temps, &pitches),
            sessions,
            tilt_temperature,
        }
    }

    pub fn sessions_csv(&self) -> String {
        let mut out = String::from(
            "session_id,trigger_t,start_t,trigger_type,ship_present,berthing,duration_s,rows,temp_c,\
             peak_x_mg,peak_y_mg,peak_z_mg,rmse_x_mg,rmse_y_mg,rmse_z_mg,\
             roll_min_deg,roll_max_deg,roll_range_deg,pitch_min_deg,pitch_max_deg,pitch_range_deg\n",
        );
        for s in &self.sessions {
            let _ = writeln!(
                out,
                "{},{:.3},{:.3},{},{},{},{},{},{:.4},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                s.session_id,
                s.trigger_t,
                s.start_t,
                s.trigger_type.as_str(),
                s.ship_present,
                s.berthing,
                s.duration_s,
                s.rows,
                s.temperature_c,
                s.peak_mg[0],
                s.peak_mg[1],
                s.peak_mg[2],
                s.rmse_mg[0],
                s.rmse_mg[1],
                s.rmse_mg[2],
                s.roll_deg.min,
                s.roll_deg.max,
                s.roll_deg.range,
                s.pitch_deg.min,
                s.pitch_deg.max,
                s.pitch_deg.range,
            );
        }
        out
    }

    pub fn tilt_temperature_csv(&self) -> String {
        let mut out = String::from("t,temp_c,roll_deg,pitch_deg\n");
        for p in &self.tilt_temperature {
            let _ = writeln!(out, "{:.3},{:.4},{:.6},{:.6}", p.t, p.temp_c, p.roll_deg, p.pitch_deg);
        }
        out
    }

    /// Writes the JSON report and the two CSVs into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir)?;
        let json = serde_json::to_string_pretty(self).map_err(|e| CliError::Output(e.to_string()))?;
        fs::write(dir.join(REPORT_FILE), json + "\n")?;
        fs::write(dir.join(SESSIONS_FILE), self.sessions_csv())?;
        fs::write(dir.join(TILT_TEMPERATURE_FILE), self.tilt_temperature_csv())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_signs() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((pearson(&x, &[2.0, 4.0, 6.0, 8.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&x, &[8.0, 6.0, 4.0, 2.0]).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(pearson(&x, &[1.0; 4]), None);
        assert_eq!(pearson(&[1.0], &[1.0]), None);
    }

    #[test]
    fn range_of_values() {
        let r = Range::of([3.0, -1.0, 2.0].into_iter()).unwrap();
        assert_eq!((r.min, r.max, r.range), (-1.0, 3.0, 4.0));
        assert!((r.mean - 4.0 / 3.0).abs() < 1e-15);
        assert!(Range::of(std::iter::empty()).is_none());
    }

    #[test]
    fn peak_bounds_rmse() {
        let rows: Vec<Row> =
            (0..50).map(|i| Row::from_array([i as f64 * 0.01, (i as f64).sin(), 0.0, 1000.0, 0.0, 0.0])).collect();
        let (peak, rmse) = axis_stats(&rows, |r| r.ax_mg);
        assert!(peak >= rmse);
        assert!(rmse > 0.0);
    }

    #[test]
    fn empty_store_gives_empty_report() {
        let report = AnalysisReport::build(&SeriesStore::in_memory(), "1");
        assert!(report.sessions.is_empty());
        assert_eq!(report.tilt_temperature_csv(), "t,temp_c,roll_deg,pitch_deg\n");
        assert!(report.roll_trend.is_none());
    }
}
