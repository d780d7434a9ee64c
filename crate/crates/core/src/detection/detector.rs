use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::{BBox, Detection, DetectionError};

pub const SHIP_LABEL: &str = "Ship";

// Training-time constants of the CNN this detector stands in for. Recorded as
// metadata only; nothing below consumes them.
pub const INPUT_IMAGE_SIZE: u32 = 1024;
pub const IMAGE_MEAN: [f64; 3] = [0.485, 0.456, 0.406];
pub const IMAGE_STD: [f64; 3] = [0.229, 0.224, 0.225];
pub const ANCHOR_SIZES: [u32; 5] = [32, 64, 128, 256, 512];
pub const ANCHOR_ASPECT_RATIOS: [f64; 3] = [0.5, 1.0, 2.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledBox {
    pub label: String,
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl LabeledBox {
    pub fn ship(b: BBox<f64>) -> Self {
        Self { label: SHIP_LABEL.to_string(), x_min: b.x_min, y_min: b.y_min, x_max: b.x_max, y_max: b.y_max }
    }

    pub fn bbox(&self) -> Result<BBox<f64>, DetectionError> {
        BBox::new(self.x_min, self.y_min, self.x_max, self.y_max)
    }
}

/// Symbolic stand-in for a camera frame: the ground-truth ship boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationScene {
    pub scene_id: String,
    pub width: f64,
    pub height: f64,
    pub boxes: Vec<LabeledBox>,
}

impl AnnotationScene {
    pub fn empty(scene_id: impl Into<String>, width: f64, height: f64) -> Self {
        Self { scene_id: scene_id.into(), width, height, boxes: Vec::new() }
    }

    pub fn validate(&self) -> Result<(), DetectionError> {
        if !(self.width > 0.0 && self.height > 0.0) {
            return Err(DetectionError::Parse(format!("frame {}x{} must be positive", self.width, self.height)));
        }
        for b in &self.boxes {
            b.bbox()?.validate_in_frame(self.width, self.height)?;
        }
        Ok(())
    }

    pub fn ground_truth(&self) -> Result<Vec<BBox<f64>>, DetectionError> {
        self.boxes.iter().map(LabeledBox::bbox).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("scene serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, DetectionError> {
        let scene: Self = serde_json::from_str(s).map_err(|e| DetectionError::Parse(e.to_string()))?;
        scene.validate()?;
        Ok(scene)
    }
}

/// Error model of the stand-in detector.
///
/// Each ground-truth box is missed with probability `miss_rate`; otherwise its
/// edges are jittered by Gaussian noise of `jitter_px` and it is scored uniformly
/// in `[tp_score_min, tp_score_max]`. A Poisson(`fp_rate`) number of spurious boxes
/// per scene are scored in `[fp_score_min, fp_score_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorNoise {
    pub miss_rate: f64,
    pub jitter_px: f64,
    pub tp_score_min: f64,
    pub tp_score_max: f64,
    pub fp_rate: f64,
    pub fp_score_min: f64,
    pub fp_score_max: f64,
    /// Simulated inference latency reported to the node.
    pub latency_s: f64,
}

impl DetectorNoise {
    pub fn perfect() -> Self {
        Self {
            miss_rate: 0.0,
            jitter_px: 0.0,
            tp_score_min: 1.0,
            tp_score_max: 1.0,
            fp_rate: 0.0,
            fp_score_min: 0.0,
            fp_score_max: 0.0,
            latency_s: 0.2,
        }
    }

    pub fn all_miss() -> Self {
        Self { miss_rate: 1.0, ..Self::perfect() }
    }

    /// Tuned so the bundled 24-scene test set scores an AP near 0.92 at IoU 0.5.
    pub fn calibrated() -> Self {
        Self {
            miss_rate: 0.06,
            jitter_px: 7.0,
            tp_score_min: 0.55,
            tp_score_max: 0.99,
            fp_rate: 0.45,
            fp_score_min: 0.05,
            fp_score_max: 0.7,
            latency_s: 0.2,
        }
    }

    pub fn validate(&self) -> Result<(), DetectionError> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        let ok = unit(self.miss_rate)
            && self.jitter_px >= 0.0
            && unit(self.tp_score_min)
            && unit(self.tp_score_max)
            && self.tp_score_min <= self.tp_score_max
            && self.fp_rate >= 0.0
            && unit(self.fp_score_min)
            && unit(self.fp_score_max)
            && self.fp_score_min <= self.fp_score_max
            && self.latency_s >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(DetectionError::Parse(format!("invalid detector noise {self:?}")))
        }
    }
}

impl Default for DetectorNoise {
    fn default() -> Self {
        Self::calibrated()
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

/// Runs the seeded stand-in detector over a scene. Same inputs, same output.
pub fn detect(scene: &AnnotationScene, noise: &DetectorNoise, seed: u64) -> Vec<Detection<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (scene.width, scene.height);
    let mut out = Vec::new();

    for gt in &scene.boxes {
        let Ok(b) = gt.bbox() else { continue };
        // draw both variates unconditionally so one box's fate never shifts another's
        let miss_draw = rng.gen::<f64>();
        let score = uniform(&mut rng, noise.tp_score_min, noise.tp_score_max);
        let mut edges = [b.x_min, b.y_min, b.x_max, b.y_max];
        if noise.jitter_px > 0.0 {
            let normal = Normal::new(0.0, noise.jitter_px).expect("finite jitter");
            for e in &mut edges {
                *e += normal.sample(&mut rng);
            }
        }
        if miss_draw < noise.miss_rate {
            continue;
        }
        let x0 = edges[0].clamp(0.0, w);
        let y0 = edges[1].clamp(0.0, h);
        let x1 = edges[2].clamp(0.0, w);
        let y1 = edges[3].clamp(0.0, h);
        if let Ok(jittered) = BBox::new(x0.min(x1), y0.min(y1), x0.max(x1), y0.max(y1)) {
            out.push(Detection { bbox: jittered, score: score.clamp(0.0, 1.0), label: gt.label.clone() });
        }
    }

    if noise.fp_rate > 0.0 {
        let count = Poisson::new(noise.fp_rate).expect("positive rate").sample(&mut rng) as usize;
        for _ in 0..count {
            let bw = uniform(&mut rng, 0.03, 0.25) * w;
            let bh = uniform(&mut rng, 0.03, 0.25) * h;
            let x0 = uniform(&mut rng, 0.0, w - bw);
            let y0 = uniform(&mut rng, 0.0, h - bh);
            let score = uniform(&mut rng, noise.fp_score_min, noise.fp_score_max);
            out.push(Detection {
                bbox: BBox { x_min: x0, y_min: y0, x_max: x0 + bw, y_max: y0 + bh },
                score,
                label: SHIP_LABEL.to_string(),
            });
        }
    }
    out
}
