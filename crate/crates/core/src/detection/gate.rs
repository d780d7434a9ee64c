use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{BBox, Detection, DetectionError};
use crate::Scalar;

/// Accepts a detection as a berthing ship when its box centroid lies in `roi` and
/// its area, as a fraction of the frame, lies in `[area_min_frac, area_max_frac]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerthingGate<T> {
    pub roi: BBox<T>,
    pub area_min_frac: T,
    pub area_max_frac: T,
    pub frame_width: T,
    pub frame_height: T,
}

impl<T: Scalar> BerthingGate<T> {
    /// Central 80% of the width, lower 70% of the height, area fraction in [0.05, 0.9].
    pub fn default_for_frame(width: T, height: T) -> Self {
        Self::from_fractions(width, height, [0.1, 0.3, 0.9, 1.0], 0.05, 0.9).expect("default gate is valid")
    }

    /// `roi` given as `[x_min, y_min, x_max, y_max]` fractions of the frame.
    pub fn from_fractions(
        width: T,
        height: T,
        roi: [f64; 4],
        area_min_frac: f64,
        area_max_frac: f64,
    ) -> Result<Self, DetectionError> {
        let gate = Self {
            roi: BBox {
                x_min: T::lit(roi[0]) * width,
                y_min: T::lit(roi[1]) * height,
                x_max: T::lit(roi[2]) * width,
                y_max: T::lit(roi[3]) * height,
            },
            area_min_frac: T::lit(area_min_frac),
            area_max_frac: T::lit(area_max_frac),
            frame_width: width,
            frame_height: height,
        };
        gate.validate()?;
        Ok(gate)
    }

    pub fn validate(&self) -> Result<(), DetectionError> {
        self.roi
            .validate_in_frame(self.frame_width, self.frame_height)
            .map_err(|e| DetectionError::InvalidGate(e.to_string()))?;
        if !(self.area_min_frac >= T::zero()
            && self.area_min_frac < self.area_max_frac
            && self.area_max_frac <= T::one())
        {
            return Err(DetectionError::InvalidGate(format!(
                "area bounds [{}, {}] must satisfy 0 <= min < max <= 1",
                self.area_min_frac, self.area_max_frac
            )));
        }
        Ok(())
    }

    pub fn area_fraction(&self, b: &BBox<T>) -> T {
        b.area() / (self.frame_width * self.frame_height)
    }

    pub fn admits(&self, b: &BBox<T>) -> bool {
        let (cx, cy) = b.centroid();
        let frac = self.area_fraction(b);
        self.roi.contains_point(cx, cy) && frac >= self.area_min_frac && frac <= self.area_max_frac
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerthingVerdict<T> {
    pub berthing: bool,
    pub chosen: Option<Detection<T>>,
}

/// Highest score wins among admitted boxes; ties go to the larger box, then the lower `x_min`.
pub fn classify_berthing<T: Scalar>(detections: &[Detection<T>], gate: &BerthingGate<T>) -> BerthingVerdict<T> {
    let chosen = detections
        .iter()
        .filter(|d| gate.admits(&d.bbox))
        .max_by(|a, b| {
            a.score
                .partial_cmp(&b.score)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.bbox.area().partial_cmp(&b.bbox.area()).unwrap_or(Ordering::Equal))
                .then_with(|| b.bbox.x_min.partial_cmp(&a.bbox.x_min).unwrap_or(Ordering::Equal))
        })
        .cloned();
    BerthingVerdict { berthing: chosen.is_some(), chosen }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(x0: f64, y0: f64, x1: f64, y1: f64, score: f64) -> Detection<f64> {
        Detection::new(BBox::new(x0, y0, x1, y1).unwrap(), score, "Ship").unwrap()
    }

    fn gate() -> BerthingGate<f64> {
        BerthingGate::from_fractions(1000.0, 1000.0, [0.1, 0.3, 0.9, 1.0], 0.05, 0.8).unwrap()
    }

    #[test]
    fn accepts_centered_box() {
        // 400 x 500 box = 0.2 of the frame, centroid (500, 650)
        let v = classify_berthing(&[det(300.0, 400.0, 700.0, 900.0, 0.9)], &gate());
        assert!(v.berthing);
    }

    #[test]
    fn rejects_centroid_outside_roi() {
        let v = classify_berthing(&[det(0.0, 0.0, 300.0, 300.0, 0.9)], &gate());
        assert!(!v.berthing);
        assert!(v.chosen.is_none());
    }

    #[test]
    fn rejects_small_and_huge_boxes() {
        assert!(!classify_berthing(&[det(480.0, 600.0, 520.0, 640.0, 0.9)], &gate()).berthing);
        assert!(!classify_berthing(&[det(0.0, 50.0, 1000.0, 1000.0, 0.9)], &gate()).berthing);
    }

    #[test]
    fn picks_highest_score() {
        let dets = [det(300.0, 400.0, 700.0, 900.0, 0.7), det(250.0, 450.0, 650.0, 850.0, 0.9)];
        let v = classify_berthing(&dets, &gate());
        assert_eq!(v.chosen.unwrap().score, 0.9);
    }

    #[test]
    fn ties_prefer_larger_then_leftmost() {
        let small = det(300.0, 500.0, 600.0, 900.0, 0.8);
        let large = det(300.0, 400.0, 700.0, 900.0, 0.8);
        let v = classify_berthing(&[small.clone(), large.clone()], &gate());
        assert_eq!(v.chosen.unwrap(), large);
        let left = det(200.0, 400.0, 600.0, 900.0, 0.8);
        let v = classify_berthing(&[large, left.clone()], &gate());
        assert_eq!(v.chosen.unwrap(), left);
    }

    #[test]
    fn invalid_gate_rejected() {
        assert!(BerthingGate::<f64>::from_fractions(10.0, 10.0, [0.1, 0.1, 0.9, 0.9], 0.5, 0.5).is_err());
        assert!(BerthingGate::<f64>::from_fractions(10.0, 10.0, [0.9, 0.1, 0.1, 0.9], 0.1, 0.5).is_err());
    }
}
