use serde::{Deserialize, Serialize};

use super::DetectionError;
use crate::Scalar;

/// Axis-aligned box in pixel coordinates, `min < max` on both axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox<T> {
    pub x_min: T,
    pub y_min: T,
    pub x_max: T,
    pub y_max: T,
}

impl<T: Scalar> BBox<T> {
    pub fn new(x_min: T, y_min: T, x_max: T, y_max: T) -> Result<Self, DetectionError> {
        let b = Self { x_min, y_min, x_max, y_max };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), DetectionError> {
        let ok = [self.x_min, self.y_min, self.x_max, self.y_max].iter().all(|v| v.is_finite())
            && self.x_min < self.x_max
            && self.y_min < self.y_max;
        if ok {
            Ok(())
        } else {
            Err(self.invalid())
        }
    }

    pub fn validate_in_frame(&self, width: T, height: T) -> Result<(), DetectionError> {
        self.validate()?;
        if self.x_min < T::zero() || self.y_min < T::zero() || self.x_max > width || self.y_max > height {
            return Err(DetectionError::OutOfFrame {
                x_min: self.x_min.to_f64_lossy(),
                y_min: self.y_min.to_f64_lossy(),
                x_max: self.x_max.to_f64_lossy(),
                y_max: self.y_max.to_f64_lossy(),
                width: width.to_f64_lossy(),
                height: height.to_f64_lossy(),
            });
        }
        Ok(())
    }

    fn invalid(&self) -> DetectionError {
        DetectionError::InvalidBox {
            x_min: self.x_min.to_f64_lossy(),
            y_min: self.y_min.to_f64_lossy(),
            x_max: self.x_max.to_f64_lossy(),
            y_max: self.y_max.to_f64_lossy(),
        }
    }

    pub fn width(&self) -> T {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> T {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> T {
        self.width() * self.height()
    }

    pub fn centroid(&self) -> (T, T) {
        let two = T::lit(2.0);
        ((self.x_min + self.x_max) / two, (self.y_min + self.y_max) / two)
    }

    pub fn contains_point(&self, x: T, y: T) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    pub fn translate(&self, dx: T, dy: T) -> Self {
        Self { x_min: self.x_min + dx, y_min: self.y_min + dy, x_max: self.x_max + dx, y_max: self.y_max + dy }
    }

    pub fn intersection_area(&self, other: &Self) -> T {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w <= T::zero() || h <= T::zero() {
            T::zero()
        } else {
            w * h
        }
    }
}

/// Intersection over union; 0 for disjoint boxes.
pub fn iou<T: Scalar>(a: &BBox<T>, b: &BBox<T>) -> T {
    let inter = a.intersection_area(b);
    if inter == T::zero() {
        return T::zero();
    }
    let union = a.area() + b.area() - inter;
    (inter / union).min(T::one())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection<T> {
    pub bbox: BBox<T>,
    pub score: T,
    pub label: String,
}

impl<T: Scalar> Detection<T> {
    pub fn new(bbox: BBox<T>, score: T, label: impl Into<String>) -> Result<Self, DetectionError> {
        bbox.validate()?;
        if !(score >= T::zero() && score <= T::one()) {
            return Err(DetectionError::InvalidScore(score.to_f64_lossy()));
        }
        Ok(Self { bbox, score, label: label.into() })
    }
}
