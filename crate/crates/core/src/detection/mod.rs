//! Ship detection geometry and evaluation: boxes and IoU, the seeded stand-in
//! detector, the berthing gate, average precision, and the early-stopping
//! controller used while training a detector.

mod ap;
mod dataset;
mod detector;
mod early_stop;
mod gate;
mod geometry;

pub use ap::{average_precision, match_detections, pr_sweep, MatchOutcome, PrPoint, SceneEval};
pub use dataset::{bundled_test_scenes, load_dataset, save_dataset, DatasetIndex};
pub use detector::{
    detect, AnnotationScene, DetectorNoise, LabeledBox, ANCHOR_ASPECT_RATIOS, ANCHOR_SIZES, IMAGE_MEAN, IMAGE_STD,
    INPUT_IMAGE_SIZE, SHIP_LABEL,
};
pub use early_stop::{EarlyStopDecision, EarlyStopState, DEFAULT_MAX_EPOCHS, DEFAULT_PATIENCE};
pub use gate::{classify_berthing, BerthingGate, BerthingVerdict};
pub use geometry::{iou, BBox, Detection};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DetectionError {
    #[error("invalid box ({x_min}, {y_min}, {x_max}, {y_max})")]
    InvalidBox { x_min: f64, y_min: f64, x_max: f64, y_max: f64 },
    #[error("box ({x_min}, {y_min}, {x_max}, {y_max}) exceeds the {width}x{height} frame")]
    OutOfFrame { x_min: f64, y_min: f64, x_max: f64, y_max: f64, width: f64, height: f64 },
    #[error("average precision is undefined without ground truth")]
    NoGroundTruth,
    #[error("score {0} outside [0, 1]")]
    InvalidScore(f64),
    #[error("invalid gate: {0}")]
    InvalidGate(String),
    #[error("epoch {epoch} out of order (expected {expected})")]
    EpochOutOfOrder { epoch: usize, expected: usize },
    #[error("training already stopped")]
    AlreadyStopped,
    #[error("scene parse error: {0}")]
    Parse(String),
    #[error("dataset io error: {0}")]
    Io(String),
}
