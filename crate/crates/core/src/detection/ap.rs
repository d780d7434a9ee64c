use std::cmp::Ordering;

use serde::Serialize;

use super::{iou, BBox, Detection, DetectionError};
use crate::Scalar;

/// Detections and ground truth for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneEval<T> {
    pub scene_id: String,
    pub detections: Vec<Detection<T>>,
    pub ground_truth: Vec<BBox<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchOutcome<T> {
    pub scene: usize,
    pub detection: usize,
    pub score: T,
    pub true_positive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Ranks all detections by descending score (ties: scene id, then box order) and
/// greedily matches each to the unmatched ground truth of highest IoU in its scene.
pub fn match_detections<T: Scalar>(scenes: &[SceneEval<T>], iou_threshold: T) -> Vec<MatchOutcome<T>> {
    let mut order: Vec<(usize, usize)> =
        scenes.iter().enumerate().flat_map(|(s, scene)| (0..scene.detections.len()).map(move |d| (s, d))).collect();
    order.sort_by(|&(sa, da), &(sb, db)| {
        let a = scenes[sa].detections[da].score;
        let b = scenes[sb].detections[db].score;
        b.partial_cmp(&a)
            .unwrap_or(Ordering::Equal)
            .then_with(|| scenes[sa].scene_id.cmp(&scenes[sb].scene_id))
            .then_with(|| sa.cmp(&sb))
            .then_with(|| da.cmp(&db))
    });

    let mut matched: Vec<Vec<bool>> = scenes.iter().map(|s| vec![false; s.ground_truth.len()]).collect();
    order
        .into_iter()
        .map(|(s, d)| {
            let det = &scenes[s].detections[d];
            let mut best: Option<(usize, T)> = None;
            for (g, gt) in scenes[s].ground_truth.iter().enumerate() {
                if matched[s][g] {
                    continue;
                }
                let v = iou(&det.bbox, gt);
                if best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((g, v));
                }
            }
            let true_positive = match best {
                Some((g, v)) if v >= iou_threshold => {
                    matched[s][g] = true;
                    true
                }
                _ => false,
            };
            MatchOutcome { scene: s, detection: d, score: det.score, true_positive }
        })
        .collect()
}

/// All-points interpolated average precision: the area under the monotone
/// precision envelope of the precision/recall curve.
pub fn average_precision<T: Scalar>(scenes: &[SceneEval<T>], iou_threshold: T) -> Result<T, DetectionError> {
    let total_gt: usize = scenes.iter().map(|s| s.ground_truth.len()).sum();
    if total_gt == 0 {
        return Err(DetectionError::NoGroundTruth);
    }
    let outcomes = match_detections(scenes, iou_threshold);
    let n_gt = T::lit(total_gt as f64);

    let mut tp = 0usize;
    let mut recall = Vec::with_capacity(outcomes.len());
    let mut precision = Vec::with_capacity(outcomes.len());
    for (k, o) in outcomes.iter().enumerate() {
        if o.true_positive {
            tp += 1;
        }
        recall.push(T::lit(tp as f64) / n_gt);
        precision.push(T::lit(tp as f64) / T::lit((k + 1) as f64));
    }
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }

    let mut ap = T::zero();
    let mut prev_recall = T::zero();
    for (r, p) in recall.into_iter().zip(precision) {
        if r > prev_recall {
            ap = ap + (r - prev_recall) * p;
            prev_recall = r;
        }
    }
    Ok(ap)
}

/// Precision and recall of the detections scoring at or above each threshold.
pub fn pr_sweep<T: Scalar>(
    scenes: &[SceneEval<T>],
    thresholds: &[f64],
    iou_threshold: T,
) -> Result<Vec<PrPoint>, DetectionError> {
    let total_gt: usize = scenes.iter().map(|s| s.ground_truth.len()).sum();
    if total_gt == 0 {
        return Err(DetectionError::NoGroundTruth);
    }
    let outcomes = match_detections(scenes, iou_threshold);
    Ok(thresholds
        .iter()
        .map(|&th| {
            let kept: Vec<_> = outcomes.iter().filter(|o| o.score.to_f64_lossy() >= th).collect();
            let tp = kept.iter().filter(|o| o.true_positive).count();
            let precision = if kept.is_empty() { 1.0 } else { tp as f64 / kept.len() as f64 };
            PrPoint { threshold: th, precision, recall: tp as f64 / total_gt as f64 }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(x: f64) -> BBox<f64> {
        BBox::new(x, 0.0, x + 10.0, 10.0).unwrap()
    }

    fn det(x: f64, score: f64) -> Detection<f64> {
        Detection::new(bx(x), score, "Ship").unwrap()
    }

    #[test]
    fn perfect_is_one() {
        let scenes = vec![SceneEval {
            scene_id: "a".into(),
            detections: vec![det(0.0, 0.9), det(100.0, 0.8)],
            ground_truth: vec![bx(0.0), bx(100.0)],
        }];
        assert_eq!(average_precision(&scenes, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn all_miss_is_zero() {
        let scenes =
            vec![SceneEval { scene_id: "a".into(), detections: vec![det(500.0, 0.9)], ground_truth: vec![bx(0.0)] }];
        assert_eq!(average_precision(&scenes, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn tp_fp_tp_hand_case() {
        // PR points (0.5, 1), (0.5, 0.5), (1, 2/3); envelope area 0.5 + 0.5 * 2/3
        let scenes = vec![SceneEval {
            scene_id: "a".into(),
            detections: vec![det(0.0, 0.9), det(500.0, 0.8), det(100.0, 0.7)],
            ground_truth: vec![bx(0.0), bx(100.0)],
        }];
        let ap = average_precision(&scenes, 0.5).unwrap();
        assert!((ap - 0.833_333_333_333_333_4).abs() < 1e-12, "{ap}");
    }

    #[test]
    fn duplicate_detection_is_false_positive() {
        let scenes = vec![SceneEval {
            scene_id: "a".into(),
            detections: vec![det(0.0, 0.9), det(1.0, 0.8)],
            ground_truth: vec![bx(0.0)],
        }];
        let m = match_detections(&scenes, 0.5);
        assert!(m[0].true_positive);
        assert!(!m[1].true_positive);
    }

    #[test]
    fn no_ground_truth_is_error() {
        let scenes = vec![SceneEval::<f64> { scene_id: "a".into(), detections: vec![], ground_truth: vec![] }];
        assert_eq!(average_precision(&scenes, 0.5), Err(DetectionError::NoGroundTruth));
    }

    #[test]
    fn sweep_endpoints() {
        let scenes = vec![SceneEval {
            scene_id: "a".into(),
            detections: vec![det(0.0, 0.9), det(500.0, 0.8), det(100.0, 0.3)],
            ground_truth: vec![bx(0.0), bx(100.0)],
        }];
        let pts = pr_sweep(&scenes, &[0.0, 0.5, 0.95], 0.5).unwrap();
        assert_eq!((pts[0].precision, pts[0].recall), (2.0 / 3.0, 1.0));
        assert_eq!((pts[1].precision, pts[1].recall), (0.5, 0.5));
        assert_eq!((pts[2].precision, pts[2].recall), (1.0, 0.0));
    }
}
