use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AnnotationScene, BBox, DetectionError, LabeledBox};

pub const INDEX_FILE: &str = "index.json";

/// Ground-truth index of a dataset directory: scene document file names, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub scenes: Vec<String>,
}

fn io_err(e: impl std::fmt::Display) -> DetectionError {
    DetectionError::Io(e.to_string())
}

pub fn save_dataset(dir: &Path, scenes: &[AnnotationScene]) -> Result<(), DetectionError> {
    fs::create_dir_all(dir).map_err(io_err)?;
    let mut index = DatasetIndex { scenes: Vec::new() };
    for scene in scenes {
        let name = format!("{}.json", scene.scene_id);
        let body = serde_json::to_string_pretty(scene).map_err(io_err)?;
        fs::write(dir.join(&name), body + "\n").map_err(io_err)?;
        index.scenes.push(name);
    }
    let body = serde_json::to_string_pretty(&index).map_err(io_err)?;
    fs::write(dir.join(INDEX_FILE), body + "\n").map_err(io_err)
}

pub fn load_dataset(dir: &Path) -> Result<Vec<AnnotationScene>, DetectionError> {
    let index_text = fs::read_to_string(dir.join(INDEX_FILE)).map_err(io_err)?;
    let index: DatasetIndex = serde_json::from_str(&index_text).map_err(|e| DetectionError::Parse(e.to_string()))?;
    index
        .scenes
        .iter()
        .map(|name| {
            let text = fs::read_to_string(dir.join(name)).map_err(io_err)?;
            AnnotationScene::from_json(&text)
        })
        .collect()
}

/// The 24-image test set used for detector calibration, regenerated deterministically.
pub fn bundled_test_scenes() -> Vec<AnnotationScene> {
    const SIZE: f64 = 1024.0;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0024);
    (0..24)
        .map(|i| {
            let n_ships = match rng.gen::<f64>() {
                p if p < 0.55 => 1,
                p if p < 0.85 => 2,
                _ => 3,
            };
            let boxes = (0..n_ships)
                .map(|_| {
                    let w = rng.gen_range(0.08..0.7) * SIZE;
                    let h = w * rng.gen_range(0.3..0.8);
                    let x0 = rng.gen_range(0.0..(SIZE - w));
                    let y0 = rng.gen_range(0.0..(SIZE - h));
                    let round = |v: f64| v.round();
                    let b =
                        BBox::new(round(x0), round(y0), round(x0 + w), round(y0 + h)).expect("generated box is valid");
                    LabeledBox::ship(b)
                })
                .collect();
            AnnotationScene { scene_id: format!("scene_{i:02}"), width: SIZE, height: SIZE, boxes }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_set_shape() {
        let scenes = bundled_test_scenes();
        assert_eq!(scenes.len(), 24);
        for s in &scenes {
            s.validate().unwrap();
            assert!(!s.boxes.is_empty());
        }
        assert_eq!(scenes, bundled_test_scenes());
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let scenes = bundled_test_scenes();
        save_dataset(dir.path(), &scenes).unwrap();
        assert_eq!(load_dataset(dir.path()).unwrap(), scenes);
    }

    #[test]
    fn missing_index_is_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(DetectionError::Io(_))));
    }
}
