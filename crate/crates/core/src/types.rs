//! Scene-level domain types shared across the pipeline.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, StoneError};

/// Number of regression targets per box: center xyz, size lwh, heading.
pub const REG_DIM: usize = 7;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SceneId(pub u64);

impl fmt::Display for SceneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// 0-based semantic class index.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct ClassId(pub usize);

impl ClassId {
    pub fn new(value: usize, class_count: usize) -> Result<Self> {
        if value < class_count {
            Ok(ClassId(value))
        } else {
            Err(StoneError::ClassOutOfRange {
                class: value,
                class_count,
            })
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Difficulty {
    Easy,
    Moderate,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Moderate, Difficulty::Hard];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxAnnotation {
    pub class_id: ClassId,
    pub difficulty: Difficulty,
    pub reg_target: [f64; REG_DIM],
}

/// One point-cloud frame, reduced to its box annotations and per-box features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub scene_id: SceneId,
    pub boxes: Vec<BoxAnnotation>,
    /// One feature vector per box, aligned with `boxes`.
    pub features: Vec<Vec<f64>>,
}

impl Scene {
    pub fn box_count(&self) -> usize {
        self.boxes.len()
    }

    /// Ground-truth per-class box counts.
    pub fn class_counts(&self, class_count: usize) -> Vec<u64> {
        let mut counts = vec![0u64; class_count];
        for b in &self.boxes {
            counts[b.class_id.index()] += 1;
        }
        counts
    }
}

/// Validated, id-indexed collection of scenes with a fixed class count and feature width.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneCatalog {
    scenes: Vec<Scene>,
    index: HashMap<SceneId, usize>,
    class_count: usize,
    feature_dim: usize,
}

impl SceneCatalog {
    pub fn new(scenes: Vec<Scene>, class_count: usize, feature_dim: usize) -> Result<Self> {
        if class_count < 2 {
            return Err(StoneError::TooFewClasses(class_count));
        }
        let mut index = HashMap::with_capacity(scenes.len());
        for (pos, scene) in scenes.iter().enumerate() {
            if index.insert(scene.scene_id, pos).is_some() {
                return Err(StoneError::DuplicateScene(scene.scene_id));
            }
            if scene.features.len() != scene.boxes.len() {
                return Err(StoneError::DimensionMismatch {
                    expected: scene.boxes.len(),
                    actual: scene.features.len(),
                    context: "feature vectors per scene",
                });
            }
            for b in &scene.boxes {
                ClassId::new(b.class_id.index(), class_count)?;
                if b.reg_target.iter().any(|v| !v.is_finite()) {
                    return Err(StoneError::NonFinite("regression target"));
                }
            }
            for f in &scene.features {
                if f.len() != feature_dim {
                    return Err(StoneError::DimensionMismatch {
                        expected: feature_dim,
                        actual: f.len(),
                        context: "box feature vector",
                    });
                }
                if f.iter().any(|v| !v.is_finite()) {
                    return Err(StoneError::NonFinite("box features"));
                }
            }
        }
        Ok(SceneCatalog {
            scenes,
            index,
            class_count,
            feature_dim,
        })
    }

    pub fn get(&self, id: SceneId) -> Result<&Scene> {
        self.index
            .get(&id)
            .map(|&pos| &self.scenes[pos])
            .ok_or(StoneError::UnknownScene(id))
    }

    pub fn contains(&self, id: SceneId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn scenes(&self) -> &[Scene] {
        &self.scenes
    }

    pub fn len(&self) -> usize {
        self.scenes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenes.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn into_scenes(self) -> Vec<Scene> {
        self.scenes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene(id: u64, classes: &[usize], dim: usize) -> Scene {
        Scene {
            scene_id: SceneId(id),
            boxes: classes
                .iter()
                .map(|&c| BoxAnnotation {
                    class_id: ClassId(c),
                    difficulty: Difficulty::Easy,
                    reg_target: [0.0; REG_DIM],
                })
                .collect(),
            features: classes.iter().map(|_| vec![0.0; dim]).collect(),
        }
    }

    #[test]
    fn catalog_rejects_duplicates_and_bad_classes() {
        let dup = vec![scene(1, &[0], 2), scene(1, &[1], 2)];
        assert_eq!(
            SceneCatalog::new(dup, 2, 2).unwrap_err(),
            StoneError::DuplicateScene(SceneId(1))
        );
        let bad = vec![scene(1, &[2], 2)];
        assert!(matches!(
            SceneCatalog::new(bad, 2, 2),
            Err(StoneError::ClassOutOfRange { class: 2, .. })
        ));
        let wrong_dim = vec![scene(1, &[0], 3)];
        assert!(SceneCatalog::new(wrong_dim, 2, 2).is_err());
    }

    #[test]
    fn class_counts_tally_boxes() {
        let s = scene(3, &[0, 0, 1], 1);
        assert_eq!(s.class_counts(3), vec![2, 1, 0]);
    }
}
