//! Synthetic scene pools with controlled class imbalance and difficulty mix.
//!
//! Each box draws its class from `class_frequencies` and its difficulty tier from
//! `difficulty_mix` independently. The box feature is the class centroid, a scaled
//! one-hot corner of feature space, plus isotropic Gaussian noise whose scale depends on
//! the difficulty tier, so HARD boxes are the ones the surrogate head confuses.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, StoneError};
use crate::rng::{derived_rng, Stream};
use crate::types::{BoxAnnotation, ClassId, Difficulty, Scene, SceneCatalog, SceneId, REG_DIM};

const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub class_count: usize,
    pub class_frequencies: Vec<f64>,
    /// Inclusive `[lo, hi]` range of boxes per scene.
    pub boxes_per_scene: [usize; 2],
    /// Probabilities of EASY, MODERATE, HARD.
    pub difficulty_mix: [f64; 3],
    pub feature_dim: usize,
    pub class_separation: f64,
    pub noise_scale_by_difficulty: BTreeMap<Difficulty, f64>,
    pub scene_count: usize,
    pub seed: u64,
}

impl SynthSpec {
    /// 500 scenes, three classes at 80/15/5.
    pub fn reference() -> Self {
        SynthSpec {
            class_count: 3,
            class_frequencies: vec![0.80, 0.15, 0.05],
            boxes_per_scene: [1, 8],
            difficulty_mix: [0.5, 0.3, 0.2],
            feature_dim: 8,
            class_separation: 3.0,
            noise_scale_by_difficulty: BTreeMap::from([
                (Difficulty::Easy, 0.5),
                (Difficulty::Moderate, 1.0),
                (Difficulty::Hard, 2.0),
            ]),
            scene_count: 500,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(StoneError::InvalidSynthSpec(msg));
        if self.class_count < 2 {
            return Err(StoneError::TooFewClasses(self.class_count));
        }
        if self.class_frequencies.len() != self.class_count {
            return bad(format!(
                "class_frequencies has {} entries for {} classes",
                self.class_frequencies.len(),
                self.class_count
            ));
        }
        check_distribution("class_frequencies", &self.class_frequencies)?;
        check_distribution("difficulty_mix", &self.difficulty_mix)?;
        let [lo, hi] = self.boxes_per_scene;
        if hi < lo {
            return bad(format!("boxes_per_scene [{lo}, {hi}] has hi < lo"));
        }
        if self.feature_dim < self.class_count {
            return bad(format!(
                "feature_dim {} must be >= class_count {} to place one-hot centroids",
                self.feature_dim, self.class_count
            ));
        }
        if !(self.class_separation >= 0.0 && self.class_separation.is_finite()) {
            return bad("class_separation must be a finite value >= 0".into());
        }
        for tier in Difficulty::ALL {
            match self.noise_scale_by_difficulty.get(&tier) {
                Some(s) if *s >= 0.0 && s.is_finite() => {}
                Some(s) => return bad(format!("noise scale {s} for {tier:?} must be >= 0")),
                None => return bad(format!("noise_scale_by_difficulty is missing {tier:?}")),
            }
        }
        Ok(())
    }

    fn noise(&self, tier: Difficulty) -> f64 {
        self.noise_scale_by_difficulty[&tier]
    }
}

fn check_distribution(name: &str, probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(StoneError::InvalidSynthSpec(format!("{name} is empty")));
    }
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(StoneError::InvalidSynthSpec(format!(
            "{name} entries must be finite and >= 0"
        )));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > SUM_TOLERANCE {
        return Err(StoneError::InvalidSynthSpec(format!(
            "{name} sums to {total}, expected 1"
        )));
    }
    Ok(())
}

/// Nominal box size (l, w, h) per class; classes past the third reuse a scaled template.
fn size_template(class: usize) -> [f64; 3] {
    match class {
        0 => [3.9, 1.6, 1.56],
        1 => [0.8, 0.6, 1.73],
        2 => [1.76, 0.6, 1.73],
        c => {
            let s = 1.0 + 0.25 * (c - 2) as f64;
            [1.5 * s, 0.8 * s, 1.5]
        }
    }
}

/// Generates `spec.scene_count` scenes with ids `0..scene_count`.
pub fn generate(spec: &SynthSpec) -> Result<Vec<Scene>> {
    spec.validate()?;
    let class_dist = WeightedIndex::new(&spec.class_frequencies)
        .map_err(|e| StoneError::InvalidSynthSpec(format!("class_frequencies: {e}")))?;
    let tier_dist = WeightedIndex::new(spec.difficulty_mix)
        .map_err(|e| StoneError::InvalidSynthSpec(format!("difficulty_mix: {e}")))?;
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rng = derived_rng(spec.seed, Stream::Synth, 0, 0);
    let [lo, hi] = spec.boxes_per_scene;

    let mut scenes = Vec::with_capacity(spec.scene_count);
    for i in 0..spec.scene_count {
        let n_boxes = rng.random_range(lo..=hi);
        let mut boxes = Vec::with_capacity(n_boxes);
        let mut features = Vec::with_capacity(n_boxes);
        for _ in 0..n_boxes {
            let class = class_dist.sample(&mut rng);
            let tier = Difficulty::ALL[tier_dist.sample(&mut rng)];
            let sigma = spec.noise(tier);
            let mut feature: Vec<f64> = (0..spec.feature_dim)
                .map(|_| sigma * unit.sample(&mut rng))
                .collect();
            feature[class] += spec.class_separation;

            let size = size_template(class);
            let mut reg_target = [0.0; REG_DIM];
            for target in reg_target.iter_mut().take(3) {
                *target = 10.0 * unit.sample(&mut rng);
            }
            for k in 0..3 {
                reg_target[3 + k] = size[k] * (1.0 + 0.05 * unit.sample(&mut rng));
            }
            reg_target[6] = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);

            boxes.push(BoxAnnotation {
                class_id: ClassId(class),
                difficulty: tier,
                reg_target,
            });
            features.push(feature);
        }
        scenes.push(Scene {
            scene_id: SceneId(i as u64),
            boxes,
            features,
        });
    }
    Ok(scenes)
}

/// Generates scenes and wraps them in a validated catalog.
pub fn generate_catalog(spec: &SynthSpec) -> Result<SceneCatalog> {
    SceneCatalog::new(generate(spec)?, spec.class_count, spec.feature_dim)
}

/// Ground-truth box tallies per class over `scenes`.
pub fn empirical_class_counts(scenes: &[Scene], class_count: usize) -> Vec<u64> {
    let mut counts = vec![0u64; class_count];
    for scene in scenes {
        for b in &scene.boxes {
            counts[b.class_id.index()] += 1;
        }
    }
    counts
}
