//! Detector stand-in: per-scene predictions, hypothetical labels and gradient embeddings.
//!
//! The synthetic route fits a linear [`SurrogateHead`] on the labeled boxes each round and
//! runs stochastic forward passes over every scene. External detectors can feed the same
//! quantities through the line-delimited dump format in [`dump`].

pub mod dump;
mod surrogate;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::AlConfig;
use crate::error::{Result, StoneError};
use crate::math::argmax;
use crate::pool::PoolState;
use crate::rng::{derive_seed, Stream};
use crate::types::{ClassId, SceneCatalog, SceneId, REG_DIM};

pub use dump::{export_dump, import_dump, read_dump, write_dump, DUMP_FORMAT, DUMP_VERSION};
pub use surrogate::{
    fit_surrogate, gradient_embedding, predict_scene_mc, scene_loss, McPrediction, SurrogateHead,
};

/// Tolerance on the probability simplex for predictions.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxPrediction {
    /// MC-averaged class probabilities.
    pub class_probs: Vec<f64>,
    /// Hypothetical class label, the argmax of `class_probs`.
    pub hyp_class: ClassId,
    /// Smooth-L1 distance between the deterministic box and the hypothetical box.
    pub reg_loss: f64,
}

impl BoxPrediction {
    pub fn from_probs(class_probs: Vec<f64>, reg_loss: f64) -> Self {
        let hyp_class = ClassId(argmax(&class_probs));
        BoxPrediction {
            class_probs,
            hyp_class,
            reg_loss,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenePrediction {
    pub scene_id: SceneId,
    pub boxes: Vec<BoxPrediction>,
    /// Number of boxes per hypothetical class (n_c).
    pub pred_counts: Vec<u64>,
}

impl ScenePrediction {
    pub fn new(scene_id: SceneId, boxes: Vec<BoxPrediction>, class_count: usize) -> Result<Self> {
        let mut pred_counts = vec![0u64; class_count];
        for b in &boxes {
            let c = b.hyp_class.index();
            if c >= class_count {
                return Err(StoneError::ClassOutOfRange { class: c, class_count });
            }
            pred_counts[c] += 1;
        }
        Ok(ScenePrediction {
            scene_id,
            boxes,
            pred_counts,
        })
    }

    /// Builds a prediction that only carries hypothetical counts. Used where box-level
    /// outputs are irrelevant, e.g. balancing tests.
    pub fn from_counts(scene_id: SceneId, counts: &[u64]) -> Self {
        let class_count = counts.len();
        let mut boxes = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            let mut probs = vec![0.0; class_count];
            probs[c] = 1.0;
            for _ in 0..n {
                boxes.push(BoxPrediction {
                    class_probs: probs.clone(),
                    hyp_class: ClassId(c),
                    reg_loss: 0.0,
                });
            }
        }
        ScenePrediction {
            scene_id,
            boxes,
            pred_counts: counts.to_vec(),
        }
    }

    pub fn box_count(&self) -> usize {
        self.boxes.len()
    }

    pub fn class_count(&self) -> usize {
        self.pred_counts.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientEmbedding {
    pub scene_id: SceneId,
    pub grad: Vec<f64>,
}

/// Everything the selection strategies read about the scenes of one round.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QuerySignals {
    pub predictions: BTreeMap<SceneId, ScenePrediction>,
    pub embeddings: BTreeMap<SceneId, GradientEmbedding>,
}

impl QuerySignals {
    pub fn from_records(records: Vec<(ScenePrediction, GradientEmbedding)>) -> Self {
        let mut signals = QuerySignals::default();
        for (p, g) in records {
            signals.embeddings.insert(g.scene_id, g);
            signals.predictions.insert(p.scene_id, p);
        }
        signals
    }

    pub fn prediction(&self, id: SceneId) -> Result<&ScenePrediction> {
        self.predictions.get(&id).ok_or(StoneError::MissingSignals(id))
    }

    pub fn embedding(&self, id: SceneId) -> Result<&GradientEmbedding> {
        self.embeddings.get(&id).ok_or(StoneError::MissingSignals(id))
    }

    pub fn len(&self) -> usize {
        self.predictions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictions.is_empty()
    }
}

/// Per-scene dropout seed, a hash of run seed, round and scene id.
pub fn scene_seed(run_seed: u64, round: usize, scene: SceneId) -> u64 {
    derive_seed(run_seed, Stream::McDropout, round as u64, scene.0)
}

/// Fits the surrogate on the labeled scenes and produces predictions and gradient
/// embeddings for every scene in the catalog (labeled scenes are needed by the
/// core-set baseline).
pub fn compute_signals(
    catalog: &SceneCatalog,
    pool: &PoolState,
    config: &AlConfig,
    run_seed: u64,
) -> Result<(SurrogateHead, QuerySignals)> {
    let labeled = pool
        .labeled()
        .iter()
        .map(|&id| catalog.get(id))
        .collect::<Result<Vec<_>>>()?;
    let head = fit_surrogate(
        &labeled,
        catalog.class_count(),
        catalog.feature_dim(),
        &config.surrogate,
    )?;
    let round = pool.round_index();
    let mut signals = QuerySignals::default();
    for scene in catalog.scenes() {
        let seed = scene_seed(run_seed, round, scene.scene_id);
        let mc = predict_scene_mc(&head, scene, config.mc_passes, seed)?;
        let emb = gradient_embedding(
            &head,
            scene,
            &mc,
            pool.labeled_class_counts(),
            &config.embedding,
        )?;
        signals.embeddings.insert(scene.scene_id, emb);
        signals.predictions.insert(scene.scene_id, mc.prediction);
    }
    Ok((head, signals))
}

/// Length of the flattened gradient for a head over `feature_dim` inputs.
pub fn grad_dim(class_count: usize, feature_dim: usize) -> usize {
    (class_count + REG_DIM) * feature_dim
}
