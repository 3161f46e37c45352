use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{BoxPrediction, GradientEmbedding, ScenePrediction};
use crate::config::{EmbeddingConfig, GradientAggregation, SurrogateConfig};
use crate::error::{Result, StoneError};
use crate::math::{cholesky_solve, dot, smooth_l1, smooth_l1_grad, softmax};
use crate::reweigh::{
    class_weights, margin_cross_entropy, margin_vector, smoothed_counts, ClassWeights,
    MarginVector,
};
use crate::rng::rng_from_seed;
use crate::types::{Scene, REG_DIM};

/// Linear detector head: a class-logit layer and a 7-output box regression layer over
/// the per-box features. No bias terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateHead {
    pub class_count: usize,
    pub feature_dim: usize,
    /// Row-major `class_count × feature_dim`.
    pub cls_weights: Vec<f64>,
    /// Row-major `REG_DIM × feature_dim`.
    pub reg_weights: Vec<f64>,
    pub dropout_rate: f64,
}

/// MC-dropout output for one scene: the prediction plus the hypothetical regression labels
/// (averaged box outputs) that the gradient embedding regresses against.
#[derive(Debug, Clone, PartialEq)]
pub struct McPrediction {
    pub prediction: ScenePrediction,
    pub reg_labels: Vec<[f64; REG_DIM]>,
}

impl SurrogateHead {
    pub fn zeros(class_count: usize, feature_dim: usize, dropout_rate: f64) -> Self {
        SurrogateHead {
            class_count,
            feature_dim,
            cls_weights: vec![0.0; class_count * feature_dim],
            reg_weights: vec![0.0; REG_DIM * feature_dim],
            dropout_rate,
        }
    }

    pub fn param_count(&self) -> usize {
        self.cls_weights.len() + self.reg_weights.len()
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.cls_weights
            .chunks_exact(self.feature_dim)
            .map(|row| dot(row, x))
            .collect()
    }

    pub fn regress(&self, x: &[f64]) -> [f64; REG_DIM] {
        let mut out = [0.0; REG_DIM];
        for (o, row) in out.iter_mut().zip(self.reg_weights.chunks_exact(self.feature_dim)) {
            *o = dot(row, x);
        }
        out
    }

    fn check_scene(&self, scene: &Scene) -> Result<()> {
        for f in &scene.features {
            if f.len() != self.feature_dim {
                return Err(StoneError::DimensionMismatch {
                    expected: self.feature_dim,
                    actual: f.len(),
                    context: "scene features vs head",
                });
            }
        }
        Ok(())
    }
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
fn top_eigenvalue(m: &[f64], n: usize) -> f64 {
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut lambda = 0.0;
    for _ in 0..100 {
        let w: Vec<f64> = m.chunks_exact(n).map(|row| dot(row, &v)).collect();
        let norm = dot(&w, &w).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm;
        v = w.into_iter().map(|x| x / norm).collect();
    }
    lambda
}

/// Fits the classification head by L2-regularized multinomial logistic regression
/// (full-batch gradient descent from zero) and the regression head by ridge regression.
pub fn fit_surrogate(
    labeled: &[&Scene],
    class_count: usize,
    feature_dim: usize,
    config: &SurrogateConfig,
) -> Result<SurrogateHead> {
    let mut xs: Vec<&[f64]> = Vec::new();
    let mut ys: Vec<usize> = Vec::new();
    let mut targets: Vec<&[f64; REG_DIM]> = Vec::new();
    for scene in labeled {
        for (b, f) in scene.boxes.iter().zip(&scene.features) {
            if f.len() != feature_dim {
                return Err(StoneError::DimensionMismatch {
                    expected: feature_dim,
                    actual: f.len(),
                    context: "labeled box features",
                });
            }
            if b.class_id.index() >= class_count {
                return Err(StoneError::ClassOutOfRange {
                    class: b.class_id.index(),
                    class_count,
                });
            }
            xs.push(f);
            ys.push(b.class_id.index());
            targets.push(&b.reg_target);
        }
    }
    if xs.is_empty() {
        return Err(StoneError::NoLabeledBoxes);
    }
    let n = xs.len() as f64;
    let d = feature_dim;

    let mut gram = vec![0.0; d * d];
    for x in &xs {
        for i in 0..d {
            for j in 0..d {
                gram[i * d + j] += x[i] * x[j];
            }
        }
    }

    let mut head = SurrogateHead::zeros(class_count, d, config.dropout_rate);

    // Softmax cross-entropy has curvature at most half the input second moment.
    let curvature = 0.5 * top_eigenvalue(&gram, d) / n + config.cls_l2;
    if curvature > 0.0 {
        let step = 1.0 / curvature;
        let mut grad = vec![0.0; class_count * d];
        for _ in 0..config.cls_iterations {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for (x, &y) in xs.iter().zip(&ys) {
                let p = softmax(&head.logits(x));
                for c in 0..class_count {
                    let r = p[c] - if c == y { 1.0 } else { 0.0 };
                    for j in 0..d {
                        grad[c * d + j] += r * x[j];
                    }
                }
            }
            for (w, g) in head.cls_weights.iter_mut().zip(&grad) {
                *w -= step * (g / n + config.cls_l2 * *w);
            }
        }
    }

    // Ridge: (XᵀX + λI) Wᵀ = XᵀY
    let mut a = gram;
    for i in 0..d {
        a[i * d + i] += config.reg_ridge;
    }
    let mut rhs = vec![0.0; d * REG_DIM];
    for (x, t) in xs.iter().zip(&targets) {
        for i in 0..d {
            for k in 0..REG_DIM {
                rhs[i * REG_DIM + k] += x[i] * t[k];
            }
        }
    }
    let solution = cholesky_solve(&a, d, &rhs, REG_DIM)
        .ok_or(StoneError::NonFinite("ridge system is not positive definite"))?;
    for k in 0..REG_DIM {
        for i in 0..d {
            head.reg_weights[k * d + i] = solution[i * REG_DIM + k];
        }
    }

    if head
        .cls_weights
        .iter()
        .chain(&head.reg_weights)
        .any(|w| !w.is_finite())
    {
        return Err(StoneError::NonFinite("surrogate weights"));
    }
    Ok(head)
}

/// Runs `passes` stochastic forward passes per box with inverted dropout on the input
/// features and averages class probabilities and box outputs.
pub fn predict_scene_mc(
    head: &SurrogateHead,
    scene: &Scene,
    passes: usize,
    seed: u64,
) -> Result<McPrediction> {
    if passes == 0 {
        return Err(StoneError::InvalidConfig("mc passes must be >= 1".into()));
    }
    head.check_scene(scene)?;
    let mut rng = rng_from_seed(seed);
    let keep = 1.0 - head.dropout_rate;
    let mut boxes = Vec::with_capacity(scene.box_count());
    let mut reg_labels = Vec::with_capacity(scene.box_count());
    let mut masked = vec![0.0; head.feature_dim];

    for x in &scene.features {
        let mut prob_sum = vec![0.0; head.class_count];
        let mut reg_sum = [0.0; REG_DIM];
        for _ in 0..passes {
            if head.dropout_rate > 0.0 {
                for (m, &v) in masked.iter_mut().zip(x) {
                    *m = if rng.random::<f64>() < keep { v / keep } else { 0.0 };
                }
            } else {
                masked.copy_from_slice(x);
            }
            for (s, p) in prob_sum.iter_mut().zip(softmax(&head.logits(&masked))) {
                *s += p;
            }
            for (s, r) in reg_sum.iter_mut().zip(head.regress(&masked)) {
                *s += r;
            }
        }
        let t = passes as f64;
        let probs: Vec<f64> = prob_sum.into_iter().map(|s| s / t).collect();
        let label = reg_sum.map(|s| s / t);
        let deterministic = head.regress(x);
        let reg_loss = deterministic
            .iter()
            .zip(&label)
            .map(|(a, b)| smooth_l1(a - b))
            .sum();
        boxes.push(BoxPrediction::from_probs(probs, reg_loss));
        reg_labels.push(label);
    }
    Ok(McPrediction {
        prediction: ScenePrediction::new(scene.scene_id, boxes, head.class_count)?,
        reg_labels,
    })
}

struct LossTerms {
    weights: ClassWeights,
    margins: MarginVector,
}

fn loss_terms(
    class_count: usize,
    labeled_counts: &[u64],
    config: &EmbeddingConfig,
) -> Result<LossTerms> {
    if labeled_counts.len() != class_count {
        return Err(StoneError::DimensionMismatch {
            expected: class_count,
            actual: labeled_counts.len(),
            context: "labeled class counts",
        });
    }
    if config.reweighing {
        let n = smoothed_counts(labeled_counts);
        Ok(LossTerms {
            weights: class_weights(&n)?,
            margins: margin_vector(&n)?,
        })
    } else {
        Ok(LossTerms {
            weights: ClassWeights::uniform(class_count),
            margins: MarginVector::zeros(class_count),
        })
    }
}

fn check_pair(head: &SurrogateHead, scene: &Scene, mc: &McPrediction) -> Result<()> {
    head.check_scene(scene)?;
    let n = scene.box_count();
    if mc.prediction.scene_id != scene.scene_id {
        return Err(StoneError::MissingSignals(scene.scene_id));
    }
    if mc.prediction.box_count() != n || mc.reg_labels.len() != n {
        return Err(StoneError::DimensionMismatch {
            expected: n,
            actual: mc.prediction.box_count(),
            context: "predicted boxes vs scene boxes",
        });
    }
    Ok(())
}

fn hyp_class_sizes(mc: &McPrediction) -> Vec<f64> {
    mc.prediction.pred_counts.iter().map(|&c| c as f64).collect()
}

/// Class-balanced detection loss of `scene` under `head`, with the hypothetical labels of
/// `mc` held fixed:
///
/// `L̂ = (1/C) Σ_c w̃_c · mean_{b: ŷ_b = c} smoothL1(R x_b − ŷreg_b) + mean_b CE(W x_b − m, ŷ_b)`
///
/// With [`GradientAggregation::Sum`] the result is multiplied by the box count.
pub fn scene_loss(
    head: &SurrogateHead,
    scene: &Scene,
    mc: &McPrediction,
    labeled_counts: &[u64],
    config: &EmbeddingConfig,
) -> Result<f64> {
    check_pair(head, scene, mc)?;
    let n = scene.box_count();
    if n == 0 {
        return Ok(0.0);
    }
    let terms = loss_terms(head.class_count, labeled_counts, config)?;
    let sizes = hyp_class_sizes(mc);
    let mut cls = 0.0;
    let mut per_class_reg = vec![0.0; head.class_count];
    for ((x, b), label) in scene.features.iter().zip(&mc.prediction.boxes).zip(&mc.reg_labels) {
        let c = b.hyp_class.index();
        cls += margin_cross_entropy(&head.logits(x), &terms.margins.margins, c);
        let out = head.regress(x);
        per_class_reg[c] += out
            .iter()
            .zip(label)
            .map(|(o, t)| smooth_l1(o - t))
            .sum::<f64>();
    }
    for (l, &size) in per_class_reg.iter_mut().zip(&sizes) {
        if size > 0.0 {
            *l /= size;
        }
    }
    let reg = crate::reweigh::reweighed_reg_loss(&per_class_reg, &terms.weights)?;
    let loss = reg + cls / n as f64;
    Ok(match config.aggregation {
        GradientAggregation::Mean => loss,
        GradientAggregation::Sum => loss * n as f64,
    })
}

/// Analytic gradient of [`scene_loss`] with respect to the head parameters, flattened as
/// `[cls_weights, reg_weights]`. Scenes without boxes map to the zero vector.
pub fn gradient_embedding(
    head: &SurrogateHead,
    scene: &Scene,
    mc: &McPrediction,
    labeled_counts: &[u64],
    config: &EmbeddingConfig,
) -> Result<GradientEmbedding> {
    check_pair(head, scene, mc)?;
    let d = head.feature_dim;
    let cls_len = head.class_count * d;
    let mut grad = vec![0.0; head.param_count()];
    let n = scene.box_count();
    if n == 0 {
        return Ok(GradientEmbedding {
            scene_id: scene.scene_id,
            grad,
        });
    }
    let terms = loss_terms(head.class_count, labeled_counts, config)?;
    let sizes = hyp_class_sizes(mc);
    let c_total = head.class_count as f64;
    let scale = match config.aggregation {
        GradientAggregation::Mean => 1.0,
        GradientAggregation::Sum => n as f64,
    };
    let cls_coef = scale / n as f64;

    for ((x, b), label) in scene.features.iter().zip(&mc.prediction.boxes).zip(&mc.reg_labels) {
        let y = b.hyp_class.index();
        let shifted: Vec<f64> = head
            .logits(x)
            .iter()
            .zip(&terms.margins.margins)
            .map(|(z, m)| z - m)
            .collect();
        let p = softmax(&shifted);
        for c in 0..head.class_count {
            let r = cls_coef * (p[c] - if c == y { 1.0 } else { 0.0 });
            for j in 0..d {
                grad[c * d + j] += r * x[j];
            }
        }
        let reg_coef = scale * terms.weights.normalized[y] / (c_total * sizes[y]);
        let out = head.regress(x);
        for k in 0..REG_DIM {
            let r = reg_coef * smooth_l1_grad(out[k] - label[k]);
            for j in 0..d {
                grad[cls_len + k * d + j] += r * x[j];
            }
        }
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(StoneError::NonFinite("gradient embedding"));
    }
    Ok(GradientEmbedding {
        scene_id: scene.scene_id,
        grad,
    })
}
