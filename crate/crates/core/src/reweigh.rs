//! Class-balanced detection loss: per-class reweighing of the regression loss and
//! count-dependent margins on the classification logits.

use serde::{Deserialize, Serialize};

use crate::error::{Result, StoneError};
use crate::math::log_sum_exp;
use crate::types::ClassId;

/// Inverse-frequency weights `w_c = 1/n_c` and their max-normalized form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
}

impl ClassWeights {
    /// All-ones weights, i.e. reweighing switched off.
    pub fn uniform(class_count: usize) -> Self {
        ClassWeights {
            raw: vec![1.0; class_count],
            normalized: vec![1.0; class_count],
        }
    }
}

/// Per-class margins `m_c = 1/√n_c` subtracted from the logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginVector {
    pub margins: Vec<f64>,
}

impl MarginVector {
    pub fn zeros(class_count: usize) -> Self {
        MarginVector {
            margins: vec![0.0; class_count],
        }
    }
}

fn check_counts(counts: &[u64]) -> Result<()> {
    if counts.len() < 2 {
        return Err(StoneError::TooFewClasses(counts.len()));
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(StoneError::ZeroClassCount(c));
    }
    Ok(())
}

/// Add-one smoothing applied to labeled-set counts before weighting.
pub fn smoothed_counts(counts: &[u64]) -> Vec<u64> {
    counts.iter().map(|&n| n + 1).collect()
}

pub fn class_weights(counts: &[u64]) -> Result<ClassWeights> {
    check_counts(counts)?;
    let raw: Vec<f64> = counts.iter().map(|&n| 1.0 / n as f64).collect();
    // The smallest count has the largest weight; dividing by it yields exactly 1.
    let max = raw.iter().copied().fold(f64::MIN, f64::max);
    let normalized = raw.iter().map(|w| w / max).collect();
    Ok(ClassWeights { raw, normalized })
}

pub fn margin_vector(counts: &[u64]) -> Result<MarginVector> {
    check_counts(counts)?;
    Ok(MarginVector {
        margins: counts.iter().map(|&n| 1.0 / (n as f64).sqrt()).collect(),
    })
}

/// `(1/C) Σ_c w̃_c · L_reg^c`. Classes without boxes should pass a zero loss.
pub fn reweighed_reg_loss(per_class_losses: &[f64], weights: &ClassWeights) -> Result<f64> {
    if per_class_losses.len() != weights.normalized.len() {
        return Err(StoneError::DimensionMismatch {
            expected: weights.normalized.len(),
            actual: per_class_losses.len(),
            context: "per-class regression losses",
        });
    }
    if per_class_losses.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(StoneError::NonFinite("per-class regression loss"));
    }
    let c = per_class_losses.len() as f64;
    Ok(per_class_losses
        .iter()
        .zip(&weights.normalized)
        .map(|(l, w)| w * l)
        .sum::<f64>()
        / c)
}

/// Cross-entropy of `softmax(logits − margins)` against `label`.
pub fn margin_cross_entropy(logits: &[f64], margins: &[f64], label: usize) -> f64 {
    let shifted: Vec<f64> = logits.iter().zip(margins).map(|(z, m)| z - m).collect();
    log_sum_exp(&shifted) - shifted[label]
}

/// Mean over boxes of the margin-shifted softmax cross-entropy. Zero boxes give zero.
pub fn balanced_cls_loss(
    labels: &[ClassId],
    logits: &[Vec<f64>],
    margins: &MarginVector,
) -> Result<f64> {
    if labels.len() != logits.len() {
        return Err(StoneError::DimensionMismatch {
            expected: labels.len(),
            actual: logits.len(),
            context: "logit rows per label",
        });
    }
    if labels.is_empty() {
        return Ok(0.0);
    }
    let class_count = margins.margins.len();
    let mut total = 0.0;
    for (label, row) in labels.iter().zip(logits) {
        if label.index() >= class_count {
            return Err(StoneError::ClassOutOfRange {
                class: label.index(),
                class_count,
            });
        }
        if row.len() != class_count {
            return Err(StoneError::DimensionMismatch {
                expected: class_count,
                actual: row.len(),
                context: "logit row",
            });
        }
        if row.iter().any(|z| !z.is_finite()) {
            return Err(StoneError::NonFinite("logits"));
        }
        total += margin_cross_entropy(row, &margins.margins, label.index());
    }
    Ok(total / labels.len() as f64)
}
