//! Monotone set functions over gradient embeddings and their greedy maximizers.

mod greedy;

use std::collections::HashMap;

use crate::config::{AlConfig, SubmodularKind};
use crate::error::{Result, StoneError};
use crate::math::l2_norm;
use crate::oracle::{GradientEmbedding, QuerySignals};
use crate::types::SceneId;

pub use greedy::{brute_force_opt, greedy_maximize, lazy_greedy_maximize, BRUTE_FORCE_LIMIT};

/// Guard against zero-mass gradient distributions.
pub const MU_EPSILON: f64 = 1e-12;

/// Concave link `g(x) = ln(1 + x)`.
pub fn log_link(x: f64) -> f64 {
    x.ln_1p()
}

/// Entropy of the L1-normalized absolute gradient, `−Σ p_j ln p_j` with
/// `p_j = |g_j| / (Σ|g| + ε)`.
pub fn mu(grad: &[f64]) -> f64 {
    let mass: f64 = grad.iter().map(|g| g.abs()).sum();
    if mass == 0.0 {
        return 0.0;
    }
    let denom = mass + MU_EPSILON;
    -grad
        .iter()
        .map(|g| g.abs() / denom)
        .filter(|&p| p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
}

/// Candidate scenes with their gradient embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundSet {
    items: Vec<SceneId>,
    embeddings: Vec<Vec<f64>>,
    position: HashMap<SceneId, usize>,
}

impl GroundSet {
    pub fn new(embeddings: Vec<GradientEmbedding>) -> Result<Self> {
        let mut position = HashMap::with_capacity(embeddings.len());
        let dim = embeddings.first().map(|e| e.grad.len());
        let mut items = Vec::with_capacity(embeddings.len());
        let mut vectors = Vec::with_capacity(embeddings.len());
        for (i, e) in embeddings.into_iter().enumerate() {
            if position.insert(e.scene_id, i).is_some() {
                return Err(StoneError::DuplicateScene(e.scene_id));
            }
            if Some(e.grad.len()) != dim {
                return Err(StoneError::DimensionMismatch {
                    expected: dim.unwrap_or(0),
                    actual: e.grad.len(),
                    context: "gradient embedding length",
                });
            }
            if e.grad.iter().any(|g| !g.is_finite()) {
                return Err(StoneError::NonFinite("gradient embedding"));
            }
            items.push(e.scene_id);
            vectors.push(e.grad);
        }
        Ok(GroundSet {
            items,
            embeddings: vectors,
            position,
        })
    }

    /// Ground set over `ids` using the embeddings in `signals`.
    pub fn from_signals(ids: &[SceneId], signals: &QuerySignals) -> Result<Self> {
        let embeddings = ids
            .iter()
            .map(|&id| signals.embedding(id).cloned())
            .collect::<Result<Vec<_>>>()?;
        GroundSet::new(embeddings)
    }

    pub fn items(&self) -> &[SceneId] {
        &self.items
    }

    pub fn embedding(&self, index: usize) -> &[f64] {
        &self.embeddings[index]
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    fn indices_of(&self, subset: &[SceneId]) -> Result<Vec<usize>> {
        subset
            .iter()
            .map(|id| self.position.get(id).copied().ok_or(StoneError::UnknownScene(*id)))
            .collect()
    }
}

/// A set function choice plus its parameters.
#[derive(Debug, Clone, Copy)]
pub struct SubmodularFunction {
    pub kind: SubmodularKind,
    /// Coverage threshold on the `[0, 1]` similarity scale (max coverage only).
    pub tau: f64,
    /// Concave link of the feature-based and literal forms.
    pub link: fn(f64) -> f64,
}

impl SubmodularFunction {
    pub fn new(kind: SubmodularKind) -> Self {
        SubmodularFunction {
            kind,
            tau: 0.9,
            link: log_link,
        }
    }

    pub fn from_config(config: &AlConfig) -> Self {
        SubmodularFunction {
            tau: config.max_coverage_tau,
            ..Self::new(config.submodular_kind)
        }
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    /// Replaces the concave link; used by the verification battery's mutation checks.
    pub fn with_link(mut self, link: fn(f64) -> f64) -> Self {
        self.link = link;
        self
    }

    /// `f(S)` evaluated from scratch.
    pub fn evaluate(&self, ground: &GroundSet, subset: &[SceneId]) -> Result<f64> {
        let idx = ground.indices_of(subset)?;
        Ok(self.prepare(ground).evaluate_indices(&idx))
    }

    pub(crate) fn prepare<'a>(&self, ground: &'a GroundSet) -> Prepared<'a> {
        let n = ground.len();
        let similarity = match self.kind {
            SubmodularKind::FacilityLocation | SubmodularKind::MaxCoverage => {
                let norms: Vec<f64> = ground.embeddings.iter().map(|e| l2_norm(e)).collect();
                let mut sim = vec![0.0; n * n];
                for i in 0..n {
                    for j in i..n {
                        let cos = if norms[i] > 0.0 && norms[j] > 0.0 {
                            (crate::math::dot(&ground.embeddings[i], &ground.embeddings[j])
                                / (norms[i] * norms[j]))
                                .clamp(-1.0, 1.0)
                        } else {
                            0.0
                        };
                        let s = 0.5 * (1.0 + cos);
                        sim[i * n + j] = s;
                        sim[j * n + i] = s;
                    }
                }
                sim
            }
            _ => Vec::new(),
        };
        let scores = match self.kind {
            SubmodularKind::LiteralEq5 => ground
                .embeddings
                .iter()
                .map(|e| (self.link)(mu(e)))
                .collect(),
            _ => Vec::new(),
        };
        Prepared {
            function: *self,
            ground,
            similarity,
            scores,
        }
    }
}

/// A function bound to a ground set, with pairwise similarities or per-item scores
/// precomputed.
pub(crate) struct Prepared<'a> {
    function: SubmodularFunction,
    ground: &'a GroundSet,
    similarity: Vec<f64>,
    scores: Vec<f64>,
}

/// Incremental greedy state: whatever summary of the current selection the gains need.
#[derive(Debug, Clone)]
pub(crate) enum GainState {
    /// Accumulated absolute gradient mass per coordinate.
    Mass(Vec<f64>),
    Additive,
    /// Best similarity of each ground item to the selection.
    Best(Vec<f64>),
    Covered(Vec<bool>),
}

impl Prepared<'_> {
    fn sim(&self, i: usize, j: usize) -> f64 {
        self.similarity[i * self.ground.len() + j]
    }

    pub(crate) fn evaluate_indices(&self, subset: &[usize]) -> f64 {
        let n = self.ground.len();
        let link = self.function.link;
        match self.function.kind {
            SubmodularKind::FeatureBased => {
                let dim = self.ground.embeddings.first().map_or(0, Vec::len);
                (0..dim)
                    .map(|j| {
                        let mass: f64 = subset
                            .iter()
                            .map(|&i| self.ground.embeddings[i][j].abs())
                            .sum();
                        link(mass)
                    })
                    .sum()
            }
            SubmodularKind::LiteralEq5 => subset.iter().map(|&i| self.scores[i]).sum(),
            SubmodularKind::FacilityLocation => {
                if subset.is_empty() {
                    return 0.0;
                }
                (0..n)
                    .map(|u| {
                        subset
                            .iter()
                            .map(|&j| self.sim(u, j))
                            .fold(f64::NEG_INFINITY, f64::max)
                    })
                    .sum()
            }
            SubmodularKind::MaxCoverage => (0..n)
                .filter(|&u| subset.iter().any(|&j| self.sim(u, j) >= self.function.tau))
                .count() as f64,
        }
    }

    pub(crate) fn empty_state(&self) -> GainState {
        let n = self.ground.len();
        match self.function.kind {
            SubmodularKind::FeatureBased => {
                GainState::Mass(vec![0.0; self.ground.embeddings.first().map_or(0, Vec::len)])
            }
            SubmodularKind::LiteralEq5 => GainState::Additive,
            SubmodularKind::FacilityLocation => GainState::Best(vec![0.0; n]),
            SubmodularKind::MaxCoverage => GainState::Covered(vec![false; n]),
        }
    }

    /// `f(S ∪ {i}) − f(S)` for the selection summarized by `state`.
    pub(crate) fn gain(&self, state: &GainState, i: usize) -> f64 {
        let link = self.function.link;
        match state {
            GainState::Mass(acc) => acc
                .iter()
                .zip(&self.ground.embeddings[i])
                .map(|(&a, g)| link(a + g.abs()) - link(a))
                .sum(),
            GainState::Additive => self.scores[i],
            GainState::Best(best) => best
                .iter()
                .enumerate()
                .map(|(u, &b)| (self.sim(u, i) - b).max(0.0))
                .sum(),
            GainState::Covered(covered) => covered
                .iter()
                .enumerate()
                .filter(|&(u, &c)| !c && self.sim(u, i) >= self.function.tau)
                .count() as f64,
        }
    }

    pub(crate) fn add(&self, state: &mut GainState, i: usize) {
        match state {
            GainState::Mass(acc) => {
                for (a, g) in acc.iter_mut().zip(&self.ground.embeddings[i]) {
                    *a += g.abs();
                }
            }
            GainState::Additive => {}
            GainState::Best(best) => {
                for (u, b) in best.iter_mut().enumerate() {
                    *b = b.max(self.sim(u, i));
                }
            }
            GainState::Covered(covered) => {
                let tau = self.function.tau;
                for (u, c) in covered.iter_mut().enumerate() {
                    if self.sim(u, i) >= tau {
                        *c = true;
                    }
                }
            }
        }
    }
}
