//! Baseline query strategies: random, max-entropy, core-set and BADGE-style seeding.

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Result, StoneError};
use crate::math::{l2_norm, shannon_entropy, squared_distance};
use crate::oracle::{QuerySignals, ScenePrediction};
use crate::pool::PoolState;
use crate::rng::{derived_rng, Stream};
use crate::types::SceneId;

fn unlabeled_with_quota(pool: &PoolState, quota: usize) -> Result<Vec<SceneId>> {
    let ids: Vec<SceneId> = pool.unlabeled().iter().copied().collect();
    if ids.is_empty() {
        return Err(StoneError::EmptyUnlabeledPool);
    }
    if quota > ids.len() {
        return Err(StoneError::SelectionTooLarge {
            requested: quota,
            available: ids.len(),
        });
    }
    Ok(ids)
}

/// Uniform sample without replacement.
pub fn select_random(pool: &PoolState, quota: usize, seed: u64) -> Result<Vec<SceneId>> {
    let ids = unlabeled_with_quota(pool, quota)?;
    let mut rng = derived_rng(seed, Stream::Random, pool.round_index() as u64, 0);
    Ok(sample(&mut rng, ids.len(), quota)
        .into_iter()
        .map(|i| ids[i])
        .collect())
}

/// Mean per-box entropy of the MC-averaged class probabilities; 0 for empty scenes.
pub fn mean_box_entropy(pred: &ScenePrediction) -> f64 {
    if pred.boxes.is_empty() {
        return 0.0;
    }
    pred.boxes
        .iter()
        .map(|b| shannon_entropy(&b.class_probs))
        .sum::<f64>()
        / pred.boxes.len() as f64
}

pub fn select_max_entropy(
    pool: &PoolState,
    signals: &QuerySignals,
    quota: usize,
) -> Result<Vec<SceneId>> {
    let ids = unlabeled_with_quota(pool, quota)?;
    let mut scored = ids
        .into_iter()
        .map(|id| Ok((mean_box_entropy(signals.prediction(id)?), id)))
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(scored.into_iter().take(quota).map(|(_, id)| id).collect())
}

/// Furthest-first traversal: repeatedly takes the candidate farthest from every center,
/// starting from `centers`. Without centers the first pick is the lowest id.
pub fn k_center_greedy(
    candidates: &[(SceneId, &[f64])],
    centers: &[&[f64]],
    quota: usize,
) -> Vec<SceneId> {
    let mut nearest: Vec<f64> = candidates
        .iter()
        .map(|(_, x)| {
            centers
                .iter()
                .map(|c| squared_distance(x, c))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut taken = vec![false; candidates.len()];
    let mut picks = Vec::with_capacity(quota);
    for _ in 0..quota.min(candidates.len()) {
        let mut best: Option<usize> = None;
        for i in (0..candidates.len()).filter(|&i| !taken[i]) {
            best = match best {
                Some(b)
                    if nearest[i] < nearest[b]
                        || (nearest[i] == nearest[b] && candidates[i].0 > candidates[b].0) =>
                {
                    Some(b)
                }
                _ => Some(i),
            };
        }
        let b = best.expect("candidate available");
        taken[b] = true;
        picks.push(candidates[b].0);
        let chosen = candidates[b].1;
        for (i, (_, x)) in candidates.iter().enumerate() {
            nearest[i] = nearest[i].min(squared_distance(x, chosen));
        }
    }
    picks
}

/// Core-set selection over gradient embeddings, seeded with the labeled embeddings.
pub fn select_coreset(
    pool: &PoolState,
    signals: &QuerySignals,
    quota: usize,
) -> Result<Vec<SceneId>> {
    let ids = unlabeled_with_quota(pool, quota)?;
    let candidates = ids
        .iter()
        .map(|&id| Ok((id, signals.embedding(id)?.grad.as_slice())))
        .collect::<Result<Vec<_>>>()?;
    let centers = pool
        .labeled()
        .iter()
        .map(|&id| Ok(signals.embedding(id)?.grad.as_slice()))
        .collect::<Result<Vec<_>>>()?;
    Ok(k_center_greedy(&candidates, &centers, quota))
}

/// k-means++ seeding: the largest-norm embedding first, then D²-weighted sampling.
pub fn kmeanspp_seeding<R: Rng>(
    candidates: &[(SceneId, &[f64])],
    quota: usize,
    rng: &mut R,
) -> Vec<SceneId> {
    let quota = quota.min(candidates.len());
    if quota == 0 {
        return Vec::new();
    }
    let mut taken = vec![false; candidates.len()];
    let mut first = 0;
    for i in 1..candidates.len() {
        let (ni, nf) = (l2_norm(candidates[i].1), l2_norm(candidates[first].1));
        if ni > nf || (ni == nf && candidates[i].0 < candidates[first].0) {
            first = i;
        }
    }
    taken[first] = true;
    let mut picks = vec![candidates[first].0];
    let mut nearest: Vec<f64> = candidates
        .iter()
        .map(|(_, x)| squared_distance(x, candidates[first].1))
        .collect();

    while picks.len() < quota {
        let total: f64 = (0..candidates.len())
            .filter(|&i| !taken[i])
            .map(|i| nearest[i])
            .sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            let mut last = None;
            for i in (0..candidates.len()).filter(|&i| !taken[i] && nearest[i] > 0.0) {
                acc += nearest[i];
                last = Some(i);
                if acc > target {
                    chosen = Some(i);
                    break;
                }
            }
            chosen.or(last).expect("positive mass implies a candidate")
        } else {
            (0..candidates.len())
                .filter(|&i| !taken[i])
                .min_by_key(|&i| candidates[i].0)
                .expect("candidate available")
        };
        taken[next] = true;
        picks.push(candidates[next].0);
        for (i, (_, x)) in candidates.iter().enumerate() {
            nearest[i] = nearest[i].min(squared_distance(x, candidates[next].1));
        }
    }
    picks
}

pub fn select_badge(
    pool: &PoolState,
    signals: &QuerySignals,
    quota: usize,
    seed: u64,
) -> Result<Vec<SceneId>> {
    let ids = unlabeled_with_quota(pool, quota)?;
    let candidates = ids
        .iter()
        .map(|&id| Ok((id, signals.embedding(id)?.grad.as_slice())))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = derived_rng(seed, Stream::Badge, pool.round_index() as u64, 0);
    Ok(kmeanspp_seeding(&candidates, quota, &mut rng))
}
