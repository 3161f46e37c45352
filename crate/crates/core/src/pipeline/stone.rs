//! The three-stage STONE selection: gradient-based submodular subset selection, then
//! individual-entropy filtering, then greedy cumulative-entropy balancing.

use crate::balance::{greedy_balance_select, top_k1};
use crate::config::AlConfig;
use crate::error::{Result, StoneError};
use crate::oracle::{QuerySignals, ScenePrediction};
use crate::pool::PoolState;
use crate::submodular::{lazy_greedy_maximize, GroundSet, SubmodularFunction};
use crate::types::SceneId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Gradient,
    IndividualBalance,
    CumulativeBalance,
}

/// Ordered STONE selection of `min(scenes_per_round, Γ₂, |D_U|)` unlabeled scenes.
///
/// Active stages run in order; each intermediate stage keeps its configured size (Γ₁ or
/// 𝒦₁, clamped to the candidates left) and the last active stage emits the round quota.
pub fn select_stone(
    pool: &PoolState,
    signals: &QuerySignals,
    config: &AlConfig,
) -> Result<Vec<SceneId>> {
    config.validate()?;
    let mut candidates: Vec<SceneId> = pool.unlabeled().iter().copied().collect();
    if candidates.is_empty() {
        return Err(StoneError::EmptyUnlabeledPool);
    }
    let quota = config.stone_quota().min(candidates.len());
    let class_count = config.class_count;

    let mut stages = Vec::new();
    if config.stages.gbsss {
        stages.push(Stage::Gradient);
    }
    if config.stages.sdmcb_step1 {
        stages.push(Stage::IndividualBalance);
    }
    if config.stages.sdmcb_step2 {
        stages.push(Stage::CumulativeBalance);
    }
    let last = *stages.last().expect("validated: at least one stage");

    for stage in stages {
        let size = |configured: usize, available: usize| {
            if stage == last {
                quota
            } else {
                configured.min(available)
            }
        };
        candidates = match stage {
            Stage::Gradient => {
                let k = size(config.gamma1, candidates.len());
                let ground = GroundSet::from_signals(&candidates, signals)?;
                lazy_greedy_maximize(&SubmodularFunction::from_config(config), &ground, k)?
            }
            Stage::IndividualBalance => {
                let k = size(config.effective_k1(), candidates.len());
                let preds = predictions(&candidates, signals)?;
                top_k1(&preds, k, class_count)?
            }
            Stage::CumulativeBalance => {
                let preds = predictions(&candidates, signals)?;
                greedy_balance_select(&preds, pool.labeled_class_counts(), quota, class_count)?
                    .into_iter()
                    .map(|p| p.scene_id)
                    .collect()
            }
        };
    }
    Ok(candidates)
}

fn predictions<'a>(ids: &[SceneId], signals: &'a QuerySignals) -> Result<Vec<&'a ScenePrediction>> {
    ids.iter().map(|&id| signals.prediction(id)).collect()
}
