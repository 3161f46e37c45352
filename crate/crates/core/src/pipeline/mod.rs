//! Round driver, query strategies and per-round reporting.

mod baselines;
mod stone;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::config::AlConfig;
use crate::error::{Result, StoneError};
use crate::math::shannon_entropy;
use crate::oracle::{compute_signals, QuerySignals};
use crate::pool::PoolState;
use crate::submodular::{GroundSet, SubmodularFunction};
use crate::types::{SceneCatalog, SceneId};

pub use baselines::{
    k_center_greedy, kmeanspp_seeding, mean_box_entropy, select_badge, select_coreset,
    select_max_entropy, select_random,
};
pub use stone::select_stone;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Uses `AlConfig::stages` to pick which stages run.
    Stone,
    Random,
    MaxEntropy,
    Coreset,
    Badge,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Stone,
        Strategy::Random,
        Strategy::MaxEntropy,
        Strategy::Coreset,
        Strategy::Badge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Stone => "stone",
            Strategy::Random => "random",
            Strategy::MaxEntropy => "entropy",
            Strategy::Coreset => "coreset",
            Strategy::Badge => "badge",
        }
    }

    /// Scenes requested per round before budget truncation.
    pub fn quota(self, config: &AlConfig) -> usize {
        match self {
            Strategy::Stone => config.stone_quota(),
            _ => config.scenes_per_round,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = StoneError;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let valid: Vec<&str> = Strategy::ALL.iter().map(|k| k.name()).collect();
                StoneError::InvalidConfig(format!(
                    "unknown strategy '{s}' (valid: {})",
                    valid.join(", ")
                ))
            })
    }
}

/// Runs one strategy on the current pool. The result is ordered; budget truncation keeps
/// a prefix.
pub fn select(
    strategy: Strategy,
    pool: &PoolState,
    signals: &QuerySignals,
    config: &AlConfig,
    seed: u64,
) -> Result<Vec<SceneId>> {
    if pool.unlabeled().is_empty() {
        return Err(StoneError::EmptyUnlabeledPool);
    }
    let quota = strategy.quota(config).min(pool.unlabeled().len());
    match strategy {
        Strategy::Stone => select_stone(pool, signals, config),
        Strategy::Random => select_random(pool, quota, seed),
        Strategy::MaxEntropy => select_max_entropy(pool, signals, quota),
        Strategy::Coreset => select_coreset(pool, signals, quota),
        Strategy::Badge => select_badge(pool, signals, quota, seed),
    }
}

/// Keeps the longest prefix of `selected` whose ground-truth boxes fit in `remaining`.
pub fn truncate_to_box_budget(
    selected: &[SceneId],
    catalog: &SceneCatalog,
    remaining: Option<u64>,
) -> Result<Vec<SceneId>> {
    let Some(mut left) = remaining else {
        return Ok(selected.to_vec());
    };
    let mut kept = Vec::with_capacity(selected.len());
    for &id in selected {
        let boxes = catalog.get(id)?.box_count() as u64;
        if boxes > left {
            break;
        }
        left -= boxes;
        kept.push(id);
    }
    Ok(kept)
}

/// Shannon entropy (nats) of the plain-normalized class histogram.
pub fn label_distribution_entropy(counts: &[u64]) -> Result<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(StoneError::EmptyLabeledSet);
    }
    let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    Ok(shannon_entropy(&probs))
}

pub fn labeled_distribution_entropy(pool: &PoolState) -> Result<f64> {
    label_distribution_entropy(pool.labeled_class_counts())
}

/// Terms of the two-part selection objective, measured after the fact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveDiagnostics {
    /// f₁ over the selected scenes' embeddings.
    pub f1_selected: f64,
    /// f₁ over all scenes unlabeled at query time.
    pub f1_unlabeled: f64,
    /// Labeled label-distribution entropy before the commit.
    pub f2_before: f64,
    /// Labeled label-distribution entropy after the commit.
    pub f2_after: f64,
}

impl ObjectiveDiagnostics {
    /// `[f₁(D_S) − f₁(D_U)] + [f₂(D_L) − f₂(D_L ∪ D_S)]`.
    pub fn objective(&self) -> f64 {
        (self.f1_selected - self.f1_unlabeled) + (self.f2_before - self.f2_after)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based query round.
    pub round: usize,
    pub selected: Vec<SceneId>,
    pub boxes_added: u64,
    pub boxes_queried: u64,
    pub labeled_scenes: usize,
    pub labeled_class_counts: Vec<u64>,
    pub label_entropy: f64,
    pub diagnostics: ObjectiveDiagnostics,
}

/// Per-round hook for callers that need the intermediate signals (dumps, timing).
pub struct RoundEvent<'a> {
    pub record: &'a RoundRecord,
    pub pool_before: &'a PoolState,
    pub signals: &'a QuerySignals,
    pub elapsed: Duration,
}

pub fn run_experiment(
    catalog: &SceneCatalog,
    config: &AlConfig,
    strategy: Strategy,
    seed: u64,
) -> Result<Vec<RoundRecord>> {
    run_experiment_with(catalog, config, strategy, seed, |_| Ok(()))
}

/// Runs up to `config.rounds` rounds of fit → predict → select → commit. Stops early when
/// the unlabeled pool or the box budget runs out.
pub fn run_experiment_with<F>(
    catalog: &SceneCatalog,
    config: &AlConfig,
    strategy: Strategy,
    seed: u64,
    mut on_round: F,
) -> Result<Vec<RoundRecord>>
where
    F: FnMut(RoundEvent<'_>) -> Result<()>,
{
    config.validate()?;
    if config.class_count != catalog.class_count() {
        return Err(StoneError::InvalidConfig(format!(
            "config has {} classes but the scenes have {}",
            config.class_count,
            catalog.class_count()
        )));
    }
    let mut records = Vec::new();
    if config.rounds == 0 {
        return Ok(records);
    }
    let mut pool = PoolState::new(catalog, config.initial_labeled, seed)?;
    let function = SubmodularFunction::from_config(config);

    for round in 1..=config.rounds {
        let started = Instant::now();
        if pool.unlabeled().is_empty() {
            break;
        }
        let remaining = config
            .max_boxes
            .map(|cap| cap.saturating_sub(pool.boxes_queried()));
        if remaining == Some(0) {
            break;
        }
        let (_, signals) = compute_signals(catalog, &pool, config, seed)?;
        let proposed = select(strategy, &pool, &signals, config, seed)?;
        let selected = truncate_to_box_budget(&proposed, catalog, remaining)?;
        if selected.is_empty() {
            break;
        }

        let unlabeled: Vec<SceneId> = pool.unlabeled().iter().copied().collect();
        let ground = GroundSet::from_signals(&unlabeled, &signals)?;
        let f1_selected = function.evaluate(&ground, &selected)?;
        let f1_unlabeled = function.evaluate(&ground, &unlabeled)?;
        let f2_before = labeled_distribution_entropy(&pool)?;

        let pool_before = pool.clone();
        let summary = pool.commit(&selected, catalog)?;
        let label_entropy = labeled_distribution_entropy(&pool)?;
        let record = RoundRecord {
            round,
            selected,
            boxes_added: summary.boxes_added,
            boxes_queried: pool.boxes_queried(),
            labeled_scenes: pool.labeled().len(),
            labeled_class_counts: pool.labeled_class_counts().to_vec(),
            label_entropy,
            diagnostics: ObjectiveDiagnostics {
                f1_selected,
                f1_unlabeled,
                f2_before,
                f2_after: label_entropy,
            },
        };
        on_round(RoundEvent {
            record: &record,
            pool_before: &pool_before,
            signals: &signals,
            elapsed: started.elapsed(),
        })?;
        records.push(record);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::StageFlags;
    use crate::synth::{generate_catalog, SynthSpec};
    use approx::assert_abs_diff_eq;

    fn small_setup() -> (SceneCatalog, AlConfig) {
        let mut spec = SynthSpec::reference();
        spec.scene_count = 10;
        spec.seed = 2;
        let catalog = generate_catalog(&spec).unwrap();
        let mut config = AlConfig::reference();
        config.initial_labeled = 3;
        config.gamma1 = 6;
        config.k1 = Some(4);
        config.gamma2 = 2;
        config.scenes_per_round = 5;
        (catalog, config)
    }

    fn signals_for(catalog: &SceneCatalog, pool: &PoolState, config: &AlConfig) -> QuerySignals {
        compute_signals(catalog, pool, config, 0).unwrap().1
    }

    #[test]
    fn stone_cardinality_contract() {
        let (catalog, config) = small_setup();
        let pool = PoolState::new(&catalog, config.initial_labeled, 1).unwrap();
        assert_eq!(pool.unlabeled().len(), 7);
        let signals = signals_for(&catalog, &pool, &config);
        let sel = select_stone(&pool, &signals, &config).unwrap();
        assert_eq!(sel.len(), 2);
        assert!(sel.iter().all(|id| pool.unlabeled().contains(id)));
    }

    #[test]
    fn gbsss_only_equals_direct_greedy() {
        let (catalog, mut config) = small_setup();
        config.stages = StageFlags::GBSSS_ONLY;
        let pool = PoolState::new(&catalog, 3, 1).unwrap();
        let signals = signals_for(&catalog, &pool, &config);
        let ids: Vec<SceneId> = pool.unlabeled().iter().copied().collect();
        let ground = GroundSet::from_signals(&ids, &signals).unwrap();
        let direct = crate::submodular::greedy_maximize(
            &SubmodularFunction::from_config(&config),
            &ground,
            config.stone_quota(),
        )
        .unwrap();
        assert_eq!(select_stone(&pool, &signals, &config).unwrap(), direct);
    }

    #[test]
    fn disabled_stages_are_a_config_error() {
        let (catalog, mut config) = small_setup();
        config.stages = StageFlags {
            gbsss: false,
            sdmcb_step1: false,
            sdmcb_step2: false,
        };
        let pool = PoolState::new(&catalog, 3, 1).unwrap();
        let signals = QuerySignals::default();
        assert!(matches!(
            select_stone(&pool, &signals, &config),
            Err(StoneError::InvalidConfig(_))
        ));
    }

    #[test]
    fn full_quota_returns_whole_pool_for_every_strategy() {
        let (catalog, mut config) = small_setup();
        config.scenes_per_round = 7;
        config.gamma1 = 7;
        config.k1 = Some(7);
        config.gamma2 = 7;
        let pool = PoolState::new(&catalog, 3, 4).unwrap();
        let signals = signals_for(&catalog, &pool, &config);
        for strategy in Strategy::ALL {
            let mut sel = select(strategy, &pool, &signals, &config, 9).unwrap();
            sel.sort();
            let all: Vec<SceneId> = pool.unlabeled().iter().copied().collect();
            assert_eq!(sel, all, "{strategy}");
        }
    }

    #[test]
    fn random_is_reproducible() {
        let (catalog, _) = small_setup();
        let pool = PoolState::new(&catalog, 3, 4).unwrap();
        assert_eq!(
            select_random(&pool, 4, 11).unwrap(),
            select_random(&pool, 4, 11).unwrap()
        );
        assert!(select_random(&pool, 8, 11).is_err());
    }

    #[test]
    fn label_entropy_reference_values() {
        assert_abs_diff_eq!(label_distribution_entropy(&[5, 5]).unwrap(), 2f64.ln(), epsilon = 1e-15);
        assert_eq!(label_distribution_entropy(&[7, 0]).unwrap(), 0.0);
        let p = [0.8f64, 0.1, 0.1];
        let direct = -(p[0] * p[0].ln() + 2.0 * p[1] * p[1].ln());
        assert_abs_diff_eq!(label_distribution_entropy(&[8, 1, 1]).unwrap(), direct, epsilon = 1e-15);
        assert_abs_diff_eq!(direct, 0.6390, epsilon = 1e-4);
        assert_eq!(label_distribution_entropy(&[0, 0]).unwrap_err(), StoneError::EmptyLabeledSet);
    }

    #[test]
    fn zero_rounds_yield_no_records() {
        let (catalog, mut config) = small_setup();
        config.rounds = 0;
        assert!(run_experiment(&catalog, &config, Strategy::Stone, 0).unwrap().is_empty());
    }

    #[test]
    fn rounds_select_disjoint_sets_within_budget() {
        let mut spec = SynthSpec::reference();
        spec.scene_count = 120;
        let catalog = generate_catalog(&spec).unwrap();
        let mut config = AlConfig::reference();
        config.gamma1 = 20;
        config.k1 = Some(15);
        config.gamma2 = 10;
        config.scenes_per_round = 10;
        config.max_boxes = Some(120);
        for strategy in Strategy::ALL {
            let records = run_experiment(&catalog, &config, strategy, 3).unwrap();
            let mut seen = std::collections::BTreeSet::new();
            for r in &records {
                assert!(r.selected.len() <= strategy.quota(&config));
                for id in &r.selected {
                    assert!(seen.insert(*id), "{strategy} reselected {id}");
                }
                assert!(r.boxes_queried <= 120);
                assert!(r.label_entropy >= 0.0 && r.label_entropy <= 3f64.ln());
            }
            assert_eq!(records, run_experiment(&catalog, &config, strategy, 3).unwrap());
        }
    }

    #[test]
    fn budget_truncation_keeps_a_prefix() {
        let (catalog, _) = small_setup();
        let ids: Vec<SceneId> = catalog.scenes().iter().map(|s| s.scene_id).collect();
        let first = catalog.get(ids[0]).unwrap().box_count() as u64;
        let kept = truncate_to_box_budget(&ids, &catalog, Some(first)).unwrap();
        assert_eq!(kept[0], ids[0]);
        let boxes: u64 = kept.iter().map(|&id| catalog.get(id).unwrap().box_count() as u64).sum();
        assert!(boxes <= first);
        assert_eq!(truncate_to_box_budget(&ids, &catalog, None).unwrap(), ids);
    }
}
