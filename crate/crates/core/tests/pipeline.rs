use std::collections::BTreeSet;

use stone_core::config::StageFlags;
use stone_core::oracle::dump::{read_dump, write_dump};
use stone_core::oracle::{compute_signals, QuerySignals};
use stone_core::pipeline::select;
use stone_core::synth::{generate_catalog, SynthSpec};
use stone_core::{run_experiment, AlConfig, PoolState, Strategy};

fn small_world(seed: u64) -> (stone_core::types::SceneCatalog, AlConfig) {
    let mut spec = SynthSpec::reference();
    spec.scene_count = 120;
    spec.seed = seed;
    let catalog = generate_catalog(&spec).unwrap();
    let mut config = AlConfig::reference();
    config.gamma1 = 30;
    config.gamma2 = 20;
    config.k1 = Some(25);
    config.scenes_per_round = 10;
    config.rounds = 3;
    config.initial_labeled = 10;
    (catalog, config)
}

#[test]
fn every_strategy_runs_and_keeps_the_pool_consistent() {
    let (catalog, config) = small_world(3);
    for strategy in [
        Strategy::Stone,
        Strategy::Random,
        Strategy::MaxEntropy,
        Strategy::Coreset,
        Strategy::Badge,
    ] {
        let records = run_experiment(&catalog, &config, strategy, 3).unwrap();
        assert_eq!(records.len(), 3, "{strategy:?}");
        let mut seen = BTreeSet::new();
        for (i, r) in records.iter().enumerate() {
            assert_eq!(r.round, i + 1);
            assert_eq!(r.selected.len(), 10, "{strategy:?}");
            assert!(r.selected.iter().all(|id| seen.insert(*id)), "scene queried twice");
            assert_eq!(r.labeled_scenes, 10 + 10 * (i + 1));
            let total: u64 = r.labeled_class_counts.iter().sum();
            assert!(total >= r.boxes_queried);
            assert!(r.label_entropy >= 0.0 && r.label_entropy <= 3f64.ln() + 1e-12);
        }
    }
}

#[test]
fn runs_are_reproducible_for_a_seed() {
    let (catalog, config) = small_world(8);
    let a = run_experiment(&catalog, &config, Strategy::Stone, 8).unwrap();
    let b = run_experiment(&catalog, &config, Strategy::Stone, 8).unwrap();
    assert_eq!(a, b);
}

#[test]
fn box_budget_is_never_exceeded() {
    let (catalog, mut config) = small_world(5);
    config.max_boxes = Some(70);
    let records = run_experiment(&catalog, &config, Strategy::Stone, 5).unwrap();
    let last = records.last().unwrap();
    assert!(last.boxes_queried <= 70);
}

#[test]
fn stage_subsets_all_produce_full_rounds() {
    let (catalog, mut config) = small_world(11);
    for list in ["gbsss", "step1", "step2", "sdmcb", "gbsss,step2"] {
        config.stages = StageFlags::parse_list(list).unwrap();
        let records = run_experiment(&catalog, &config, Strategy::Stone, 11).unwrap();
        assert!(records.iter().all(|r| r.selected.len() == 10), "{list}");
    }
}

#[test]
fn dumped_signals_reselect_identically() {
    let (catalog, config) = small_world(21);
    let pool = PoolState::new(&catalog, config.initial_labeled, 21).unwrap();
    let (_, signals) = compute_signals(&catalog, &pool, &config, 21).unwrap();

    let records: Vec<_> = signals
        .predictions
        .values()
        .map(|p| (p, signals.embedding(p.scene_id).unwrap()))
        .collect();
    let mut buf = Vec::new();
    write_dump(&mut buf, config.class_count, &records).unwrap();
    let (preds, embs) = read_dump(buf.as_slice()).unwrap();
    let restored = QuerySignals::from_records(preds.into_iter().zip(embs).collect());
    assert_eq!(restored, signals);

    let before = select(Strategy::Stone, &pool, &signals, &config, 21).unwrap();
    let after = select(Strategy::Stone, &pool, &restored, &config, 21).unwrap();
    assert_eq!(before, after);
}

#[test]
fn mismatched_class_count_is_rejected() {
    let (catalog, mut config) = small_world(1);
    config.class_count = 4;
    assert!(run_experiment(&catalog, &config, Strategy::Random, 1).is_err());
}

#[test]
fn dump_files_round_trip() {
    let (catalog, config) = small_world(2);
    let pool = PoolState::new(&catalog, config.initial_labeled, 2).unwrap();
    let (_, signals) = compute_signals(&catalog, &pool, &config, 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("round1.jsonl");
    stone_core::oracle::dump::export_dump(&path, config.class_count, &signals).unwrap();
    let (preds, embs) = stone_core::oracle::dump::import_dump(&path).unwrap();
    let restored = QuerySignals::from_records(preds.into_iter().zip(embs).collect());
    assert_eq!(restored, signals);
}
