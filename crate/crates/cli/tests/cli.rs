use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use stone_cli::check::render;
use stone_cli::run::read_manifest;
use stone_cli::scenes::load_scenes;
use stone_cli::{cmd_check, cmd_gen, cmd_report, cmd_run, CliError, RunArgs};
use stone_core::synth::{generate_catalog, SynthSpec};
use stone_core::verify::BatteryConfig;
use stone_core::{AlConfig, Strategy};
use tempfile::TempDir;

fn write_json<T: serde::Serialize>(path: &Path, value: &T) {
    fs::write(path, serde_json::to_string_pretty(value).unwrap()).unwrap();
}

fn small_spec(scene_count: usize, class_count: usize) -> SynthSpec {
    let mut spec = SynthSpec::reference();
    spec.scene_count = scene_count;
    if class_count == 2 {
        spec.class_count = 2;
        spec.class_frequencies = vec![0.7, 0.3];
    }
    spec
}

fn small_config(class_count: usize) -> AlConfig {
    let mut config = AlConfig::reference();
    config.class_count = class_count;
    config.gamma1 = 20;
    config.gamma2 = 10;
    config.k1 = Some(15);
    config.scenes_per_round = 8;
    config.rounds = 2;
    config.initial_labeled = 10;
    config
}

/// Writes a spec, config and scene file into a fresh directory.
fn setup(class_count: usize) -> (TempDir, PathBuf, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    let config = dir.path().join("config.json");
    let scenes = dir.path().join("scenes.jsonl");
    write_json(&spec, &small_spec(80, class_count));
    write_json(&config, &small_config(class_count));
    cmd_gen(&spec, &scenes).unwrap();
    (dir, config, scenes)
}

fn run_args(config: &Path, scenes: &Path, out: PathBuf, strategy: Strategy) -> RunArgs {
    RunArgs {
        config: config.to_path_buf(),
        scenes: scenes.to_path_buf(),
        strategy,
        seed: Some(4),
        out,
        stages: None,
        submodular: None,
        max_boxes: None,
        dump: false,
    }
}

#[test]
fn gen_reports_missing_key_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    let mut value = serde_json::to_value(SynthSpec::reference()).unwrap();
    value.as_object_mut().unwrap().remove("class_frequencies");
    write_json(&spec, &value);
    let err = cmd_gen(&spec, &dir.path().join("out.jsonl")).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("class_frequencies"), "{err}");
}

#[test]
fn gen_with_zero_scenes_writes_a_loadable_empty_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    let out = dir.path().join("scenes.jsonl");
    write_json(&spec, &small_spec(0, 3));
    assert_eq!(cmd_gen(&spec, &out).unwrap(), 0);
    let catalog = load_scenes(&out).unwrap();
    assert!(catalog.is_empty());
    assert_eq!(catalog.class_count(), 3);
}

#[test]
fn generated_scenes_load_back_equal() {
    let (dir, _, scenes) = setup(3);
    let loaded = load_scenes(&scenes).unwrap();
    let expected = generate_catalog(&small_spec(80, 3)).unwrap();
    assert_eq!(loaded, expected);
    drop(dir);
}

#[test]
fn run_writes_all_outputs_and_reruns_identically() {
    let (dir, config, scenes) = setup(3);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let manifest = cmd_run(&run_args(&config, &scenes, a.clone(), Strategy::Stone)).unwrap();
    cmd_run(&run_args(&config, &scenes, b.clone(), Strategy::Stone)).unwrap();
    assert_eq!(manifest.rounds.len(), 2);
    assert_eq!(read_manifest(&a).unwrap(), manifest);
    for file in ["metrics.csv", "selected.csv"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
    let selected = fs::read_to_string(a.join("selected.csv")).unwrap();
    assert_eq!(selected.lines().count(), 1 + 2 * 8);
    assert!(selected.ends_with('\n'));
}

#[test]
fn manifest_with_unknown_version_is_rejected() {
    let (dir, config, scenes) = setup(3);
    let out = dir.path().join("run");
    cmd_run(&run_args(&config, &scenes, out.clone(), Strategy::Random)).unwrap();
    let path = out.join("manifest.json");
    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, text.replacen("\"version\": 1", "\"version\": 2", 1)).unwrap();
    let err = read_manifest(&out).unwrap_err();
    assert!(err.to_string().contains("unsupported version"), "{err}");
}

#[test]
fn report_of_one_run_has_one_column() {
    let (dir, config, scenes) = setup(3);
    let run = dir.path().join("run");
    cmd_run(&run_args(&config, &scenes, run.clone(), Strategy::Stone)).unwrap();
    let out = dir.path().join("report");
    let report = cmd_report(&[run], Some(&out)).unwrap();
    assert_eq!(report.columns.len(), 1);
    assert_eq!(report.columns[0].label, "stone");
    // Initial labeled set plus two rounds.
    assert_eq!(report.round_count(), 3);
    let curves = fs::read_to_string(out.join("entropy_curves.csv")).unwrap();
    assert_eq!(curves.lines().count(), 1 + 3);
}

#[test]
fn report_rejects_runs_with_different_class_counts() {
    let (dir3, config3, scenes3) = setup(3);
    let (dir2, config2, scenes2) = setup(2);
    let a = dir3.path().join("run");
    let b = dir2.path().join("run");
    cmd_run(&run_args(&config3, &scenes3, a.clone(), Strategy::Random)).unwrap();
    cmd_run(&run_args(&config2, &scenes2, b.clone(), Strategy::Random)).unwrap();
    let err = cmd_report(&[a, b], None).unwrap_err();
    assert!(matches!(err, CliError::Data { .. }));
    assert!(err.to_string().contains("classes"), "{err}");
}

#[test]
fn check_battery_passes_and_fails_on_a_convex_link() {
    let quick = BatteryConfig {
        submodularity_pairs: 100,
        greedy_instances: 5,
        lazy_instances: 20,
        gradient_configs: 5,
        ..BatteryConfig::default()
    };
    let outcomes = cmd_check(&quick);
    assert!(outcomes.iter().all(|c| c.passed), "{}", render(&outcomes));

    let tampered = cmd_check(&BatteryConfig {
        link: |x| x * x,
        ..quick
    });
    let sub = tampered.iter().find(|c| c.name == "submodularity").unwrap();
    assert!(!sub.passed);
}

fn stone_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stone"))
}

#[test]
fn unknown_strategy_is_a_usage_error_listing_choices() {
    let (dir, config, scenes) = setup(3);
    let output = stone_bin()
        .args(["run", "--strategy", "greedy", "--config"])
        .arg(&config)
        .arg("--scenes")
        .arg(&scenes)
        .arg("--out")
        .arg(dir.path().join("x"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    for name in ["stone", "random", "entropy", "coreset", "badge"] {
        assert!(stderr.contains(name), "{stderr}");
    }
}

#[test]
fn data_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let output = stone_bin()
        .args(["gen", "--config"])
        .arg(dir.path().join("missing.json"))
        .arg("--out")
        .arg(dir.path().join("s.jsonl"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn binary_runs_with_stage_and_function_overrides() {
    let (dir, config, scenes) = setup(3);
    let out = dir.path().join("ablation");
    let status = stone_bin()
        .args(["run", "--stages", "gbsss", "--submodular", "facility", "--max-boxes", "60"])
        .arg("--config")
        .arg(&config)
        .arg("--scenes")
        .arg(&scenes)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let manifest = read_manifest(&out).unwrap();
    assert!(!manifest.config.stages.sdmcb_step1);
    assert_eq!(manifest.config.max_boxes, Some(60));
    assert!(manifest.rounds.last().unwrap().boxes_queried <= 60);
}
