//! `stone run`: one experiment, written as a manifest plus CSV tables.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use stone_core::config::{StageFlags, SubmodularKind};
use stone_core::oracle::dump::export_dump;
use stone_core::pipeline::run_experiment_with;
use stone_core::rng::RNG_ALGORITHM;
use stone_core::{AlConfig, RoundRecord, Strategy};

use crate::scenes::load_scenes;
use crate::{read_json, CliError, CliResult, Context, FORMAT_VERSION};

pub const MANIFEST_FORMAT: &str = "stone-run";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SELECTED_FILE: &str = "selected.csv";

#[derive(Debug, Clone)]
pub struct RunArgs {
    pub config: PathBuf,
    pub scenes: PathBuf,
    pub strategy: Strategy,
    /// Overrides the config's seed.
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub stages: Option<StageFlags>,
    pub submodular: Option<SubmodularKind>,
    pub max_boxes: Option<u64>,
    /// Also write each round's predictions and embeddings under `dumps/`.
    pub dump: bool,
}

/// Wall-clock data; the only part of a manifest that differs between reruns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    pub round_ms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub version: u32,
    pub strategy: String,
    pub seed: u64,
    pub rng_algorithm: String,
    pub scene_count: usize,
    pub class_count: usize,
    pub config: AlConfig,
    pub rounds: Vec<RoundRecord>,
    pub timing: Timing,
}

impl RunManifest {
    /// Label-distribution entropy of the labeled set before the first query.
    pub fn initial_entropy(&self) -> Option<f64> {
        self.rounds.first().map(|r| r.diagnostics.f2_before)
    }
}

fn unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

pub fn cmd_run(args: &RunArgs) -> CliResult<RunManifest> {
    let mut config: AlConfig = read_json(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(stages) = args.stages {
        config.stages = stages;
    }
    if let Some(kind) = args.submodular {
        config.submodular_kind = kind;
    }
    if args.max_boxes.is_some() {
        config.max_boxes = args.max_boxes;
    }
    config.validate().context(args.config.display())?;
    let catalog = load_scenes(&args.scenes)?;

    fs::create_dir_all(&args.out).context(args.out.display())?;
    let dump_dir = args.out.join("dumps");
    if args.dump {
        fs::create_dir_all(&dump_dir).context(dump_dir.display())?;
    }

    let started = unix_ms();
    let mut round_ms = Vec::new();
    let records = run_experiment_with(&catalog, &config, args.strategy, config.seed, |event| {
        round_ms.push(event.elapsed.as_secs_f64() * 1e3);
        if args.dump {
            let path = dump_dir.join(format!("round_{:03}.jsonl", event.record.round));
            export_dump(&path, config.class_count, event.signals)?;
        }
        Ok(())
    })
    .context(format!("{} run", args.strategy.name()))?;

    let manifest = RunManifest {
        format: MANIFEST_FORMAT.into(),
        version: FORMAT_VERSION,
        strategy: args.strategy.name().into(),
        seed: config.seed,
        rng_algorithm: RNG_ALGORITHM.into(),
        scene_count: catalog.len(),
        class_count: catalog.class_count(),
        config,
        rounds: records,
        timing: Timing {
            started_unix_ms: started,
            finished_unix_ms: unix_ms(),
            round_ms,
        },
    };
    write_outputs(&args.out, &manifest)?;
    Ok(manifest)
}

fn write_outputs(dir: &Path, manifest: &RunManifest) -> CliResult<()> {
    let path = dir.join(MANIFEST_FILE);
    let mut json = serde_json::to_string_pretty(manifest).context("manifest")?;
    json.push('\n');
    fs::write(&path, json).context(path.display())?;

    let path = dir.join(METRICS_FILE);
    fs::write(&path, metrics_csv(manifest)?).context(path.display())?;

    let path = dir.join(SELECTED_FILE);
    fs::write(&path, selected_csv(manifest)?).context(path.display())?;
    Ok(())
}

/// Per-round metrics. Timing is left out so reruns produce identical bytes.
pub fn metrics_csv(manifest: &RunManifest) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = [
        "format_version",
        "strategy",
        "seed",
        "round",
        "selected_scenes",
        "boxes_added",
        "boxes_queried",
        "labeled_scenes",
        "label_entropy",
    ]
    .map(String::from)
    .to_vec();
    header.extend((0..manifest.class_count).map(|c| format!("labeled_class_{c}")));
    header.extend(
        ["f1_selected", "f1_unlabeled", "f2_before", "f2_after", "objective"].map(String::from),
    );
    w.write_record(&header).context("metrics")?;
    for r in &manifest.rounds {
        let mut row = vec![
            FORMAT_VERSION.to_string(),
            manifest.strategy.clone(),
            manifest.seed.to_string(),
            r.round.to_string(),
            r.selected.len().to_string(),
            r.boxes_added.to_string(),
            r.boxes_queried.to_string(),
            r.labeled_scenes.to_string(),
            r.label_entropy.to_string(),
        ];
        row.extend(r.labeled_class_counts.iter().map(u64::to_string));
        let d = &r.diagnostics;
        row.extend(
            [d.f1_selected, d.f1_unlabeled, d.f2_before, d.f2_after, d.objective()]
                .map(|v| v.to_string()),
        );
        w.write_record(&row).context("metrics")?;
    }
    w.into_inner().context("metrics")
}

/// One row per queried scene, in selection order.
pub fn selected_csv(manifest: &RunManifest) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["format_version", "round", "rank", "scene_id"])
        .context("selected")?;
    for r in &manifest.rounds {
        for (rank, id) in r.selected.iter().enumerate() {
            w.write_record([
                FORMAT_VERSION.to_string(),
                r.round.to_string(),
                rank.to_string(),
                id.0.to_string(),
            ])
            .context("selected")?;
        }
    }
    w.into_inner().context("selected")
}

/// Reads `manifest.json` from a run directory, rejecting other formats and versions.
pub fn read_manifest(run_dir: &Path) -> CliResult<RunManifest> {
    let path = run_dir.join(MANIFEST_FILE);
    let value: serde_json::Value = read_json(&path)?;
    let format = value.get("format").and_then(|v| v.as_str());
    if format != Some(MANIFEST_FORMAT) {
        return Err(CliError::data(
            path.display(),
            format!("expected format {MANIFEST_FORMAT:?}, found {format:?}"),
        ));
    }
    let version = value.get("version").and_then(|v| v.as_u64());
    if version != Some(u64::from(FORMAT_VERSION)) {
        return Err(CliError::data(
            path.display(),
            format!("unsupported version {version:?} (this build reads {FORMAT_VERSION})"),
        ));
    }
    serde_json::from_value(value).context(path.display())
}
