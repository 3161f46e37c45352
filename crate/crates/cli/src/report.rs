//! `stone report`: aligns finished runs round by round.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::run::{read_manifest, RunManifest};
use crate::{CliError, CliResult, Context, FORMAT_VERSION};

pub const CURVES_FILE: &str = "entropy_curves.csv";
pub const TABLE_FILE: &str = "table.csv";

/// State of one run after a round; round 0 is the initial labeled set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub label_entropy: f64,
    pub boxes_queried: u64,
    pub labeled_scenes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunColumn {
    pub label: String,
    pub strategy: String,
    pub seed: u64,
    /// Indexed by round.
    pub points: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub class_count: usize,
    pub columns: Vec<RunColumn>,
}

impl Report {
    pub fn round_count(&self) -> usize {
        self.columns.iter().map(|c| c.points.len()).max().unwrap_or(0)
    }

    /// Fixed-width text table: entropy and queried boxes per run and round.
    pub fn table(&self) -> String {
        let mut out = format!("{:>5}", "round");
        for c in &self.columns {
            let _ = write!(out, " {:>14} {:>8}", format!("H[{}]", c.label), "boxes");
        }
        out.push('\n');
        for round in 0..self.round_count() {
            let _ = write!(out, "{round:>5}");
            for c in &self.columns {
                match c.points.get(round) {
                    Some(p) => {
                        let _ = write!(out, " {:>14.6} {:>8}", p.label_entropy, p.boxes_queried);
                    }
                    None => {
                        let _ = write!(out, " {:>14} {:>8}", "-", "-");
                    }
                }
            }
            out.push('\n');
        }
        out
    }

    /// Wide CSV of the table; missing rounds are empty cells.
    pub fn table_csv(&self) -> CliResult<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["format_version".to_string(), "round".to_string()];
        for c in &self.columns {
            header.push(format!("{}_label_entropy", c.label));
            header.push(format!("{}_boxes_queried", c.label));
        }
        w.write_record(&header).context("table")?;
        for round in 0..self.round_count() {
            let mut row = vec![FORMAT_VERSION.to_string(), round.to_string()];
            for c in &self.columns {
                match c.points.get(round) {
                    Some(p) => {
                        row.push(p.label_entropy.to_string());
                        row.push(p.boxes_queried.to_string());
                    }
                    None => row.extend([String::new(), String::new()]),
                }
            }
            w.write_record(&row).context("table")?;
        }
        w.into_inner().context("table")
    }

    /// Long-format curves, one row per run and round, ready for plotting.
    pub fn curves_csv(&self) -> CliResult<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "format_version",
            "run",
            "strategy",
            "seed",
            "round",
            "label_entropy",
            "boxes_queried",
            "labeled_scenes",
        ])
        .context("curves")?;
        for c in &self.columns {
            for (round, p) in c.points.iter().enumerate() {
                w.write_record([
                    FORMAT_VERSION.to_string(),
                    c.label.clone(),
                    c.strategy.clone(),
                    c.seed.to_string(),
                    round.to_string(),
                    p.label_entropy.to_string(),
                    p.boxes_queried.to_string(),
                    p.labeled_scenes.to_string(),
                ])
                .context("curves")?;
            }
        }
        w.into_inner().context("curves")
    }
}

fn points(manifest: &RunManifest) -> Vec<Point> {
    let mut points = Vec::with_capacity(manifest.rounds.len() + 1);
    if let (Some(first), Some(h0)) = (manifest.rounds.first(), manifest.initial_entropy()) {
        points.push(Point {
            label_entropy: h0,
            boxes_queried: 0,
            labeled_scenes: first.labeled_scenes - first.selected.len(),
        });
    }
    points.extend(manifest.rounds.iter().map(|r| Point {
        label_entropy: r.label_entropy,
        boxes_queried: r.boxes_queried,
        labeled_scenes: r.labeled_scenes,
    }));
    points
}

pub fn build_report(run_dirs: &[PathBuf]) -> CliResult<Report> {
    if run_dirs.is_empty() {
        return Err(CliError::Usage("report needs at least one run directory".into()));
    }
    let manifests = run_dirs
        .iter()
        .map(|d| read_manifest(d))
        .collect::<CliResult<Vec<_>>>()?;
    let class_count = manifests[0].class_count;
    for (dir, m) in run_dirs.iter().zip(&manifests) {
        if m.class_count != class_count {
            return Err(CliError::data(
                dir.display(),
                format!(
                    "run has {} classes but {} has {class_count}",
                    m.class_count,
                    run_dirs[0].display()
                ),
            ));
        }
    }
    let ambiguous = |s: &str| manifests.iter().filter(|m| m.strategy == s).count() > 1;
    let columns = run_dirs
        .iter()
        .zip(&manifests)
        .map(|(dir, m)| RunColumn {
            label: if ambiguous(&m.strategy) {
                let name = dir.file_name().map(|n| n.to_string_lossy().into_owned());
                format!("{}@{}", m.strategy, name.unwrap_or_else(|| dir.display().to_string()))
            } else {
                m.strategy.clone()
            },
            strategy: m.strategy.clone(),
            seed: m.seed,
            points: points(m),
        })
        .collect();
    Ok(Report {
        class_count,
        columns,
    })
}

/// Builds the report and, with `out`, writes the table and curve CSVs there.
pub fn cmd_report(run_dirs: &[PathBuf], out: Option<&Path>) -> CliResult<Report> {
    let report = build_report(run_dirs)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir).context(dir.display())?;
        let path = dir.join(TABLE_FILE);
        fs::write(&path, report.table_csv()?).context(path.display())?;
        let path = dir.join(CURVES_FILE);
        fs::write(&path, report.curves_csv()?).context(path.display())?;
    }
    Ok(report)
}
