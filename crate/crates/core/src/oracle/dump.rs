//! Line-delimited JSON exchange format for detector outputs.
//!
//! ```text
//! {"format":"stone-dump","version":1,"class_count":3}
//! {"scene_id":4,"probs":[[0.9,0.05,0.05]],"hyp_classes":[0],"reg_losses":[0.01],"grad":[...]}
//! ```
//!
//! The header is required unless the file is empty. Reals are written with shortest
//! round-trip formatting, so an export followed by an import is lossless.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BoxPrediction, GradientEmbedding, QuerySignals, ScenePrediction};
use crate::error::{Result, StoneError};
use crate::math::argmax;
use crate::types::{ClassId, SceneId};

pub const DUMP_FORMAT: &str = "stone-dump";
pub const DUMP_VERSION: u32 = 1;

/// Simplex tolerance for imported probability vectors.
const IMPORT_SIMPLEX_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    class_count: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    scene_id: u64,
    probs: Vec<Vec<f64>>,
    hyp_classes: Vec<usize>,
    reg_losses: Vec<f64>,
    grad: Vec<f64>,
}

fn dump_err(line: usize, message: impl Into<String>) -> StoneError {
    StoneError::Dump {
        line,
        message: message.into(),
    }
}

pub fn write_dump<W: Write>(
    mut out: W,
    class_count: usize,
    records: &[(&ScenePrediction, &GradientEmbedding)],
) -> Result<()> {
    let header = Header {
        format: DUMP_FORMAT.to_string(),
        version: DUMP_VERSION,
        class_count,
    };
    let line = serde_json::to_string(&header).map_err(|e| StoneError::Io(e.to_string()))?;
    writeln!(out, "{line}")?;
    for (pred, emb) in records {
        let record = Record {
            scene_id: pred.scene_id.0,
            probs: pred.boxes.iter().map(|b| b.class_probs.clone()).collect(),
            hyp_classes: pred.boxes.iter().map(|b| b.hyp_class.index()).collect(),
            reg_losses: pred.boxes.iter().map(|b| b.reg_loss).collect(),
            grad: emb.grad.clone(),
        };
        let line = serde_json::to_string(&record).map_err(|e| StoneError::Io(e.to_string()))?;
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

/// Writes every scene of `signals` in scene-id order.
pub fn export_dump(path: &Path, class_count: usize, signals: &QuerySignals) -> Result<()> {
    let mut records = Vec::with_capacity(signals.len());
    for (id, pred) in &signals.predictions {
        records.push((pred, signals.embedding(*id)?));
    }
    write_dump(BufWriter::new(File::create(path)?), class_count, &records)
}

pub fn read_dump<R: Read>(input: R) -> Result<(Vec<ScenePrediction>, Vec<GradientEmbedding>)> {
    let mut predictions = Vec::new();
    let mut embeddings = Vec::new();
    let mut class_count = None;
    let mut grad_dim: Option<usize> = None;

    for (idx, line) in BufReader::new(input).lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let Some(c) = class_count else {
            let header: Header = serde_json::from_str(&line)
                .map_err(|e| dump_err(lineno, format!("invalid header: {e}")))?;
            if header.format != DUMP_FORMAT {
                return Err(dump_err(lineno, format!("unexpected format '{}'", header.format)));
            }
            if header.version != DUMP_VERSION {
                return Err(dump_err(
                    lineno,
                    format!("unsupported version {} (expected {DUMP_VERSION})", header.version),
                ));
            }
            if header.class_count < 2 {
                return Err(dump_err(lineno, "class_count must be >= 2"));
            }
            class_count = Some(header.class_count);
            continue;
        };

        let record: Record =
            serde_json::from_str(&line).map_err(|e| dump_err(lineno, e.to_string()))?;
        let sid = record.scene_id;
        let n = record.probs.len();
        if record.hyp_classes.len() != n || record.reg_losses.len() != n {
            return Err(dump_err(
                lineno,
                format!("scene {sid}: probs, hyp_classes and reg_losses lengths differ"),
            ));
        }
        let mut boxes = Vec::with_capacity(n);
        for ((probs, &hyp), &reg_loss) in record
            .probs
            .into_iter()
            .zip(&record.hyp_classes)
            .zip(&record.reg_losses)
        {
            if probs.len() != c {
                return Err(dump_err(
                    lineno,
                    format!("scene {sid}: probability vector of length {} (expected {c})", probs.len()),
                ));
            }
            if probs.iter().any(|p| !p.is_finite() || *p < -IMPORT_SIMPLEX_TOLERANCE) {
                return Err(dump_err(lineno, format!("scene {sid}: invalid probability entry")));
            }
            let total: f64 = probs.iter().sum();
            if (total - 1.0).abs() > IMPORT_SIMPLEX_TOLERANCE {
                return Err(dump_err(
                    lineno,
                    format!("scene {sid}: probabilities sum to {total}"),
                ));
            }
            if hyp >= c {
                return Err(dump_err(lineno, format!("scene {sid}: class {hyp} out of range")));
            }
            if hyp != argmax(&probs) {
                return Err(dump_err(
                    lineno,
                    format!("scene {sid}: hypothetical class {hyp} is not the argmax"),
                ));
            }
            if !reg_loss.is_finite() || reg_loss < 0.0 {
                return Err(dump_err(lineno, format!("scene {sid}: invalid regression loss")));
            }
            boxes.push(BoxPrediction {
                class_probs: probs,
                hyp_class: ClassId(hyp),
                reg_loss,
            });
        }
        if record.grad.iter().any(|g| !g.is_finite()) {
            return Err(dump_err(lineno, format!("scene {sid}: non-finite gradient")));
        }
        match grad_dim {
            None => grad_dim = Some(record.grad.len()),
            Some(d) if d != record.grad.len() => {
                return Err(dump_err(
                    lineno,
                    format!("scene {sid}: gradient length {} (expected {d})", record.grad.len()),
                ))
            }
            Some(_) => {}
        }
        let scene_id = SceneId(sid);
        predictions.push(
            ScenePrediction::new(scene_id, boxes, c).map_err(|e| dump_err(lineno, e.to_string()))?,
        );
        embeddings.push(GradientEmbedding {
            scene_id,
            grad: record.grad,
        });
    }
    Ok((predictions, embeddings))
}

pub fn import_dump(path: &Path) -> Result<(Vec<ScenePrediction>, Vec<GradientEmbedding>)> {
    read_dump(File::open(path)?)
}
