//! Scene files: one JSON header line, then one scene per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use stone_core::synth::{generate_catalog, SynthSpec};
use stone_core::types::{Scene, SceneCatalog};

use crate::{read_json, CliError, CliResult, Context, FORMAT_VERSION};

pub const SCENE_FORMAT: &str = "stone-scenes";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneHeader {
    format: String,
    version: u32,
    class_count: usize,
    feature_dim: usize,
}

pub fn write_scenes<W: Write>(out: W, catalog: &SceneCatalog) -> CliResult<()> {
    let mut out = BufWriter::new(out);
    let header = SceneHeader {
        format: SCENE_FORMAT.into(),
        version: FORMAT_VERSION,
        class_count: catalog.class_count(),
        feature_dim: catalog.feature_dim(),
    };
    write_json_line(&mut out, &header)?;
    for scene in catalog.scenes() {
        write_json_line(&mut out, scene)?;
    }
    out.flush().context("writing scene file")
}

pub fn read_scenes<R: Read>(input: R) -> CliResult<SceneCatalog> {
    let mut lines = BufReader::new(input).lines().enumerate();
    let Some((_, first)) = lines.next() else {
        return Err(CliError::data("scene file", "missing header line"));
    };
    let first = first.context("scene file")?;
    let header: SceneHeader = serde_json::from_str(&first).context("scene file line 1")?;
    if header.format != SCENE_FORMAT {
        return Err(CliError::data(
            "scene file line 1",
            format!("expected format {SCENE_FORMAT:?}, found {:?}", header.format),
        ));
    }
    if header.version != FORMAT_VERSION {
        return Err(CliError::data(
            "scene file line 1",
            format!("unsupported version {} (this build reads {FORMAT_VERSION})", header.version),
        ));
    }
    let mut scenes = Vec::new();
    for (i, line) in lines {
        let where_ = format!("scene file line {}", i + 1);
        let line = line.context(&where_)?;
        if line.trim().is_empty() {
            continue;
        }
        scenes.push(serde_json::from_str::<Scene>(&line).context(&where_)?);
    }
    SceneCatalog::new(scenes, header.class_count, header.feature_dim).context("scene file")
}

pub fn load_scenes(path: &Path) -> CliResult<SceneCatalog> {
    let file = File::open(path).context(path.display())?;
    read_scenes(file).map_err(|e| match e {
        CliError::Data { context, message } => {
            CliError::data(format!("{}: {context}", path.display()), message)
        }
        other => other,
    })
}

/// Generates a synthetic pool from a spec document and writes it as a scene file.
pub fn cmd_gen(spec_path: &Path, out_path: &Path) -> CliResult<usize> {
    let spec: SynthSpec = read_json(spec_path)?;
    let catalog = generate_catalog(&spec).context(spec_path.display())?;
    let file = File::create(out_path).context(out_path.display())?;
    write_scenes(file, &catalog)?;
    Ok(catalog.len())
}

fn write_json_line<W: Write, T: Serialize>(out: &mut W, value: &T) -> CliResult<()> {
    serde_json::to_writer(&mut *out, value).context("writing scene file")?;
    out.write_all(b"\n").context("writing scene file")
}
