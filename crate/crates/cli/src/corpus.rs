//! On-disk layouts shared by several subcommands.
//!
//! A synthetic corpus directory holds `labels.csv` (`id,label,planted`, with
//! `planted` a `;`-separated list of patch indices) and, per study, `<id>.pgm`,
//! `<id>.attn` and `<id>.kg.json`. A graph directory holds a copy of the same
//! `labels.csv` and one `<id>.nrlg` per study.

use std::fs;
use std::path::{Path, PathBuf};

use neural_core::graphs::KgDocument;
use neural_core::{AttentionMatrix, GrayImage, SyntheticStudy, UnifiedGraph};
use serde::{Deserialize, Serialize};

use crate::{read, write, Failure};

pub const LABELS: &str = "labels.csv";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelRow {
    pub id: String,
    pub label: u8,
    #[serde(default)]
    pub planted: String,
}

pub fn read_labels(dir: &Path) -> Result<Vec<LabelRow>, Failure> {
    let path = dir.join(LABELS);
    let mut reader = csv::Reader::from_path(&path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    let rows = reader
        .deserialize()
        .collect::<Result<Vec<LabelRow>, _>>()
        .map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    if let Some(bad) = rows.iter().find(|r| r.label > 1) {
        return Err(Failure::data(format!("{}: label for {} must be 0 or 1", path.display(), bad.id)));
    }
    Ok(rows)
}

pub fn write_labels(dir: &Path, rows: &[LabelRow]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Failure::data(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::data(e.to_string()))?;
    write(&dir.join(LABELS), &bytes)
}

fn study_path(dir: &Path, id: &str, ext: &str) -> PathBuf {
    dir.join(format!("{id}.{ext}"))
}

pub fn write_study(dir: &Path, study: &SyntheticStudy) -> Result<(), Failure> {
    write(&study_path(dir, &study.id, "pgm"), &study.image.to_pgm())?;
    write(&study_path(dir, &study.id, "attn"), &study.attention.to_bytes())?;
    let kg = serde_json::to_vec_pretty(&study.kg).map_err(|e| Failure::data(e.to_string()))?;
    write(&study_path(dir, &study.id, "kg.json"), &kg)
}

pub fn study_row(study: &SyntheticStudy) -> LabelRow {
    LabelRow {
        id: study.id.clone(),
        label: u8::from(study.label),
        planted: study.planted.iter().map(usize::to_string).collect::<Vec<_>>().join(";"),
    }
}

pub fn read_image(path: &Path) -> Result<GrayImage, Failure> {
    GrayImage::from_pgm(&read(path)?).map_err(|e| Failure::typed(path, e))
}

pub fn read_attention(path: &Path) -> Result<AttentionMatrix, Failure> {
    AttentionMatrix::from_bytes(&read(path)?).map_err(|e| Failure::typed(path, e))
}

pub fn read_kg(path: &Path) -> Result<KgDocument, Failure> {
    serde_json::from_slice(&read(path)?)
        .map_err(|e| Failure::typed(path, neural_core::graphs::GraphError::MalformedDocument(e.to_string())))
}

pub fn read_graph(path: &Path) -> Result<UnifiedGraph, Failure> {
    neural_core::serialization::decode(&read(path)?).map_err(|e| Failure::typed(path, e))
}

/// Load every study listed in `dir/labels.csv`.
pub fn load_corpus(dir: &Path) -> Result<Vec<SyntheticStudy>, Failure> {
    read_labels(dir)?
        .into_iter()
        .map(|row| {
            let planted = row
                .planted
                .split(';')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().map_err(|_| Failure::data(format!("bad planted index {s:?} for {}", row.id))))
                .collect::<Result<_, _>>()?;
            Ok(SyntheticStudy {
                image: read_image(&study_path(dir, &row.id, "pgm"))?,
                attention: read_attention(&study_path(dir, &row.id, "attn"))?,
                kg: read_kg(&study_path(dir, &row.id, "kg.json"))?,
                label: row.label == 1,
                planted,
                id: row.id,
            })
        })
        .collect()
}

/// Graphs and labels of a graph directory, in `labels.csv` order.
pub fn load_graphs(dir: &Path) -> Result<Vec<(String, UnifiedGraph, bool)>, Failure> {
    read_labels(dir)?
        .into_iter()
        .map(|row| Ok((row.id.clone(), read_graph(&study_path(dir, &row.id, "nrlg"))?, row.label == 1)))
        .collect()
}

pub fn graph_path(dir: &Path, id: &str) -> PathBuf {
    study_path(dir, id, "nrlg")
}

pub fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::data(format!("{}: {e}", dir.display())))
}
