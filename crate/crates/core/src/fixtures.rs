//! Seeded synthetic studies with a label-correlated signal planted jointly in the
//! image, the attention map and the knowledge graph.
//!
//! Every study's attention is pulled onto a random 2x2 block of patches. Positives
//! additionally get a Gaussian bright spot centred on that block and a knowledge
//! graph whose hub entity carries the label `"pneumonia"`; negatives get
//! background only and a knowledge graph of generic entities. Spot strength, background
//! level and attention focus vary per study so no single modality is trivially
//! separable from the image alone.

use thiserror::Error;

use crate::attention::{softmax_in_place, AttentionMatrix};
use crate::graphs::{EntityRecord, KgDocument, KnowledgeGraph, RelationRecord};
use crate::patch_grid::GrayImage;
use crate::rng::SplitMix64;
use crate::Scalar;

pub const DEFAULT_POSITIVE_RATE: f64 = 0.15;
pub const DEFAULT_TOKENS: usize = 40;
pub const FINDING_LABEL: &str = "pneumonia";

/// Concentration of the diffuse attention used for every study.
const DIFFUSE_CONCENTRATION: f64 = 2.0;
const BACKGROUND: (f64, f64) = (0.25, 0.55);
const PIXEL_NOISE: f64 = 0.12;
const SPOT_AMPLITUDE: (f64, f64) = (0.03, 0.30);
const SPOT_SIGMA_PATCHES: f64 = 0.6;
const FOCUS_SHARE: (f64, f64) = (0.30, 0.60);

const FINDINGS: [&str; 4] = ["pneumonia", "consolidation", "airspace opacity", "infiltrate"];
const GENERIC: [(&str, &str); 14] = [
    ("lungs", "ANAT-DP"),
    ("heart", "ANAT-DP"),
    ("mediastinum", "ANAT-DP"),
    ("pleural space", "ANAT-DP"),
    ("cardiac silhouette", "ANAT-DP"),
    ("osseous structures", "ANAT-DP"),
    ("clear", "OBS-DP"),
    ("normal size", "OBS-DP"),
    ("stable", "OBS-DP"),
    ("unremarkable", "OBS-DP"),
    ("effusion", "OBS-DA"),
    ("pneumothorax", "OBS-DA"),
    ("atelectasis", "OBS-U"),
    ("degenerative changes", "OBS-DP"),
];

#[derive(Debug, Error, PartialEq)]
pub enum FixtureError {
    #[error("positive rate must lie in (0, 1), got {0}")]
    InvalidRate(f64),
    #[error("corpus needs at least 10 studies, got {0}")]
    TooFewStudies(usize),
    #[error("image size {image_size} is not a positive multiple of patch size {patch_size}")]
    BadGeometry { image_size: usize, patch_size: usize },
    #[error("image must tile into at least 2x2 patches")]
    GridTooSmall,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusConfig {
    pub seed: u64,
    pub count: usize,
    pub image_size: usize,
    pub patch_size: usize,
    pub positive_rate: f64,
    pub tokens: usize,
}

impl CorpusConfig {
    pub fn new(seed: u64, count: usize) -> Self {
        Self {
            seed,
            count,
            image_size: 128,
            patch_size: 8,
            positive_rate: DEFAULT_POSITIVE_RATE,
            tokens: DEFAULT_TOKENS,
        }
    }

    pub fn patches_per_side(&self) -> usize {
        self.image_size / self.patch_size
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticStudy<T> {
    pub id: String,
    pub image: GrayImage<T>,
    pub attention: AttentionMatrix<T>,
    pub kg: KgDocument,
    pub label: bool,
    /// Patches under the planted spot; empty for negatives.
    pub planted: Vec<usize>,
}

impl<T: Scalar> SyntheticStudy<T> {
    pub fn knowledge_graph(&self, dim: usize) -> Result<KnowledgeGraph<T>, crate::graphs::GraphError> {
        KnowledgeGraph::from_document(&self.kg, dim)
    }
}

/// Generate `config.count` studies; exactly `round(count * positive_rate)` are positive.
///
/// Study `i` draws everything from `SplitMix64::derive(seed, i + 1)`; which studies
/// are positive comes from `SplitMix64::derive(seed, 0)`.
pub fn generate_corpus<T: Scalar>(config: &CorpusConfig) -> Result<Vec<SyntheticStudy<T>>, FixtureError> {
    if !(config.positive_rate > 0.0 && config.positive_rate < 1.0) {
        return Err(FixtureError::InvalidRate(config.positive_rate));
    }
    if config.count < 10 {
        return Err(FixtureError::TooFewStudies(config.count));
    }
    if config.patch_size == 0 || config.image_size == 0 || !config.image_size.is_multiple_of(config.patch_size) {
        return Err(FixtureError::BadGeometry { image_size: config.image_size, patch_size: config.patch_size });
    }
    if config.patches_per_side() < 2 {
        return Err(FixtureError::GridTooSmall);
    }
    let positives = (config.count as f64 * config.positive_rate).round() as usize;
    let mut is_positive = vec![false; config.count];
    for &i in SplitMix64::derive(config.seed, 0).permutation(config.count).iter().take(positives) {
        is_positive[i] = true;
    }
    Ok(is_positive.into_iter().enumerate().map(|(i, label)| generate_study(config, i, label)).collect())
}

fn generate_study<T: Scalar>(config: &CorpusConfig, index: usize, label: bool) -> SyntheticStudy<T> {
    let mut rng = SplitMix64::derive(config.seed, index as u64 + 1);
    let (size, ps, side) = (config.image_size, config.patch_size, config.patches_per_side());
    let n = side * side;

    let background = rng.uniform(BACKGROUND.0, BACKGROUND.1);
    let mut pixels: Vec<f64> = (0..size * size).map(|_| background + rng.uniform(-PIXEL_NOISE, PIXEL_NOISE)).collect();

    // Every study has a focal 2x2 block the report attends to; only positives
    // carry a finding there.
    let (br, bc) = (rng.below((side - 1) as u64) as usize, rng.below((side - 1) as u64) as usize);
    let focus = vec![br * side + bc, br * side + bc + 1, (br + 1) * side + bc, (br + 1) * side + bc + 1];
    let mut planted = Vec::new();
    if label {
        planted = focus.clone();
        let amplitude = rng.uniform(SPOT_AMPLITUDE.0, SPOT_AMPLITUDE.1);
        let (cy, cx) = (((br + 1) * ps) as f64 - 0.5, ((bc + 1) * ps) as f64 - 0.5);
        let sigma = SPOT_SIGMA_PATCHES * ps as f64;
        for y in br * ps..(br + 2) * ps {
            for x in bc * ps..(bc + 2) * ps {
                let r2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
                pixels[y * size + x] += amplitude * (-r2 / (2.0 * sigma * sigma)).exp();
            }
        }
    }
    // 8-bit quantization so the in-memory study equals its PGM file.
    let pixels = pixels.into_iter().map(|p| T::of((p.clamp(0.0, 1.0) * 255.0).round() / 255.0)).collect();
    let image = GrayImage::new(size, size, pixels).expect("generated pixels are in range");

    let attention = study_attention(&mut rng, config.tokens, n, &focus);
    let kg = study_kg(&mut rng, label);
    SyntheticStudy { id: format!("study_{index:05}"), image, attention, kg, label, planted }
}

/// Diffuse attention (see `synth_attention`), with a per-study share of every
/// token's mass moved onto the focal patches.
fn study_attention<T: Scalar>(rng: &mut SplitMix64, tokens: usize, n: usize, focus: &[usize]) -> AttentionMatrix<T> {
    let focus_share = rng.uniform(FOCUS_SHARE.0, FOCUS_SHARE.1);
    let prior: Vec<f64> = (0..n).map(|_| rng.gumbel()).collect();
    let mut weights = Vec::with_capacity(tokens * n);
    let mut row = vec![0.0; n];
    for _ in 0..tokens {
        for (r, g) in row.iter_mut().zip(&prior) {
            *r = (g + rng.next_f64()) / DIFFUSE_CONCENTRATION;
        }
        softmax_in_place(&mut row);
        row.iter_mut().for_each(|w| *w *= 1.0 - focus_share);
        for &p in focus {
            row[p] += focus_share / focus.len() as f64;
        }
        weights.extend(row.iter().map(|&w| T::of(w)));
    }
    AttentionMatrix::new(tokens, n, weights).expect("rows are normalized by construction")
}

fn study_kg(rng: &mut SplitMix64, label: bool) -> KgDocument {
    let mut pool: Vec<usize> = (0..GENERIC.len()).collect();
    rng.shuffle(&mut pool);
    let mut entities = Vec::new();
    if label {
        let text = FINDINGS[rng.below(FINDINGS.len() as u64) as usize];
        entities.push(EntityRecord { id: "e0".into(), text: text.into(), label: FINDING_LABEL.into() });
    }
    let generic = if label { 2 + rng.below(3) as usize } else { 3 + rng.below(3) as usize };
    for &g in pool.iter().take(generic) {
        let (text, kind) = GENERIC[g];
        entities.push(EntityRecord { id: format!("e{}", entities.len()), text: text.into(), label: kind.into() });
    }
    // star around the first entity
    let relations = (1..entities.len())
        .map(|i| RelationRecord {
            src: entities[i].id.clone(),
            dst: entities[0].id.clone(),
            label: if i % 2 == 0 { "modify".into() } else { "located_at".into() },
        })
        .collect();
    KgDocument { entities, relations }
}

/// Knowledge graph with one uninformative entity, for text ablations.
pub fn dummy_kg() -> KgDocument {
    KgDocument {
        entities: vec![EntityRecord { id: "e0".into(), text: "report".into(), label: "NONE".into() }],
        relations: Vec::new(),
    }
}
