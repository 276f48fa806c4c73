//! Seeded scene generation per difficulty tier, and materialization of
//! dataset splits (target PNGs, per-sample metadata, split manifest).
//!
//! Generation is rejection sampling with a fixed draw order so that a
//! `(tier, seed)` pair denotes the same scene on every platform: shape count,
//! then per shape kind → extent → stroke (hollow kinds only) → clip flag →
//! cx → cy, retried until the containment and overlap constraints hold.

use crate::dsl::{bbox_iou, serialize, Scene, Shape, ShapeKind, COORD_MAX};
use crate::render::{pixel_hash, read_png, render, write_png, ImageError, RenderConfig};
use crate::rng::Prng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::ops::RangeInclusive;
use std::path::Path;
use thiserror::Error;

/// Candidate draws per shape before the scene is discarded.
pub const MAX_SHAPE_ATTEMPTS: u32 = 1000;
/// Whole-scene restarts before generation gives up.
pub const MAX_SCENE_RESTARTS: u32 = 100;

/// Seed range of the built-in evaluation split: 50 seeds per tier.
pub const EVAL_V1_SEEDS: RangeInclusive<u64> = 0..=49;

/// Inclusive integer interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntRange {
    pub lo: i32,
    pub hi: i32,
}

impl IntRange {
    pub fn new(lo: i32, hi: i32) -> IntRange {
        IntRange { lo, hi }
    }

    pub fn contains(self, value: i32) -> bool {
        (self.lo..=self.hi).contains(&value)
    }
}

/// One difficulty regime: ranges for shape count, extent, and stroke, the
/// probability that a shape is required to cross the canvas edge, an optional
/// cap on pairwise bounding-box IoU, and whether the finished scene must
/// contain at least one overlapping pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierConfig {
    pub name: String,
    pub shape_count: IntRange,
    pub extent: IntRange,
    pub stroke: IntRange,
    pub clip_prob: f64,
    pub max_bbox_iou: Option<f64>,
    pub require_overlap: bool,
}

impl TierConfig {
    pub fn easy() -> TierConfig {
        TierConfig {
            name: "easy".to_string(),
            shape_count: IntRange::new(1, 3),
            extent: IntRange::new(64, 160),
            stroke: IntRange::new(2, 6),
            clip_prob: 0.0,
            max_bbox_iou: Some(0.02),
            require_overlap: false,
        }
    }

    pub fn medium() -> TierConfig {
        TierConfig {
            name: "medium".to_string(),
            shape_count: IntRange::new(3, 6),
            extent: IntRange::new(32, 128),
            stroke: IntRange::new(2, 8),
            clip_prob: 0.25,
            max_bbox_iou: Some(0.35),
            require_overlap: false,
        }
    }

    pub fn hard() -> TierConfig {
        TierConfig {
            name: "hard".to_string(),
            shape_count: IntRange::new(6, 10),
            extent: IntRange::new(16, 128),
            stroke: IntRange::new(1, 10),
            clip_prob: 1.0,
            max_bbox_iou: None,
            require_overlap: true,
        }
    }

    pub fn builtin(name: &str) -> Option<TierConfig> {
        match name {
            "easy" => Some(TierConfig::easy()),
            "medium" => Some(TierConfig::medium()),
            "hard" => Some(TierConfig::hard()),
            _ => None,
        }
    }

    /// The three tiers of the built-in evaluation preset, in split order.
    pub fn eval_v1_tiers() -> Vec<TierConfig> {
        vec![TierConfig::easy(), TierConfig::medium(), TierConfig::hard()]
    }
}

/// Failures during generation or split materialization.
#[derive(Debug, Error)]
pub enum GenerateError {
    #[error(
        "generation exhausted for tier '{tier}' seed {seed}: no valid scene after {restarts} restarts"
    )]
    Exhausted { tier: String, seed: u64, restarts: u32 },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("missing manifest at {0}")]
    MissingManifest(String),
}

/// Per-kind shape counts for sample metadata.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeInventory {
    pub filled_circle: usize,
    pub circle: usize,
    pub filled_square: usize,
    pub square: usize,
}

impl ShapeInventory {
    pub fn of(scene: &Scene) -> ShapeInventory {
        let mut inventory = ShapeInventory::default();
        for shape in scene.shapes() {
            match shape.kind {
                ShapeKind::FilledCircle => inventory.filled_circle += 1,
                ShapeKind::Circle => inventory.circle += 1,
                ShapeKind::FilledSquare => inventory.filled_square += 1,
                ShapeKind::Square => inventory.square += 1,
            }
        }
        inventory
    }

    pub fn total(&self) -> usize {
        self.filled_circle + self.circle + self.filled_square + self.square
    }
}

/// Everything recorded per sample, serialized with keys in this order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: String,
    pub split: String,
    pub difficulty: String,
    pub seed: u64,
    pub canvas_size: u32,
    pub shape_count: usize,
    pub shape_inventory: ShapeInventory,
    pub ground_truth_program: String,
    pub render_config: RenderConfig,
    pub pixel_hash: String,
}

/// Manifest value for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub seed: u64,
    pub difficulty: String,
    pub pixel_hash: String,
}

/// Split-level index: sample_id → entry, sorted by sample_id.
pub type Manifest = BTreeMap<String, ManifestEntry>;

/// The zero-padded, sort-stable sample identifier.
pub fn sample_id(tier_name: &str, seed: u64) -> String {
    format!("{tier_name}_{seed:04}")
}

fn draw_shape(tier: &TierConfig, accepted: &[Shape], rng: &mut Prng) -> Option<Shape> {
    for _ in 0..MAX_SHAPE_ATTEMPTS {
        let kind = ShapeKind::ALL[rng.uniform_int(0, 3) as usize];
        let extent = rng.uniform_int(i64::from(tier.extent.lo), i64::from(tier.extent.hi)) as i32;
        let stroke = kind.is_hollow().then(|| {
            let drawn =
                rng.uniform_int(i64::from(tier.stroke.lo), i64::from(tier.stroke.hi)) as i32;
            drawn.clamp(1, kind.max_stroke(extent))
        });
        let must_clip = rng.bernoulli(tier.clip_prob);
        let cx = rng.uniform_int(0, i64::from(COORD_MAX)) as i32;
        let cy = rng.uniform_int(0, i64::from(COORD_MAX)) as i32;
        let shape = Shape { kind, cx, cy, extent, stroke };

        let bbox = shape.bbox();
        if bbox.inside_canvas() == must_clip {
            continue;
        }
        if let Some(cap) = tier.max_bbox_iou {
            if accepted.iter().any(|s| bbox_iou(&s.bbox(), &bbox) > cap) {
                continue;
            }
        }
        return Some(shape);
    }
    None
}

fn has_overlapping_pair(shapes: &[Shape]) -> bool {
    (0..shapes.len()).any(|i| {
        (i + 1..shapes.len()).any(|j| bbox_iou(&shapes[i].bbox(), &shapes[j].bbox()) > 0.0)
    })
}

fn draw_scene(tier: &TierConfig, rng: &mut Prng) -> Option<Scene> {
    let n = rng.uniform_int(
        i64::from(tier.shape_count.lo),
        i64::from(tier.shape_count.hi),
    ) as usize;
    let mut accepted: Vec<Shape> = Vec::with_capacity(n);
    for _ in 0..n {
        accepted.push(draw_shape(tier, &accepted, rng)?);
    }
    if tier.require_overlap && !has_overlapping_pair(&accepted) {
        return None;
    }
    Some(Scene::new(accepted))
}

/// Deterministically generates one scene for `(tier, seed)`. Discarded
/// scenes continue on the same draw stream (no reseeding); exhausting
/// [`MAX_SCENE_RESTARTS`] restarts is an error reserved for pathological
/// tier configurations.
pub fn generate_scene(tier: &TierConfig, seed: u64) -> Result<Scene, GenerateError> {
    let mut rng = Prng::seed_from_u64(seed);
    for _ in 0..=MAX_SCENE_RESTARTS {
        if let Some(scene) = draw_scene(tier, &mut rng) {
            return Ok(scene);
        }
    }
    Err(GenerateError::Exhausted {
        tier: tier.name.clone(),
        seed,
        restarts: MAX_SCENE_RESTARTS,
    })
}

/// Generates `tiers × seeds` samples into `out_dir`: a target PNG and a
/// metadata JSON per sample plus a split `manifest.json`, returning the
/// manifest.
pub fn generate_split(
    split_name: &str,
    tiers: &[TierConfig],
    seeds: RangeInclusive<u64>,
    out_dir: &Path,
) -> Result<Manifest, GenerateError> {
    std::fs::create_dir_all(out_dir)?;
    let mut manifest = Manifest::new();
    for tier in tiers {
        for seed in seeds.clone() {
            let scene = generate_scene(tier, seed)?;
            let image = render(&scene, &RenderConfig::default());
            let hash = pixel_hash(&image);
            let id = sample_id(&tier.name, seed);

            write_png(&image, &out_dir.join(format!("{id}.png")))?;
            let record = SampleRecord {
                sample_id: id.clone(),
                split: split_name.to_string(),
                difficulty: tier.name.clone(),
                seed,
                canvas_size: 512,
                shape_count: scene.len(),
                shape_inventory: ShapeInventory::of(&scene),
                ground_truth_program: serialize(&scene),
                render_config: RenderConfig::default(),
                pixel_hash: hash.clone(),
            };
            std::fs::write(
                out_dir.join(format!("{id}.json")),
                serde_json::to_string_pretty(&record)?,
            )?;
            manifest.insert(
                id,
                ManifestEntry { seed, difficulty: tier.name.clone(), pixel_hash: hash },
            );
        }
    }
    std::fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

/// Generates the built-in evaluation preset: three tiers × seeds 0–49,
/// 150 samples.
pub fn generate_eval_v1(out_dir: &Path) -> Result<Manifest, GenerateError> {
    generate_split("eval_v1", &TierConfig::eval_v1_tiers(), EVAL_V1_SEEDS, out_dir)
}

/// Loads `manifest.json` from a split directory.
pub fn load_manifest(dataset_dir: &Path) -> Result<Manifest, GenerateError> {
    let path = dataset_dir.join("manifest.json");
    if !path.exists() {
        return Err(GenerateError::MissingManifest(path.display().to_string()));
    }
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Loads the metadata record for one sample of a split.
pub fn load_sample_record(dataset_dir: &Path, id: &str) -> Result<SampleRecord, GenerateError> {
    let text = std::fs::read_to_string(dataset_dir.join(format!("{id}.json")))?;
    Ok(serde_json::from_str(&text)?)
}

/// One problem found by [`verify_dataset`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyIssue {
    pub sample_id: String,
    pub problem: String,
}

/// Outcome of re-hashing every sample in a split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyReport {
    pub checked: usize,
    pub issues: Vec<VerifyIssue>,
}

impl VerifyReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Recomputes the pixel hash of every target PNG named by the manifest and
/// compares against the recorded digests. Missing or unreadable images are
/// reported as issues, not hard errors; a missing manifest is a hard error.
pub fn verify_dataset(dataset_dir: &Path) -> Result<VerifyReport, GenerateError> {
    let manifest = load_manifest(dataset_dir)?;
    let mut report = VerifyReport { checked: 0, issues: Vec::new() };
    for (id, entry) in &manifest {
        report.checked += 1;
        match read_png(&dataset_dir.join(format!("{id}.png"))) {
            Err(e) => report.issues.push(VerifyIssue {
                sample_id: id.clone(),
                problem: format!("unreadable target image: {e}"),
            }),
            Ok(image) => {
                let actual = pixel_hash(&image);
                if actual != entry.pixel_hash {
                    report.issues.push(VerifyIssue {
                        sample_id: id.clone(),
                        problem: format!(
                            "pixel hash mismatch: manifest {} vs recomputed {actual}",
                            entry.pixel_hash
                        ),
                    });
                }
            }
        }
    }
    Ok(report)
}
