//! Renewable perception-to-program benchmark toolkit: seeded scene
//! generation, deterministic rasterization, a strict whitelist DSL parser
//! with a closed error taxonomy, raster metrics, reference baselines, an
//! evaluation runner, and result analysis.
//!
//! | Module      | Responsibility                                            |
//! |-------------|-----------------------------------------------------------|
//! | [`dsl`]     | Shape/Scene types, validity rules, canonical serialization |
//! | [`parser`]  | Whitelist parser with typed rejection tags                 |
//! | [`render`]  | Deterministic 512×512 grayscale rasterizer + PNG I/O       |
//! | [`rng`]     | Pinned splitmix64-seeded xoshiro256** PRNG                 |
//! | [`generate`]| Tiered scene generation and dataset split materialization  |
//! | [`eval`]    | Five-metric scoring of predictions against target rasters  |
//! | [`baselines`]| Empty-program and heuristic computer-vision baselines     |
//! | [`runner`]  | Batch evaluation with adapters, retries, crash-safe resume |
//! | [`analysis`]| Bootstrap CIs, error histograms, charts, visual panels     |

pub mod analysis;
pub mod baselines;
pub mod dsl;
pub mod eval;
pub mod generate;
pub mod parser;
pub mod render;
pub mod rng;
pub mod runner;

pub use analysis::{
    bootstrap_ci, difficulty_chart, error_histogram, qualitative_panel, summarize_run,
    AnalysisError, MetricSummary, SummaryTable,
};
pub use baselines::{
    classify_component, connected_components, empty_baseline, heuristic_baseline, Component,
};
pub use dsl::{serialize, BBox, Scene, Shape, ShapeKind};
pub use eval::{evaluate, EvalResult, FailureTag};
pub use generate::{generate_scene, generate_split, TierConfig};
pub use parser::{classify_error, parse, parse_bytes, ErrorTag, ParseError};
pub use render::{pixel_hash, read_png, render, write_png, RasterImage, RenderConfig};
pub use rng::Prng;
pub use runner::{
    default_prompt, load_run_artifact, normalize_prediction, resolve_runs_root, run_split,
    summarize_records, AdapterMode, AdapterSpec, MetricMeans, RunArtifact, RunConfig, RunError,
    RunOptions, RunSummary, SampleRun,
};

/// Version stamp recorded in run artifacts.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
