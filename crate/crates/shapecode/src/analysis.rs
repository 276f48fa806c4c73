//! Report generation over run artifacts: bootstrap confidence intervals,
//! summary tables (CSV + markdown), error-taxonomy histograms, qualitative
//! win/loss panels, and a dependency-free grouped-bar SVG chart.
//!
//! Every report is deterministic: the bootstrap PRNG seed is explicit
//! (default 0) and recorded in report headers, so re-running analysis over
//! the same artifacts yields byte-identical outputs.

use std::collections::BTreeMap;
use std::path::Path;

use crate::eval::{xor_diff, EvalResult};
use crate::parser::parse;
use crate::render::{read_png, render, write_png, ImageError, RasterImage, RenderConfig};
use crate::rng::Prng;
use crate::runner::{RunArtifact, SampleRun};

/// Default number of bootstrap resamples, per the reporting protocol.
pub const DEFAULT_RESAMPLES: usize = 1000;
/// Default bootstrap PRNG seed; recorded in report headers.
pub const DEFAULT_BOOTSTRAP_SEED: u64 = 0;
/// Confidence level of all reported intervals.
pub const CONFIDENCE_LEVEL: f64 = 0.95;

/// The five reported metrics, in canonical column order.
pub const METRIC_NAMES: [&str; 5] =
    ["exact_match", "pixel_accuracy", "fg_iou", "parse_success", "exec_success"];

fn metric_value(name: &str, eval: &EvalResult) -> f64 {
    match name {
        "exact_match" => f64::from(eval.exact_match),
        "pixel_accuracy" => eval.pixel_accuracy,
        "fg_iou" => eval.fg_iou,
        "parse_success" => f64::from(eval.parse_success),
        "exec_success" => f64::from(eval.exec_success),
        other => unreachable!("metric {other:?} validated before use"),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("cannot bootstrap an empty value list")]
    EmptyInput,
    #[error("artifact {0:?} has no per-sample records")]
    MissingRecords(String),
    #[error("unknown metric {0:?}; expected one of {METRIC_NAMES:?}")]
    UnknownMetric(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// Mean plus a 95% nonparametric bootstrap interval.
///
/// Endpoints are the 2.5th and 97.5th nearest-rank percentiles of the sorted
/// resample means; resampling draws from a dedicated PRNG seeded explicitly
/// so reports are reproducible.
pub fn bootstrap_ci(
    values: &[f64],
    resamples: usize,
    seed: u64,
) -> Result<(f64, f64, f64), AnalysisError> {
    if values.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;

    let mut rng = Prng::seed_from_u64(seed);
    let mut means = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut sum = 0.0;
        for _ in 0..n {
            sum += values[rng.uniform_int(0, n as i64 - 1) as usize];
        }
        means.push(sum / n as f64);
    }
    means.sort_by(f64::total_cmp);

    let alpha = (1.0 - CONFIDENCE_LEVEL) / 2.0;
    let lo = means[nearest_rank(alpha, resamples)];
    let hi = means[nearest_rank(1.0 - alpha, resamples)];
    Ok((mean, lo, hi))
}

/// Nearest-rank percentile index (0-based) into a sorted list of length `n`:
/// rank = ⌈p·n⌉ clamped into [1, n].
fn nearest_rank(p: f64, n: usize) -> usize {
    let rank = (p * n as f64).ceil() as usize;
    rank.clamp(1, n) - 1
}

/// One row of the main results table.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MetricSummary {
    pub metric: String,
    /// `"overall"` or a tier name.
    pub stratum: String,
    pub n: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// The full results table for one run, with enough header metadata to make
/// the report self-describing.
#[derive(Debug, Clone)]
pub struct SummaryTable {
    pub run_id: String,
    pub adapter_name: String,
    pub resamples: usize,
    pub bootstrap_seed: u64,
    pub rows: Vec<MetricSummary>,
}

/// Tier ordering for reports: the canonical difficulty ladder first, then
/// anything else alphabetically.
fn tier_order(tiers: &mut Vec<String>) {
    let rank = |tier: &str| match tier {
        "easy" => 0,
        "medium" => 1,
        "hard" => 2,
        _ => 3,
    };
    tiers.sort_by(|a, b| rank(a).cmp(&rank(b)).then_with(|| a.cmp(b)));
}

fn strata_of(records: &[SampleRun]) -> Vec<(String, Vec<&SampleRun>)> {
    let mut by_tier: BTreeMap<String, Vec<&SampleRun>> = BTreeMap::new();
    for record in records {
        by_tier.entry(record.difficulty.clone()).or_default().push(record);
    }
    let mut tiers: Vec<String> = by_tier.keys().cloned().collect();
    tier_order(&mut tiers);

    let mut strata = vec![("overall".to_string(), records.iter().collect::<Vec<_>>())];
    for tier in tiers {
        let rows = by_tier.remove(&tier).expect("tier key came from the map");
        strata.push((tier, rows));
    }
    strata
}

/// Computes every metric × stratum row with bootstrap CIs.
pub fn summarize_run(
    artifact: &RunArtifact,
    resamples: usize,
    seed: u64,
) -> Result<SummaryTable, AnalysisError> {
    if artifact.records.is_empty() {
        return Err(AnalysisError::MissingRecords(artifact.summary.run_id.clone()));
    }
    let mut rows = Vec::new();
    for (stratum, records) in strata_of(&artifact.records) {
        for metric in METRIC_NAMES {
            let values: Vec<f64> =
                records.iter().map(|r| metric_value(metric, &r.eval)).collect();
            let (mean, ci_low, ci_high) = bootstrap_ci(&values, resamples, seed)?;
            rows.push(MetricSummary {
                metric: metric.to_string(),
                stratum: stratum.clone(),
                n: values.len(),
                mean,
                ci_low,
                ci_high,
            });
        }
    }
    Ok(SummaryTable {
        run_id: artifact.summary.run_id.clone(),
        adapter_name: artifact.config.adapter.name.clone(),
        resamples,
        bootstrap_seed: seed,
        rows,
    })
}

/// RFC-4180-style field quoting (only when needed).
fn csv_field(text: &str) -> String {
    if text.contains([',', '"', '\n']) {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}

impl SummaryTable {
    /// Long-form CSV: one row per metric × stratum.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("run_id,adapter,stratum,metric,n,mean,ci_low,ci_high\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{:.6},{:.6},{:.6}\n",
                csv_field(&self.run_id),
                csv_field(&self.adapter_name),
                csv_field(&row.stratum),
                row.metric,
                row.n,
                row.mean,
                row.ci_low,
                row.ci_high,
            ));
        }
        out
    }

    /// Markdown table: one row per stratum, one column per metric, cells as
    /// `mean [lo, hi]` with three decimals.
    pub fn to_markdown(&self) -> String {
        let mut out = format!(
            "# Results: {} ({})\n\nBootstrap: {} resamples, seed {}, 95% CI.\n\n",
            self.adapter_name, self.run_id, self.resamples, self.bootstrap_seed
        );
        out.push_str("| stratum | n |");
        for metric in METRIC_NAMES {
            out.push_str(&format!(" {metric} |"));
        }
        out.push_str("\n|---|---:|");
        out.push_str(&"---|".repeat(METRIC_NAMES.len()));
        out.push('\n');

        let mut strata: Vec<&str> = Vec::new();
        for row in &self.rows {
            if !strata.contains(&row.stratum.as_str()) {
                strata.push(&row.stratum);
            }
        }
        for stratum in strata {
            let cells: Vec<&MetricSummary> =
                self.rows.iter().filter(|r| r.stratum == stratum).collect();
            let n = cells.first().map_or(0, |c| c.n);
            out.push_str(&format!("| {stratum} | {n} |"));
            for metric in METRIC_NAMES {
                let cell = cells
                    .iter()
                    .find(|c| c.metric == metric)
                    .expect("every stratum has every metric");
                out.push_str(&format!(
                    " {:.3} [{:.3}, {:.3}] |",
                    cell.mean, cell.ci_low, cell.ci_high
                ));
            }
            out.push('\n');
        }
        out
    }
}

/// Error-tag counts per run, recomputed from the per-sample records.
/// `"none"` counts cleanly evaluated samples; counts sum to the record count.
pub fn error_histogram(artifacts: &[RunArtifact]) -> Vec<(String, BTreeMap<String, usize>)> {
    artifacts
        .iter()
        .map(|artifact| {
            let mut counts: BTreeMap<String, usize> = BTreeMap::new();
            for record in &artifact.records {
                let key = match &record.eval.error_tag {
                    Some(tag) => tag.as_str().to_string(),
                    None => "none".to_string(),
                };
                *counts.entry(key).or_default() += 1;
            }
            (artifact.summary.run_id.clone(), counts)
        })
        .collect()
}

/// CSV rendering of [`error_histogram`], one row per run × tag.
pub fn histogram_csv(histograms: &[(String, BTreeMap<String, usize>)]) -> String {
    let mut out = String::from("run_id,error_tag,count\n");
    for (run_id, counts) in histograms {
        for (tag, count) in counts {
            out.push_str(&format!("{},{tag},{count}\n", csv_field(run_id)));
        }
    }
    out
}

/// One selected qualitative example.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PanelEntry {
    pub role: String,
    pub rank: usize,
    pub sample_id: String,
    pub exact_match: u8,
    pub fg_iou: f64,
    pub target_png: String,
    pub prediction_png: String,
    pub diff_png: String,
}

/// Emits the win/loss panel: for the `k_wins` best records (exact-match
/// descending, then fg_iou descending) and the `k_losses` worst (fg_iou
/// ascending), writes the target, the re-rendered prediction (a blank canvas
/// when parsing failed), and the foreground-XOR diff, plus `index.md`.
/// Both `k` values clamp to the record count.
pub fn qualitative_panel(
    artifact: &RunArtifact,
    k_wins: usize,
    k_losses: usize,
    out_dir: &Path,
) -> Result<Vec<PanelEntry>, AnalysisError> {
    if artifact.records.is_empty() {
        return Err(AnalysisError::MissingRecords(artifact.summary.run_id.clone()));
    }
    std::fs::create_dir_all(out_dir)?;

    let mut wins: Vec<&SampleRun> = artifact.records.iter().collect();
    wins.sort_by(|a, b| {
        b.eval
            .exact_match
            .cmp(&a.eval.exact_match)
            .then_with(|| b.eval.fg_iou.total_cmp(&a.eval.fg_iou))
    });
    let mut losses: Vec<&SampleRun> = artifact.records.iter().collect();
    losses.sort_by(|a, b| a.eval.fg_iou.total_cmp(&b.eval.fg_iou));

    let config = RenderConfig::default();
    let mut entries = Vec::new();
    let selections = [("win", &wins[..k_wins.min(wins.len())]),
        ("loss", &losses[..k_losses.min(losses.len())])];
    for (role, records) in selections {
        for (index, record) in records.iter().enumerate() {
            let rank = index + 1;
            let stem = format!("{role}_{rank}_{}", record.sample_id);
            let target_path =
                Path::new(&artifact.config.dataset_dir).join(format!("{}.png", record.sample_id));
            let target = read_png(&target_path)?;
            let prediction_raster = match parse(&record.normalized_prediction) {
                Ok(scene) => render(&scene, &config),
                Err(_) => RasterImage::filled(config.background),
            };
            let diff = xor_diff(&target, &prediction_raster);

            let target_png = format!("{stem}_target.png");
            let prediction_png = format!("{stem}_prediction.png");
            let diff_png = format!("{stem}_diff.png");
            write_png(&target, &out_dir.join(&target_png))?;
            write_png(&prediction_raster, &out_dir.join(&prediction_png))?;
            write_png(&diff, &out_dir.join(&diff_png))?;
            entries.push(PanelEntry {
                role: role.to_string(),
                rank,
                sample_id: record.sample_id.clone(),
                exact_match: record.eval.exact_match,
                fg_iou: record.eval.fg_iou,
                target_png,
                prediction_png,
                diff_png,
            });
        }
    }

    let mut index = format!(
        "# Qualitative panel: {} ({})\n\n| role | rank | sample | exact | fg_iou | target | prediction | diff |\n|---|---:|---|---:|---:|---|---|---|\n",
        artifact.config.adapter.name, artifact.summary.run_id
    );
    for e in &entries {
        index.push_str(&format!(
            "| {} | {} | {} | {} | {:.3} | {} | {} | {} |\n",
            e.role, e.rank, e.sample_id, e.exact_match, e.fg_iou, e.target_png, e.prediction_png,
            e.diff_png
        ));
    }
    std::fs::write(out_dir.join("index.md"), index)?;
    Ok(entries)
}

/// Per-run, per-tier chart datum.
#[derive(Debug, Clone)]
struct Bar {
    run_label: String,
    tier: String,
    n: usize,
    mean: f64,
    ci_low: f64,
    ci_high: f64,
}

/// Emits a grouped bar chart (one group per tier, one bar per run, 95% CI
/// whiskers) as a standalone SVG, plus the underlying CSV next to it
/// (same path with the extension replaced by `.csv`).
pub fn difficulty_chart(
    artifacts: &[RunArtifact],
    metric: &str,
    out_path: &Path,
    resamples: usize,
    seed: u64,
) -> Result<(), AnalysisError> {
    if !METRIC_NAMES.contains(&metric) {
        return Err(AnalysisError::UnknownMetric(metric.to_string()));
    }

    let mut tiers: Vec<String> = Vec::new();
    let mut bars: Vec<Bar> = Vec::new();
    for artifact in artifacts {
        if artifact.records.is_empty() {
            return Err(AnalysisError::MissingRecords(artifact.summary.run_id.clone()));
        }
        let label = format!("{} ({})", artifact.config.adapter.name, artifact.summary.run_id);
        for (stratum, records) in strata_of(&artifact.records) {
            if stratum == "overall" {
                continue;
            }
            if !tiers.contains(&stratum) {
                tiers.push(stratum.clone());
            }
            let values: Vec<f64> =
                records.iter().map(|r| metric_value(metric, &r.eval)).collect();
            let (mean, ci_low, ci_high) = bootstrap_ci(&values, resamples, seed)?;
            bars.push(Bar {
                run_label: label.clone(),
                tier: stratum,
                n: values.len(),
                mean,
                ci_low,
                ci_high,
            });
        }
    }
    tier_order(&mut tiers);
    let runs: Vec<String> = artifacts
        .iter()
        .map(|a| format!("{} ({})", a.config.adapter.name, a.summary.run_id))
        .collect();

    let mut csv = String::from("run_id,adapter,tier,metric,n,mean,ci_low,ci_high\n");
    for artifact in artifacts {
        let label = format!("{} ({})", artifact.config.adapter.name, artifact.summary.run_id);
        for tier in &tiers {
            if let Some(bar) = bars.iter().find(|b| b.run_label == label && &b.tier == tier) {
                csv.push_str(&format!(
                    "{},{},{},{metric},{},{:.6},{:.6},{:.6}\n",
                    csv_field(&artifact.summary.run_id),
                    csv_field(&artifact.config.adapter.name),
                    csv_field(tier),
                    bar.n,
                    bar.mean,
                    bar.ci_low,
                    bar.ci_high,
                ));
            }
        }
    }
    std::fs::write(out_path.with_extension("csv"), csv)?;
    std::fs::write(out_path, chart_svg(metric, &tiers, &runs, &bars, resamples, seed))?;
    Ok(())
}

const PALETTE: [&str; 6] = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#af7aa1"];

fn chart_svg(
    metric: &str,
    tiers: &[String],
    runs: &[String],
    bars: &[Bar],
    resamples: usize,
    seed: u64,
) -> String {
    let bar_w = 34.0;
    let bar_gap = 6.0;
    let group_gap = 30.0;
    let group_w = runs.len() as f64 * (bar_w + bar_gap) - bar_gap;
    let margin_left = 52.0;
    let margin_top = 34.0;
    let plot_h = 240.0;
    let legend_h = 18.0 * runs.len() as f64 + 8.0;
    let plot_w = tiers.len() as f64 * (group_w + group_gap);
    // Never narrower than the title line.
    let width = (margin_left + plot_w + 20.0).max(580.0);
    let height = margin_top + plot_h + 46.0 + legend_h;

    let x_of = |tier_index: usize, run_index: usize| -> f64 {
        margin_left + group_gap / 2.0 + tier_index as f64 * (group_w + group_gap)
            + run_index as f64 * (bar_w + bar_gap)
    };
    let y_of = |value: f64| -> f64 { margin_top + plot_h * (1.0 - value.clamp(0.0, 1.0)) };

    let mut svg = format!(
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif">
<rect width="{width:.0}" height="{height:.0}" fill="white"/>
<text x="{margin_left}" y="20" font-size="14" fill="#222">{metric} by difficulty tier (95% bootstrap CI, {resamples} resamples, seed {seed})</text>
"##
    );

    // Horizontal grid and axis labels at 0, 0.25, …, 1.
    for step in 0..=4 {
        let value = step as f64 * 0.25;
        let y = y_of(value);
        svg.push_str(&format!(
            "<line x1=\"{margin_left}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>\n<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" fill=\"#444\" text-anchor=\"end\">{value:.2}</text>\n",
            margin_left + plot_w,
            margin_left - 6.0,
            y + 4.0,
        ));
    }

    for (tier_index, tier) in tiers.iter().enumerate() {
        for (run_index, run) in runs.iter().enumerate() {
            let Some(bar) = bars.iter().find(|b| &b.run_label == run && &b.tier == tier) else {
                continue;
            };
            let x = x_of(tier_index, run_index);
            let y = y_of(bar.mean);
            let color = PALETTE[run_index % PALETTE.len()];
            svg.push_str(&format!(
                "<rect class=\"bar\" x=\"{x:.1}\" y=\"{y:.1}\" width=\"{bar_w}\" height=\"{:.1}\" fill=\"{color}\"><title>{run} {tier}: {:.3} [{:.3}, {:.3}] (n={})</title></rect>\n",
                (y_of(0.0) - y).max(0.5),
                bar.mean,
                bar.ci_low,
                bar.ci_high,
                bar.n,
            ));
            // CI whisker with end caps.
            let cx = x + bar_w / 2.0;
            let (y_lo, y_hi) = (y_of(bar.ci_low), y_of(bar.ci_high));
            svg.push_str(&format!(
                "<line x1=\"{cx:.1}\" y1=\"{y_lo:.1}\" x2=\"{cx:.1}\" y2=\"{y_hi:.1}\" stroke=\"#222\" stroke-width=\"1.5\"/>\n<line x1=\"{:.1}\" y1=\"{y_lo:.1}\" x2=\"{:.1}\" y2=\"{y_lo:.1}\" stroke=\"#222\" stroke-width=\"1.5\"/>\n<line x1=\"{:.1}\" y1=\"{y_hi:.1}\" x2=\"{:.1}\" y2=\"{y_hi:.1}\" stroke=\"#222\" stroke-width=\"1.5\"/>\n",
                cx - 5.0, cx + 5.0, cx - 5.0, cx + 5.0,
            ));
        }
        // Tier label centered under its group.
        let center = x_of(tier_index, 0) + group_w / 2.0;
        svg.push_str(&format!(
            "<text x=\"{center:.1}\" y=\"{:.1}\" font-size=\"12\" fill=\"#222\" text-anchor=\"middle\">{tier}</text>\n",
            margin_top + plot_h + 18.0,
        ));
    }

    // Baseline and legend.
    svg.push_str(&format!(
        "<line x1=\"{margin_left}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#222\"/>\n",
        y_of(0.0),
        margin_left + plot_w,
        y_of(0.0),
    ));
    for (run_index, run) in runs.iter().enumerate() {
        let y = margin_top + plot_h + 36.0 + run_index as f64 * 18.0;
        svg.push_str(&format!(
            "<rect x=\"{margin_left}\" y=\"{:.1}\" width=\"12\" height=\"12\" fill=\"{}\"/>\n<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" fill=\"#222\">{run}</text>\n",
            y - 10.0,
            PALETTE[run_index % PALETTE.len()],
            margin_left + 18.0,
            y,
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
