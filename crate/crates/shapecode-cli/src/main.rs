//! `shapecode` — the command-line face of the toolkit.
//!
//! Exit codes are stable: 0 success, 1 operational error (I/O, bad
//! arguments, parse failures), 2 dataset verification failure (hash
//! mismatch), 3 generation exhausted (tier constraints unsatisfiable).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use shapecode::analysis::{
    difficulty_chart, error_histogram, histogram_csv, qualitative_panel, summarize_run,
    AnalysisError, DEFAULT_BOOTSTRAP_SEED, DEFAULT_RESAMPLES,
};
use shapecode::generate::{
    generate_eval_v1, generate_split, verify_dataset, GenerateError, TierConfig, EVAL_V1_SEEDS,
};
use shapecode::runner::{
    load_run_artifact, resolve_runs_root, run_split, AdapterSpec, RunError, RunOptions,
};
use shapecode::{evaluate, parse, read_png, render, serialize, write_png, RenderConfig};

const EXIT_VERIFICATION: u8 = 2;
const EXIT_EXHAUSTED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "shapecode",
    version,
    about = "Renewable perception-to-program benchmark toolkit",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic split (PNGs, per-sample JSON, manifest).
    Generate(GenerateArgs),
    /// Recompute pixel hashes and compare them to the manifest.
    Verify {
        /// Dataset directory containing manifest.json.
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Parse a program file and print its canonical form.
    Parse {
        /// Path to the program text.
        #[arg(long)]
        program: PathBuf,
    },
    /// Render a program file to a PNG.
    Render {
        /// Path to the program text.
        #[arg(long)]
        program: PathBuf,
        /// Output PNG path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a predicted program against a target PNG.
    Eval {
        /// Path to the predicted program text.
        #[arg(long)]
        pred: PathBuf,
        /// Path to the target PNG.
        #[arg(long)]
        target: PathBuf,
    },
    /// Execute an adapter over a split and write run artifacts.
    Run(RunArgs),
    /// Aggregate run artifacts into tables, histograms, and figures.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["preset", "split"]))]
struct GenerateArgs {
    /// Named preset; currently only "eval_v1" (3 tiers × seeds 0-49).
    #[arg(long)]
    preset: Option<String>,
    /// Split name for a custom generation.
    #[arg(long)]
    split: Option<String>,
    /// Comma-separated builtin tier names (easy,medium,hard).
    #[arg(long, value_delimiter = ',', conflicts_with = "preset")]
    tiers: Vec<String>,
    /// JSON file holding an array of tier configurations (alternative to --tiers).
    #[arg(long, conflicts_with_all = ["preset", "tiers"])]
    tiers_file: Option<PathBuf>,
    /// Inclusive seed range LO..HI (default 0..49).
    #[arg(long, conflicts_with = "preset")]
    seeds: Option<String>,
    /// Output dataset directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["adapter", "command"]))]
struct RunArgs {
    /// Dataset directory to evaluate over.
    #[arg(long)]
    dataset: PathBuf,
    /// Builtin adapter name: empty | heuristic-cv.
    #[arg(long)]
    adapter: Option<String>,
    /// External command template; {image} is required, {prompt_file} optional
    /// (without it the prompt is piped to stdin). Split on whitespace, no shell.
    #[arg(long)]
    command: Option<String>,
    /// Label for an external adapter (defaults to "external").
    #[arg(long)]
    name: Option<String>,
    /// Per-attempt timeout in seconds.
    #[arg(long)]
    timeout: Option<u64>,
    /// Retries after a failed attempt.
    #[arg(long)]
    retries: Option<u32>,
    /// Backoff base in seconds (delay before retry n is base * 2^(n-1)).
    #[arg(long)]
    backoff: Option<f64>,
    /// Worker threads over samples.
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
    /// Runs root (default: $SHAPECODE_RUNS_DIR, then ./runs).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Resume an existing run id, skipping samples already recorded.
    #[arg(long)]
    resume: Option<String>,
    /// Skip dataset hash verification before running.
    #[arg(long)]
    skip_verify: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// One or more run directories (each holding run_config.json).
    #[arg(long, num_args = 1.., required = true)]
    runs: Vec<PathBuf>,
    /// Output directory for reports.
    #[arg(long)]
    out: PathBuf,
    /// Also emit SVG charts and qualitative panels.
    #[arg(long)]
    figures: bool,
    /// Bootstrap resamples.
    #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
    resamples: usize,
    /// Bootstrap PRNG seed (recorded in report headers).
    #[arg(long, default_value_t = DEFAULT_BOOTSTRAP_SEED)]
    seed: u64,
    /// Best-scoring samples to include in each qualitative panel.
    #[arg(long, default_value_t = 3)]
    wins: usize,
    /// Worst-scoring samples to include in each qualitative panel.
    #[arg(long, default_value_t = 3)]
    losses: usize,
}

/// An error plus the exit code it maps to.
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn operational(message: impl Into<String>) -> CliError {
        CliError { code: 1, message: message.into() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> CliError {
        CliError::operational(format!("I/O error: {err}"))
    }
}

impl From<GenerateError> for CliError {
    fn from(err: GenerateError) -> CliError {
        let code = match err {
            GenerateError::Exhausted { .. } => EXIT_EXHAUSTED,
            _ => 1,
        };
        CliError { code, message: err.to_string() }
    }
}

impl From<RunError> for CliError {
    fn from(err: RunError) -> CliError {
        let code = match err {
            RunError::VerificationFailed { .. } => EXIT_VERIFICATION,
            RunError::Dataset(GenerateError::Exhausted { .. }) => EXIT_EXHAUSTED,
            _ => 1,
        };
        CliError { code, message: err.to_string() }
    }
}

impl From<AnalysisError> for CliError {
    fn from(err: AnalysisError) -> CliError {
        CliError::operational(err.to_string())
    }
}

impl From<shapecode::render::ImageError> for CliError {
    fn from(err: shapecode::render::ImageError) -> CliError {
        CliError::operational(err.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}

fn dispatch(command: Command) -> Result<u8, CliError> {
    match command {
        Command::Generate(args) => cmd_generate(args),
        Command::Verify { dataset } => cmd_verify(&dataset),
        Command::Parse { program } => cmd_parse(&program),
        Command::Render { program, out } => cmd_render(&program, &out),
        Command::Eval { pred, target } => cmd_eval(&pred, &target),
        Command::Run(args) => cmd_run(args),
        Command::Analyze(args) => cmd_analyze(args),
    }
}

/// Parses an inclusive seed range written as `LO..HI`.
fn parse_seed_range(text: &str) -> Result<std::ops::RangeInclusive<u64>, CliError> {
    let parts: Vec<&str> = text.split("..").collect();
    let err = || CliError::operational(format!("invalid seed range {text:?}; expected LO..HI"));
    if parts.len() != 2 {
        return Err(err());
    }
    let lo: u64 = parts[0].parse().map_err(|_| err())?;
    let hi: u64 = parts[1].parse().map_err(|_| err())?;
    if lo > hi {
        return Err(err());
    }
    Ok(lo..=hi)
}

fn cmd_generate(args: GenerateArgs) -> Result<u8, CliError> {
    if let Some(preset) = &args.preset {
        if preset != "eval_v1" {
            return Err(CliError::operational(format!(
                "unknown preset {preset:?}; only \"eval_v1\" is available"
            )));
        }
        let manifest = generate_eval_v1(&args.out)?;
        println!(
            "generated split eval_v1: {} samples (seeds {}..{}) in {}",
            manifest.len(),
            EVAL_V1_SEEDS.start(),
            EVAL_V1_SEEDS.end(),
            args.out.display()
        );
        return Ok(0);
    }

    let split = args.split.as_deref().expect("clap group guarantees --split");
    let tiers: Vec<TierConfig> = if let Some(file) = &args.tiers_file {
        serde_json::from_slice(&std::fs::read(file)?)
            .map_err(|e| CliError::operational(format!("bad tier file {}: {e}", file.display())))?
    } else if args.tiers.is_empty() {
        TierConfig::eval_v1_tiers()
    } else {
        args.tiers
            .iter()
            .map(|name| {
                TierConfig::builtin(name).ok_or_else(|| {
                    CliError::operational(format!(
                        "unknown tier {name:?}; builtin tiers are easy, medium, hard"
                    ))
                })
            })
            .collect::<Result<_, _>>()?
    };
    if tiers.is_empty() {
        return Err(CliError::operational("no tiers specified"));
    }
    let seeds = match &args.seeds {
        Some(text) => parse_seed_range(text)?,
        None => EVAL_V1_SEEDS,
    };
    let manifest = generate_split(split, &tiers, seeds, &args.out)?;
    println!("generated split {split}: {} samples in {}", manifest.len(), args.out.display());
    Ok(0)
}

fn cmd_verify(dataset: &Path) -> Result<u8, CliError> {
    let report = verify_dataset(dataset)?;
    if report.is_clean() {
        println!("verified {} samples: all hashes match", report.checked);
        Ok(0)
    } else {
        for issue in &report.issues {
            println!("MISMATCH {}: {}", issue.sample_id, issue.problem);
        }
        println!("verification failed: {} of {} samples", report.issues.len(), report.checked);
        Ok(EXIT_VERIFICATION)
    }
}

fn cmd_parse(program: &Path) -> Result<u8, CliError> {
    let text = std::fs::read_to_string(program)?;
    match parse(&text) {
        Ok(scene) => {
            print!("{}", serialize(&scene));
            eprintln!("ok: {} shape(s)", scene.len());
            Ok(0)
        }
        Err(err) => Err(CliError::operational(format!("parse failed: {err}"))),
    }
}

fn cmd_render(program: &Path, out: &Path) -> Result<u8, CliError> {
    let text = std::fs::read_to_string(program)?;
    let scene =
        parse(&text).map_err(|err| CliError::operational(format!("parse failed: {err}")))?;
    let image = render(&scene, &RenderConfig::default());
    write_png(&image, out)?;
    println!("rendered {} shape(s) to {}", scene.len(), out.display());
    Ok(0)
}

fn cmd_eval(pred: &Path, target: &Path) -> Result<u8, CliError> {
    let prediction = std::fs::read_to_string(pred)?;
    let target = read_png(target)?;
    let result = evaluate(&prediction, &target);
    let line = serde_json::to_string(&result)
        .map_err(|e| CliError::operational(format!("serialization failed: {e}")))?;
    println!("{line}");
    Ok(0)
}

fn cmd_run(args: RunArgs) -> Result<u8, CliError> {
    let mut adapter = match (&args.adapter, &args.command) {
        (Some(name), None) => AdapterSpec::builtin(name),
        (None, Some(template)) => {
            AdapterSpec::external(args.name.as_deref().unwrap_or("external"), template)
        }
        _ => unreachable!("clap group enforces exactly one source"),
    }
    .map_err(|err| CliError::operational(err.to_string()))?;
    if let Some(timeout) = args.timeout {
        adapter.timeout_seconds = timeout;
    }
    if let Some(retries) = args.retries {
        adapter.max_retries = retries;
    }
    if let Some(backoff) = args.backoff {
        adapter.backoff_base_seconds = backoff;
    }
    adapter.validate().map_err(|err| CliError::operational(err.to_string()))?;

    let runs_root = resolve_runs_root(args.out.as_deref());
    let options = RunOptions {
        parallelism: args.parallelism.max(1),
        verify: !args.skip_verify,
        resume_run_id: args.resume.clone(),
    };
    let artifact = run_split(&args.dataset, &adapter, &runs_root, &options)?;
    let overall = &artifact.summary.overall;
    println!("run {} complete: {} samples in {}", artifact.summary.run_id, artifact.summary.sample_count, artifact.run_dir.display());
    println!(
        "overall: exact {:.3}  pixacc {:.3}  fg_iou {:.3}  parse {:.3}  exec {:.3}",
        overall.exact_match,
        overall.pixel_accuracy,
        overall.fg_iou,
        overall.parse_success,
        overall.exec_success
    );
    Ok(0)
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<u8, CliError> {
    std::fs::create_dir_all(&args.out)?;
    let mut artifacts = Vec::new();
    for run_dir in &args.runs {
        artifacts.push(load_run_artifact(run_dir)?);
    }

    for artifact in &artifacts {
        let table = summarize_run(artifact, args.resamples, args.seed)?;
        let stem = format!("summary_{}", artifact.summary.run_id);
        std::fs::write(args.out.join(format!("{stem}.csv")), table.to_csv())?;
        std::fs::write(args.out.join(format!("{stem}.md")), table.to_markdown())?;
    }

    let histograms = error_histogram(&artifacts);
    std::fs::write(args.out.join("error_histogram.csv"), histogram_csv(&histograms))?;

    if args.figures {
        for metric in ["exact_match", "fg_iou"] {
            let chart = args.out.join(format!("{metric}_by_tier.svg"));
            difficulty_chart(&artifacts, metric, &chart, args.resamples, args.seed)?;
        }
        for artifact in &artifacts {
            let panel_dir = args.out.join(format!("panel_{}", artifact.summary.run_id));
            qualitative_panel(artifact, args.wins, args.losses, &panel_dir)?;
        }
    }
    println!(
        "analyzed {} run(s) into {} (bootstrap: {} resamples, seed {})",
        artifacts.len(),
        args.out.display(),
        args.resamples,
        args.seed
    );
    Ok(0)
}
