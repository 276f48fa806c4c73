//! Evaluation-run orchestration: iterate a split, obtain a prediction per
//! sample from a pluggable adapter, normalize it, score it, and write
//! auditable artifacts.
//!
//! Artifact layout under the runs root:
//!
//! ```text
//! runs/<run_id>/run_config.json     adapter, prompt, split reference, version
//! runs/<run_id>/prompt.txt          only when the command uses {prompt_file}
//! runs/<run_id>/samples/<id>.json   one record per sample, written atomically
//! runs/<run_id>/summary.json        aggregate means + error histogram
//! ```
//!
//! Per-sample records are written via temp-file-plus-rename, so an
//! interrupted run leaves only complete, valid records; resuming skips them
//! and reproduces the uninterrupted artifact (latency and run_id aside).

use std::collections::{BTreeMap, VecDeque};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{empty_baseline, heuristic_baseline};
use crate::dsl::ShapeKind;
use crate::eval::{evaluate, EvalResult};
use crate::generate::{load_manifest, verify_dataset, GenerateError, Manifest};
use crate::render::{read_png, ImageError, RasterImage};

/// Names accepted by [`AdapterSpec::builtin`].
pub const BUILTIN_ADAPTERS: [&str; 2] = ["empty", "heuristic-cv"];

const DEFAULT_TIMEOUT_SECONDS: u64 = 1800;
const DEFAULT_MAX_RETRIES: u32 = 2;
const DEFAULT_BACKOFF_BASE_SECONDS: f64 = 2.0;

/// The frozen zero-shot prompt shipped with the toolkit. Its SHA-256 is
/// recorded in every run_config so downstream analysis can detect drift.
pub fn default_prompt() -> &'static str {
    "You are given a 512x512 grayscale image of black shapes on a white background. \
Reconstruct the image as a program.\n\
\n\
Return only valid ShapeCodeBench DSL code. Do not include markdown fences, comments, or prose.\n\
\n\
The language has exactly four primitives (one call per line, keyword arguments, \
integer literals only):\n\
\n\
filled_circle(cx=<int>, cy=<int>, radius=<int>)\n\
circle(cx=<int>, cy=<int>, radius=<int>, stroke=<int>)\n\
filled_square(cx=<int>, cy=<int>, size=<int>)\n\
square(cx=<int>, cy=<int>, size=<int>, stroke=<int>)\n\
\n\
Constraints: cx and cy lie in [0, 511]; radius and size lie in [1, 512]; \
circle stroke lies in [1, radius]; square stroke lies in [1, ceil(size/2)]. \
If the image is blank, return nothing.\n"
}

/// How a run obtains predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdapterMode {
    Builtin,
    ExternalCommand,
}

/// A pluggable prediction source: a named builtin baseline or an external
/// command template executed once per sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdapterSpec {
    pub name: String,
    pub mode: AdapterMode,
    /// External mode only. Whitespace-split into argv (no shell); every token
    /// has `{image}` (required somewhere in the template) and `{prompt_file}`
    /// (optional) substituted. Without `{prompt_file}` the prompt is piped to
    /// the child's stdin.
    pub command_template: Option<String>,
    pub timeout_seconds: u64,
    pub max_retries: u32,
    pub backoff_base_seconds: f64,
}

impl AdapterSpec {
    /// A builtin baseline adapter: `"empty"` or `"heuristic-cv"`.
    pub fn builtin(name: &str) -> Result<AdapterSpec, RunError> {
        if !BUILTIN_ADAPTERS.contains(&name) {
            return Err(RunError::InvalidAdapter(format!(
                "unknown builtin adapter {name:?}; expected one of {BUILTIN_ADAPTERS:?}"
            )));
        }
        Ok(AdapterSpec {
            name: name.to_string(),
            mode: AdapterMode::Builtin,
            command_template: None,
            timeout_seconds: DEFAULT_TIMEOUT_SECONDS,
            max_retries: DEFAULT_MAX_RETRIES,
            backoff_base_seconds: DEFAULT_BACKOFF_BASE_SECONDS,
        })
    }

    /// An external command adapter. The template must contain `{image}`.
    pub fn external(name: &str, command_template: &str) -> Result<AdapterSpec, RunError> {
        let spec = AdapterSpec {
            name: name.to_string(),
            mode: AdapterMode::ExternalCommand,
            command_template: Some(command_template.to_string()),
            timeout_seconds: DEFAULT_TIMEOUT_SECONDS,
            max_retries: DEFAULT_MAX_RETRIES,
            backoff_base_seconds: DEFAULT_BACKOFF_BASE_SECONDS,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        match self.mode {
            AdapterMode::Builtin => {
                if !BUILTIN_ADAPTERS.contains(&self.name.as_str()) {
                    return Err(RunError::InvalidAdapter(format!(
                        "unknown builtin adapter {:?}",
                        self.name
                    )));
                }
            }
            AdapterMode::ExternalCommand => {
                let template = self.command_template.as_deref().unwrap_or("");
                if !template.contains("{image}") {
                    return Err(RunError::InvalidAdapter(
                        "external command template must contain {image}".to_string(),
                    ));
                }
                if template.split_whitespace().next().is_none() {
                    return Err(RunError::InvalidAdapter(
                        "external command template is empty".to_string(),
                    ));
                }
            }
        }
        if self.timeout_seconds == 0 {
            return Err(RunError::InvalidAdapter(
                "timeout_seconds must be positive".to_string(),
            ));
        }
        if !(self.backoff_base_seconds.is_finite() && self.backoff_base_seconds >= 0.0) {
            return Err(RunError::InvalidAdapter(
                "backoff_base_seconds must be a non-negative number".to_string(),
            ));
        }
        Ok(())
    }
}

/// Extracts DSL text from a raw model response without ever failing:
/// fenced block → primitive-prefixed line filter → raw unchanged.
pub fn normalize_prediction(raw: &str) -> String {
    // Stage 1: fenced code blocks. Prefer the first block consisting solely
    // of primitive calls (ignoring blank lines); otherwise fall back to the
    // first block verbatim. Fence lines and language tags are stripped.
    let blocks = fenced_blocks(raw);
    if !blocks.is_empty() {
        for block in &blocks {
            let mut lines = block.lines().map(str::trim).filter(|l| !l.is_empty());
            let mut saw_any = false;
            let all_primitive = lines.all(|line| {
                saw_any = true;
                starts_with_primitive(line)
            });
            if saw_any && all_primitive {
                return block.clone();
            }
        }
        return blocks[0].clone();
    }

    // Stage 2: keep exactly the primitive-prefixed lines, if there are any.
    let kept: Vec<&str> = raw
        .lines()
        .filter(|line| starts_with_primitive(line.trim()))
        .collect();
    if !kept.is_empty() {
        return kept.join("\n");
    }

    // Stage 3: surface the raw response so parse errors stay attributable.
    raw.to_string()
}

fn starts_with_primitive(line: &str) -> bool {
    ShapeKind::ALL.iter().any(|kind| line.starts_with(kind.name()))
}

/// Inner texts of all triple-backtick fenced blocks, in order. A fence line
/// is one whose trimmed form starts with ```` ``` ````; an unterminated final
/// block extends to the end of the input.
fn fenced_blocks(raw: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in raw.lines() {
        if line.trim_start().starts_with("```") {
            match current.take() {
                Some(body) => blocks.push(body.join("\n")),
                None => current = Some(Vec::new()),
            }
        } else if let Some(body) = &mut current {
            body.push(line);
        }
    }
    if let Some(body) = current {
        blocks.push(body.join("\n"));
    }
    blocks
}

/// What was sent to the adapter for one sample. The prompt itself lives once
/// in the run config; records reference it by hash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestDescription {
    pub image_path: String,
    pub prompt_sha256: String,
}

/// One sample's full audit trail.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleRun {
    pub sample_id: String,
    pub difficulty: String,
    pub request: RequestDescription,
    pub raw_response: String,
    pub normalized_prediction: String,
    pub latency_ms: u64,
    pub attempt_count: u32,
    /// Free-form adapter diagnostics: failure reasons after exhausted
    /// retries, or vendor usage blobs passed through opaquely.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub eval: EvalResult,
}

/// Everything needed to reproduce a run, written before the first sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub run_id: String,
    pub adapter: AdapterSpec,
    pub prompt: String,
    pub prompt_sha256: String,
    pub dataset_dir: String,
    pub manifest_sha256: String,
    pub sample_count: usize,
    pub parallelism: usize,
    pub tool_version: String,
}

/// Mean of each metric over one stratum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricMeans {
    pub n: usize,
    pub exact_match: f64,
    pub pixel_accuracy: f64,
    pub fg_iou: f64,
    pub parse_success: f64,
    pub exec_success: f64,
}

impl MetricMeans {
    /// Sample-count-weighted combination of disjoint strata. The overall row
    /// of every summary is produced by this exact expression (iterating
    /// tiers in sorted order), which is what makes "overall equals the
    /// weighted per-tier mean" an identity rather than an approximation.
    pub fn weighted_combine<'a>(parts: impl IntoIterator<Item = &'a MetricMeans>) -> MetricMeans {
        let mut acc = MetricMeans {
            n: 0,
            exact_match: 0.0,
            pixel_accuracy: 0.0,
            fg_iou: 0.0,
            parse_success: 0.0,
            exec_success: 0.0,
        };
        for part in parts {
            let w = part.n as f64;
            acc.n += part.n;
            acc.exact_match += w * part.exact_match;
            acc.pixel_accuracy += w * part.pixel_accuracy;
            acc.fg_iou += w * part.fg_iou;
            acc.parse_success += w * part.parse_success;
            acc.exec_success += w * part.exec_success;
        }
        let d = acc.n.max(1) as f64;
        acc.exact_match /= d;
        acc.pixel_accuracy /= d;
        acc.fg_iou /= d;
        acc.parse_success /= d;
        acc.exec_success /= d;
        acc
    }
}

/// Aggregates over a completed run; a pure function of the sample records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub sample_count: usize,
    pub overall: MetricMeans,
    pub per_tier: BTreeMap<String, MetricMeans>,
    /// Error-tag counts; `"none"` counts cleanly evaluated samples. Values
    /// sum to `sample_count`.
    pub error_histogram: BTreeMap<String, usize>,
}

/// A completed (or loaded) run: config, per-sample records sorted by
/// sample_id, and the summary.
#[derive(Debug, Clone)]
pub struct RunArtifact {
    pub run_dir: PathBuf,
    pub config: RunConfig,
    pub records: Vec<SampleRun>,
    pub summary: RunSummary,
}

/// Knobs for [`run_split`] beyond the adapter itself.
#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Worker threads over samples. Default 1 (rate-limit friendly).
    pub parallelism: usize,
    /// Re-verify dataset hashes before running. Default true.
    pub verify: bool,
    /// Resume an existing run directory by id, skipping samples that already
    /// have valid records.
    pub resume_run_id: Option<String>,
}

impl Default for RunOptions {
    fn default() -> RunOptions {
        RunOptions { parallelism: 1, verify: true, resume_run_id: None }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid adapter: {0}")]
    InvalidAdapter(String),
    #[error(transparent)]
    Dataset(#[from] GenerateError),
    #[error("dataset failed hash verification ({issues} issue(s)); first: {first}")]
    VerificationFailed { issues: usize, first: String },
    #[error("run {0:?} not found under the runs root")]
    UnknownRun(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// Artifact root resolution: explicit path, else `SHAPECODE_RUNS_DIR`, else
/// `runs` under the current directory.
pub fn resolve_runs_root(explicit: Option<&Path>) -> PathBuf {
    if let Some(path) = explicit {
        return path.to_path_buf();
    }
    if let Some(env) = std::env::var_os("SHAPECODE_RUNS_DIR") {
        if !env.is_empty() {
            return PathBuf::from(env);
        }
    }
    PathBuf::from("runs")
}

fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

/// `<UTC timestamp>_<sanitized adapter name>`, suffixed `-2`, `-3`, … if the
/// directory already exists (sub-second re-runs).
fn fresh_run_id(runs_root: &Path, adapter_name: &str) -> String {
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
    let safe: String = adapter_name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '-' })
        .collect();
    let base = format!("{stamp}_{safe}");
    if !runs_root.join(&base).exists() {
        return base;
    }
    for n in 2.. {
        let candidate = format!("{base}-{n}");
        if !runs_root.join(&candidate).exists() {
            return candidate;
        }
    }
    unreachable!()
}

/// Writes `value` as pretty JSON via a temp file and an atomic rename, so a
/// kill mid-write never leaves a torn file under the final name.
fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let tmp = path.with_extension("json.tmp");
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

enum Attempt {
    Success(Vec<u8>),
    Failure(String),
}

/// Runs one external attempt with a hard wall-clock timeout. Stdout is
/// drained on a helper thread so a chatty child can never dead-lock against
/// the poll loop; on timeout the child is killed and reaped.
fn run_external_once(
    argv: &[String],
    stdin_data: Option<&[u8]>,
    timeout: Duration,
) -> Result<Attempt, RunError> {
    let mut command = Command::new(&argv[0]);
    command
        .args(&argv[1..])
        .stdin(if stdin_data.is_some() { Stdio::piped() } else { Stdio::null() })
        .stdout(Stdio::piped())
        .stderr(Stdio::null());
    let mut child = match command.spawn() {
        Ok(child) => child,
        Err(err) => return Ok(Attempt::Failure(format!("failed to spawn {:?}: {err}", argv[0]))),
    };

    if let Some(data) = stdin_data {
        let mut stdin = child.stdin.take().expect("stdin was piped");
        let data = data.to_vec();
        std::thread::spawn(move || {
            let _ = stdin.write_all(&data);
        });
    }
    let mut stdout = child.stdout.take().expect("stdout was piped");
    let reader = std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stdout.read_to_end(&mut buf);
        buf
    });

    let deadline = Instant::now() + timeout;
    let status = loop {
        match child.try_wait()? {
            Some(status) => break status,
            None if Instant::now() >= deadline => {
                kill_and_reap(&mut child);
                // Deliberately do not join the reader: grandchildren may
                // still hold the stdout pipe open after the child is dead,
                // and the detached thread exits on its own once they do.
                drop(reader);
                return Ok(Attempt::Failure(format!(
                    "timed out after {} s",
                    timeout.as_secs_f64()
                )));
            }
            None => std::thread::sleep(Duration::from_millis(5)),
        }
    };
    let bytes = reader.join().unwrap_or_default();
    if status.success() {
        Ok(Attempt::Success(bytes))
    } else {
        Ok(Attempt::Failure(format!("adapter exited with {status}")))
    }
}

fn kill_and_reap(child: &mut Child) {
    let _ = child.kill();
    let _ = child.wait();
}

/// The adapter response for one sample plus bookkeeping.
struct Prediction {
    raw: String,
    attempt_count: u32,
    note: Option<String>,
}

fn predict_builtin(name: &str, target: &RasterImage) -> String {
    match name {
        "empty" => empty_baseline(target),
        "heuristic-cv" => heuristic_baseline(target),
        other => unreachable!("builtin adapter {other:?} passed validation"),
    }
}

fn predict_external(
    adapter: &AdapterSpec,
    image_path: &Path,
    prompt: &str,
    prompt_file: Option<&Path>,
) -> Result<Prediction, RunError> {
    let template = adapter.command_template.as_deref().expect("validated external template");
    let image = image_path.to_string_lossy();
    let argv: Vec<String> = template
        .split_whitespace()
        .map(|token| {
            let mut token = token.replace("{image}", &image);
            if let Some(path) = prompt_file {
                token = token.replace("{prompt_file}", &path.to_string_lossy());
            }
            token
        })
        .collect();
    let stdin_data = if prompt_file.is_none() { Some(prompt.as_bytes()) } else { None };
    let timeout = Duration::from_secs(adapter.timeout_seconds);

    let mut last_failure = String::new();
    let attempts = adapter.max_retries + 1;
    for attempt in 0..attempts {
        if attempt > 0 {
            let delay = adapter.backoff_base_seconds * f64::powi(2.0, attempt as i32 - 1);
            std::thread::sleep(Duration::from_secs_f64(delay));
        }
        match run_external_once(&argv, stdin_data, timeout)? {
            Attempt::Success(bytes) => {
                return Ok(Prediction {
                    raw: String::from_utf8_lossy(&bytes).into_owned(),
                    attempt_count: attempt + 1,
                    note: None,
                });
            }
            Attempt::Failure(reason) => last_failure = reason,
        }
    }
    // Exhausted retries: synthesize an empty response (scores as a parse
    // failure) rather than aborting the whole run.
    Ok(Prediction {
        raw: String::new(),
        attempt_count: attempts,
        note: Some(format!("adapter failed after {attempts} attempt(s): {last_failure}")),
    })
}

/// Recomputes the aggregate summary from per-sample records alone.
pub fn summarize_records(run_id: &str, records: &[SampleRun]) -> RunSummary {
    fn means_of(evals: &[&SampleRun]) -> MetricMeans {
        let n = evals.len();
        let d = n.max(1) as f64;
        let sum = |f: &dyn Fn(&EvalResult) -> f64| -> f64 {
            evals.iter().map(|r| f(&r.eval)).sum::<f64>() / d
        };
        MetricMeans {
            n,
            exact_match: sum(&|e| f64::from(e.exact_match)),
            pixel_accuracy: sum(&|e| e.pixel_accuracy),
            fg_iou: sum(&|e| e.fg_iou),
            parse_success: sum(&|e| f64::from(e.parse_success)),
            exec_success: sum(&|e| f64::from(e.exec_success)),
        }
    }

    let mut by_tier: BTreeMap<String, Vec<&SampleRun>> = BTreeMap::new();
    for record in records {
        by_tier.entry(record.difficulty.clone()).or_default().push(record);
    }
    let mut histogram: BTreeMap<String, usize> = BTreeMap::new();
    for record in records {
        let key = match &record.eval.error_tag {
            Some(tag) => tag.as_str().to_string(),
            None => "none".to_string(),
        };
        *histogram.entry(key).or_default() += 1;
    }
    let per_tier: BTreeMap<String, MetricMeans> =
        by_tier.into_iter().map(|(tier, rs)| (tier, means_of(&rs))).collect();
    RunSummary {
        run_id: run_id.to_string(),
        sample_count: records.len(),
        overall: MetricMeans::weighted_combine(per_tier.values()),
        per_tier,
        error_histogram: histogram,
    }
}

/// Executes one adapter over every sample of a split and writes the artifact
/// tree under `runs_root`. Individual adapter failures never abort the run;
/// only I/O and dataset errors do.
pub fn run_split(
    dataset_dir: &Path,
    adapter: &AdapterSpec,
    runs_root: &Path,
    options: &RunOptions,
) -> Result<RunArtifact, RunError> {
    adapter.validate()?;
    let manifest: Manifest = load_manifest(dataset_dir)?;
    if options.verify {
        let report = verify_dataset(dataset_dir)?;
        if !report.is_clean() {
            let first = report.issues[0].clone();
            return Err(RunError::VerificationFailed {
                issues: report.issues.len(),
                first: format!("{}: {}", first.sample_id, first.problem),
            });
        }
    }

    let run_id = match &options.resume_run_id {
        Some(id) => {
            if !runs_root.join(id).is_dir() {
                return Err(RunError::UnknownRun(id.clone()));
            }
            id.clone()
        }
        None => fresh_run_id(runs_root, &adapter.name),
    };
    let run_dir = runs_root.join(&run_id);
    let samples_dir = run_dir.join("samples");
    std::fs::create_dir_all(&samples_dir)?;

    let prompt = default_prompt().to_string();
    let prompt_sha256 = sha256_hex(prompt.as_bytes());
    let manifest_sha256 = sha256_hex(&std::fs::read(dataset_dir.join("manifest.json"))?);

    // The prompt travels as a file only when the template asks for one;
    // otherwise it is piped to the child's stdin.
    let wants_prompt_file = adapter
        .command_template
        .as_deref()
        .is_some_and(|t| t.contains("{prompt_file}"));
    let prompt_file = if wants_prompt_file {
        let path = run_dir.join("prompt.txt");
        std::fs::write(&path, &prompt)?;
        Some(path)
    } else {
        None
    };

    let config = RunConfig {
        run_id: run_id.clone(),
        adapter: adapter.clone(),
        prompt,
        prompt_sha256: prompt_sha256.clone(),
        dataset_dir: dataset_dir.to_string_lossy().into_owned(),
        manifest_sha256,
        sample_count: manifest.len(),
        parallelism: options.parallelism.max(1),
        tool_version: crate::TOOL_VERSION.to_string(),
    };
    write_json_atomic(&run_dir.join("run_config.json"), &config)?;

    // Resume support: any sample whose record already deserializes cleanly is
    // kept as-is; torn or missing files are (re)computed.
    let mut done: BTreeMap<String, SampleRun> = BTreeMap::new();
    if options.resume_run_id.is_some() {
        for sample_id in manifest.keys() {
            let path = samples_dir.join(format!("{sample_id}.json"));
            let Ok(bytes) = std::fs::read(&path) else { continue };
            if let Ok(record) = serde_json::from_slice::<SampleRun>(&bytes) {
                if record.sample_id == *sample_id {
                    done.insert(sample_id.clone(), record);
                }
            }
        }
    }

    let queue: Mutex<VecDeque<(&String, &crate::generate::ManifestEntry)>> = Mutex::new(
        manifest.iter().filter(|(id, _)| !done.contains_key(*id)).collect(),
    );
    let results: Mutex<Vec<SampleRun>> = Mutex::new(Vec::new());
    let failure: Mutex<Option<RunError>> = Mutex::new(None);

    let workers = options.parallelism.max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let item = queue.lock().unwrap().pop_front();
                let Some((sample_id, entry)) = item else { break };
                let outcome = run_one_sample(
                    dataset_dir,
                    sample_id,
                    &entry.difficulty,
                    adapter,
                    &config.prompt,
                    &prompt_sha256,
                    prompt_file.as_deref(),
                    &samples_dir,
                );
                match outcome {
                    Ok(record) => results.lock().unwrap().push(record),
                    Err(err) => {
                        failure.lock().unwrap().get_or_insert(err);
                        queue.lock().unwrap().clear();
                        break;
                    }
                }
            });
        }
    });
    if let Some(err) = failure.into_inner().unwrap().take() {
        return Err(err);
    }

    let mut records: Vec<SampleRun> = done.into_values().collect();
    records.extend(results.into_inner().unwrap());
    records.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));

    let summary = summarize_records(&run_id, &records);
    write_json_atomic(&run_dir.join("summary.json"), &summary)?;
    Ok(RunArtifact { run_dir, config, records, summary })
}

#[allow(clippy::too_many_arguments)]
fn run_one_sample(
    dataset_dir: &Path,
    sample_id: &str,
    difficulty: &str,
    adapter: &AdapterSpec,
    prompt: &str,
    prompt_sha256: &str,
    prompt_file: Option<&Path>,
    samples_dir: &Path,
) -> Result<SampleRun, RunError> {
    let image_path = dataset_dir.join(format!("{sample_id}.png"));
    let target = read_png(&image_path)?;

    let started = Instant::now();
    let prediction = match adapter.mode {
        AdapterMode::Builtin => Prediction {
            raw: predict_builtin(&adapter.name, &target),
            attempt_count: 1,
            note: None,
        },
        AdapterMode::ExternalCommand => {
            predict_external(adapter, &image_path, prompt, prompt_file)?
        }
    };
    let latency_ms = started.elapsed().as_millis() as u64;

    let normalized = normalize_prediction(&prediction.raw);
    let eval = evaluate(&normalized, &target);
    let record = SampleRun {
        sample_id: sample_id.to_string(),
        difficulty: difficulty.to_string(),
        request: RequestDescription {
            image_path: image_path.to_string_lossy().into_owned(),
            prompt_sha256: prompt_sha256.to_string(),
        },
        raw_response: prediction.raw,
        normalized_prediction: normalized,
        latency_ms,
        attempt_count: prediction.attempt_count,
        note: prediction.note,
        eval,
    };
    write_json_atomic(&samples_dir.join(format!("{sample_id}.json")), &record)?;
    Ok(record)
}

/// Loads a previously written run directory back into memory. Records are
/// returned sorted by sample_id; the stored summary is returned as-is.
pub fn load_run_artifact(run_dir: &Path) -> Result<RunArtifact, RunError> {
    let config: RunConfig =
        serde_json::from_slice(&std::fs::read(run_dir.join("run_config.json"))?)?;
    let summary: RunSummary =
        serde_json::from_slice(&std::fs::read(run_dir.join("summary.json"))?)?;
    let mut records = Vec::new();
    let samples_dir = run_dir.join("samples");
    for entry in std::fs::read_dir(&samples_dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) == Some("json") {
            records.push(serde_json::from_slice::<SampleRun>(&std::fs::read(&path)?)?);
        }
    }
    records.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    Ok(RunArtifact { run_dir: run_dir.to_path_buf(), config, records, summary })
}
