//! The toolkit's acceptance gate: eleven numbered criteria, each implemented
//! as one test that prints a single `criterion NN PASS/FAIL` line (visible
//! with `--nocapture` and in failure reports; the test name itself carries
//! the same number for the default one-line-per-test output).
//!
//! Shared fixtures (the 150-sample reference split and the two baseline runs
//! over it) are built once and reused across criteria.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Instant;

use shapecode::analysis::{bootstrap_ci, error_histogram, summarize_run};
use shapecode::dsl::{bbox_iou, Scene, Shape, ShapeKind};
use shapecode::eval::{evaluate, fg_iou, pixel_accuracy};
use shapecode::generate::{
    generate_eval_v1, generate_scene, generate_split, load_sample_record, verify_dataset,
    Manifest, TierConfig,
};
use shapecode::parser::{classify_error, parse, parse_bytes, ErrorTag};
use shapecode::render::{foreground_mask, read_png, render, RasterImage, RenderConfig};
use shapecode::rng::Prng;
use shapecode::runner::{run_split, AdapterSpec, MetricMeans, RunArtifact, RunOptions};

/// Runs one criterion body, printing its pass/fail line either way.
fn criterion(number: u8, title: &str, body: impl FnOnce() + std::panic::UnwindSafe) {
    let outcome = std::panic::catch_unwind(body);
    let verdict = if outcome.is_ok() { "PASS" } else { "FAIL" };
    println!("criterion {number:02} {verdict}  {title}");
    if let Err(panic) = outcome {
        std::panic::resume_unwind(panic);
    }
}

struct Fixture {
    // Held so the backing temp directory outlives every test.
    _keep: tempfile::TempDir,
    dataset: PathBuf,
    manifest: Manifest,
    generation_seconds: f64,
}

fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let keep = tempfile::tempdir().expect("temp dir");
        let dataset = keep.path().join("eval_v1");
        let started = Instant::now();
        let manifest = generate_eval_v1(&dataset).expect("reference split generates");
        let generation_seconds = started.elapsed().as_secs_f64();
        Fixture { _keep: keep, dataset, manifest, generation_seconds }
    })
}

fn baseline_run(which: &'static str) -> &'static RunArtifact {
    static EMPTY: OnceLock<(tempfile::TempDir, RunArtifact)> = OnceLock::new();
    static HEURISTIC: OnceLock<(tempfile::TempDir, RunArtifact)> = OnceLock::new();
    let cell = match which {
        "empty" => &EMPTY,
        "heuristic-cv" => &HEURISTIC,
        other => panic!("unknown baseline {other:?}"),
    };
    let (_, artifact) = cell.get_or_init(|| {
        let fx = fixture();
        let keep = tempfile::tempdir().expect("temp dir");
        let adapter = AdapterSpec::builtin(which).expect("builtin adapter");
        let artifact = run_split(&fx.dataset, &adapter, keep.path(), &RunOptions::default())
            .expect("baseline run completes");
        (keep, artifact)
    });
    artifact
}

#[test]
fn criterion_01_ground_truth_round_trip() {
    criterion(1, "ground-truth round trip scores 1.0 on all 150 samples in <10s", || {
        let fx = fixture();
        assert_eq!(fx.manifest.len(), 150, "3 tiers x 50 seeds");
        let started = Instant::now();
        for sample_id in fx.manifest.keys() {
            let record = load_sample_record(&fx.dataset, sample_id).expect("record loads");
            let target = read_png(&fx.dataset.join(format!("{sample_id}.png"))).unwrap();
            let result = evaluate(&record.ground_truth_program, &target);
            assert_eq!(result.exact_match, 1, "{sample_id}");
            assert_eq!(result.pixel_accuracy, 1.0, "{sample_id}");
            assert_eq!(result.fg_iou, 1.0, "{sample_id}");
            assert_eq!(result.parse_success, 1, "{sample_id}");
            assert_eq!(result.exec_success, 1, "{sample_id}");
        }
        let elapsed = started.elapsed().as_secs_f64();
        assert!(elapsed < 10.0, "round trip took {elapsed:.2}s");
    });
}

#[test]
fn criterion_02_generation_determinism() {
    criterion(2, "regeneration is manifest-identical, hash-verified, <5s", || {
        let fx = fixture();
        assert!(
            fx.generation_seconds < 5.0,
            "generation took {:.2}s",
            fx.generation_seconds
        );
        let again = tempfile::tempdir().unwrap();
        let second = generate_eval_v1(again.path()).unwrap();
        assert_eq!(second, fx.manifest, "manifests must be identical across runs");
        let report = verify_dataset(&fx.dataset).unwrap();
        assert!(report.is_clean(), "issues: {:?}", report.issues);
        assert_eq!(report.checked, 150);
    });
}

#[test]
fn criterion_03_empty_program_row() {
    criterion(3, "empty-program row: all means 0.000, CIs [0,0], {empty_program: 150}", || {
        let artifact = baseline_run("empty");
        let table = summarize_run(artifact, 1000, 0).unwrap();
        for row in &table.rows {
            assert_eq!(
                (row.mean, row.ci_low, row.ci_high),
                (0.0, 0.0, 0.0),
                "{}/{} must be exactly zero",
                row.stratum,
                row.metric
            );
        }
        let histograms = error_histogram(std::slice::from_ref(artifact));
        assert_eq!(
            histograms[0].1,
            BTreeMap::from([("empty_program".to_string(), 150)])
        );
    });
}

#[test]
fn criterion_04_heuristic_validity() {
    criterion(4, "heuristic parse success is 1.000 [1.000, 1.000] with {none: 150}", || {
        let artifact = baseline_run("heuristic-cv");
        let table = summarize_run(artifact, 1000, 0).unwrap();
        for stratum in ["overall", "easy", "medium", "hard"] {
            let row = table
                .rows
                .iter()
                .find(|r| r.stratum == stratum && r.metric == "parse_success")
                .expect("row exists");
            assert_eq!((row.mean, row.ci_low, row.ci_high), (1.0, 1.0, 1.0), "{stratum}");
        }
        let histograms = error_histogram(std::slice::from_ref(artifact));
        assert_eq!(histograms[0].1, BTreeMap::from([("none".to_string(), 150)]));
    });
}

#[test]
fn criterion_05_heuristic_tier_gradient() {
    criterion(5, "heuristic exact and fg_iou fall easy->medium->hard; easy exact >= 0.10", || {
        let artifact = baseline_run("heuristic-cv");
        let tier = |name: &str| -> &MetricMeans { &artifact.summary.per_tier[name] };
        let (easy, medium, hard) = (tier("easy"), tier("medium"), tier("hard"));
        assert!(
            easy.exact_match >= medium.exact_match && medium.exact_match >= hard.exact_match,
            "exact gradient: {:.3} / {:.3} / {:.3}",
            easy.exact_match,
            medium.exact_match,
            hard.exact_match
        );
        assert!(
            easy.fg_iou >= medium.fg_iou && medium.fg_iou >= hard.fg_iou,
            "fg_iou gradient: {:.3} / {:.3} / {:.3}",
            easy.fg_iou,
            medium.fg_iou,
            hard.fg_iou
        );
        assert!(easy.exact_match >= 0.10, "easy exact-match {:.3}", easy.exact_match);
    });
}

#[test]
fn criterion_06_metric_oracle_equivalence() {
    criterion(6, "fg_iou and pixel_accuracy match a brute-force oracle on 100 random pairs", || {
        let mut rng = Prng::seed_from_u64(600);
        for pair in 0..100 {
            let p_a = f64::from(rng.uniform_int(1, 99) as u32) / 100.0;
            let p_b = f64::from(rng.uniform_int(1, 99) as u32) / 100.0;
            let mut a = RasterImage::filled(255);
            let mut b = RasterImage::filled(255);
            for y in 0..RasterImage::HEIGHT {
                for x in 0..RasterImage::WIDTH {
                    if rng.bernoulli(p_a) {
                        a.set(x, y, 0);
                    }
                    if rng.bernoulli(p_b) {
                        b.set(x, y, 0);
                    }
                }
            }
            // Independent double-loop oracle.
            let (mut matches, mut inter, mut union) = (0u64, 0u64, 0u64);
            for y in 0..RasterImage::HEIGHT {
                for x in 0..RasterImage::WIDTH {
                    let fa = a.get(x, y) < 128;
                    let fb = b.get(x, y) < 128;
                    matches += u64::from(a.get(x, y) == b.get(x, y));
                    inter += u64::from(fa && fb);
                    union += u64::from(fa || fb);
                }
            }
            let oracle_acc = matches as f64 / (RasterImage::PIXEL_COUNT as f64);
            let oracle_iou =
                if union == 0 { 1.0 } else { inter as f64 / union as f64 };
            assert_eq!(pixel_accuracy(&a, &b), oracle_acc, "pair {pair}");
            assert_eq!(fg_iou(&a, &b, 128), oracle_iou, "pair {pair}");
        }
    });
}

#[test]
fn criterion_07_parser_taxonomy_and_fuzz() {
    criterion(7, "all 11 error tags have fixtures; 100k byte-string fuzz never crashes", || {
        let fixtures: [(&str, ErrorTag); 11] = [
            ("", ErrorTag::EmptyProgram),
            ("filled_circle(cx=1, cy=2, radius=3,", ErrorTag::SyntaxError),
            ("import os", ErrorTag::DisallowedConstruct),
            ("blob(cx=1, cy=2, radius=3)", ErrorTag::UnknownFunction),
            ("filled_circle(1, 2, 3)", ErrorTag::PositionalArgs),
            ("filled_circle(cx=1.5, cy=2, radius=3)", ErrorTag::NonIntegerLiteral),
            ("filled_circle(cx=1, cy=2)", ErrorTag::MissingKeyword),
            ("filled_circle(cx=1, cy=2, radius=3, stroke=1)", ErrorTag::UnexpectedKeyword),
            ("filled_circle(cx=1, cx=2, cy=3, radius=4)", ErrorTag::DuplicateKeyword),
            ("filled_circle(cx=1, cy=2, radius=600)", ErrorTag::OutOfRange),
            ("circle(cx=1, cy=2, radius=3, stroke=9)", ErrorTag::InvalidStroke),
        ];
        let mut seen = Vec::new();
        for (program, expected) in fixtures {
            let err = parse(program).expect_err(program);
            assert_eq!(classify_error(&err), expected, "{program:?} -> {err}");
            seen.push(expected);
        }
        seen.sort_by_key(|t| t.as_str().to_string());
        seen.dedup();
        assert_eq!(seen.len(), ErrorTag::ALL.len(), "every tag covered exactly once");

        let mut rng = Prng::seed_from_u64(700);
        for _ in 0..100_000 {
            let len = rng.uniform_int(0, 48) as usize;
            let mut bytes = Vec::with_capacity(len);
            while bytes.len() < len {
                bytes.extend_from_slice(&rng.next_u64().to_le_bytes());
            }
            bytes.truncate(len);
            let outcome = std::panic::catch_unwind(|| parse_bytes(&bytes).is_ok());
            assert!(outcome.is_ok(), "parser panicked on {bytes:?}");
        }
    });
}

/// Uniformly random valid shape; extents mostly small so property sweeps stay
/// fast, with an occasional full-size outlier.
fn random_shape(rng: &mut Prng) -> Shape {
    let kind = ShapeKind::ALL[rng.uniform_int(0, 3) as usize];
    let extent = if rng.bernoulli(0.05) {
        rng.uniform_int(161, 512) as i32
    } else {
        rng.uniform_int(1, 160) as i32
    };
    let stroke = kind
        .is_hollow()
        .then(|| rng.uniform_int(1, i64::from(kind.max_stroke(extent))) as i32);
    Shape {
        kind,
        cx: rng.uniform_int(0, 511) as i32,
        cy: rng.uniform_int(0, 511) as i32,
        extent,
        stroke,
    }
}

fn random_scene(rng: &mut Prng) -> Scene {
    let n = rng.uniform_int(1, 8);
    Scene::new((0..n).map(|_| random_shape(rng)).collect())
}

#[test]
fn criterion_08_renderer_properties() {
    criterion(8, "order/monotonicity/clipping/stroke-degeneracy hold on 1000 random scenes", || {
        let config = RenderConfig::default();
        let mut rng = Prng::seed_from_u64(800);

        for round in 0..1000 {
            let scene = random_scene(&mut rng);
            let image = render(&scene, &config);

            // Order invariance: a reversed scene renders identically.
            let reversed = Scene::new(scene.shapes().iter().rev().cloned().collect());
            assert_eq!(render(&reversed, &config), image, "round {round}: order");

            // Monotonicity: dropping a suffix never adds foreground.
            let k = rng.uniform_int(0, scene.len() as i64 - 1) as usize;
            let prefix = Scene::new(scene.shapes()[..k].to_vec());
            let partial = render(&prefix, &config);
            let full_mask = foreground_mask(&image, 128);
            let part_mask = foreground_mask(&partial, 128);
            for (index, part_fg) in part_mask.iter().enumerate() {
                assert!(
                    !part_fg | full_mask[index],
                    "round {round}: monotonicity violated at pixel {index}"
                );
            }

            // Stroke degeneracy identities on this scene's shapes.
            for shape in scene.shapes() {
                if shape.kind == ShapeKind::Circle {
                    let full = Shape::circle(shape.cx, shape.cy, shape.extent, shape.extent);
                    let filled = Shape::filled_circle(shape.cx, shape.cy, shape.extent);
                    assert_eq!(
                        render(&Scene::new(vec![full]), &config),
                        render(&Scene::new(vec![filled]), &config),
                        "round {round}: circle stroke=radius"
                    );
                }
                if shape.kind == ShapeKind::Square {
                    let max_stroke = ShapeKind::Square.max_stroke(shape.extent);
                    let full = Shape::square(shape.cx, shape.cy, shape.extent, max_stroke);
                    let filled = Shape::filled_square(shape.cx, shape.cy, shape.extent);
                    assert_eq!(
                        render(&Scene::new(vec![full]), &config),
                        render(&Scene::new(vec![filled]), &config),
                        "round {round}: square 2*stroke>=size"
                    );
                }
            }
        }

        // Clipping (pixels beyond the canvas are simply discarded): exact
        // membership oracle over the full canvas for scenes of clipped
        // shapes.
        let mut clip_rng = Prng::seed_from_u64(801);
        for round in 0..50 {
            let mut shapes = Vec::new();
            for _ in 0..4 {
                let mut shape = random_shape(&mut clip_rng);
                // Push centers toward the border so footprints clip.
                shape.cx = if clip_rng.bernoulli(0.5) { clip_rng.uniform_int(0, 40) as i32 }
                    else { clip_rng.uniform_int(471, 511) as i32 };
                shapes.push(shape);
            }
            let scene = Scene::new(shapes);
            let image = render(&scene, &config);
            for y in 0..RasterImage::HEIGHT {
                for x in 0..RasterImage::WIDTH {
                    let expected = scene
                        .shapes()
                        .iter()
                        .any(|s| oracle_member(s, x as i64, y as i64));
                    let actual = image.get(x, y) == config.foreground;
                    assert_eq!(actual, expected, "round {round}: pixel ({x},{y})");
                }
            }
        }
    });
}

/// Membership rule restated independently of the renderer.
fn oracle_member(shape: &Shape, x: i64, y: i64) -> bool {
    let (cx, cy, e) = (i64::from(shape.cx), i64::from(shape.cy), i64::from(shape.extent));
    match shape.kind {
        ShapeKind::FilledCircle => {
            let d2 = (x - cx).pow(2) + (y - cy).pow(2);
            d2 <= e * e
        }
        ShapeKind::Circle => {
            let t = i64::from(shape.stroke.unwrap());
            let d2 = (x - cx).pow(2) + (y - cy).pow(2);
            let inner = e - t;
            d2 <= e * e && (inner == 0 || inner * inner < d2)
        }
        ShapeKind::FilledSquare => {
            let x0 = cx - e / 2;
            let y0 = cy - e / 2;
            x >= x0 && x < x0 + e && y >= y0 && y < y0 + e
        }
        ShapeKind::Square => {
            let t = i64::from(shape.stroke.unwrap());
            let x0 = cx - e / 2;
            let y0 = cy - e / 2;
            let outer = x >= x0 && x < x0 + e && y >= y0 && y < y0 + e;
            let inner = x >= x0 + t && x < x0 + e - t && y >= y0 + t && y < y0 + e - t;
            outer && !inner
        }
    }
}

#[test]
fn criterion_09_tier_constraint_audit() {
    criterion(9, "500 scenes per tier satisfy every tier-table constraint", || {
        for tier in TierConfig::eval_v1_tiers() {
            let mut clipped_shapes = 0usize;
            let mut total_shapes = 0usize;
            for seed in 0..500u64 {
                let scene = generate_scene(&tier, seed)
                    .unwrap_or_else(|e| panic!("{} seed {seed}: {e}", tier.name));
                assert!(
                    tier.shape_count.contains(scene.len() as i32),
                    "{} seed {seed}: count {}",
                    tier.name,
                    scene.len()
                );
                for shape in scene.shapes() {
                    total_shapes += 1;
                    assert!(
                        tier.extent.contains(shape.extent),
                        "{} seed {seed}: extent {}",
                        tier.name,
                        shape.extent
                    );
                    if let Some(stroke) = shape.stroke {
                        let max = shape.kind.max_stroke(shape.extent);
                        assert!(
                            stroke >= 1 && stroke <= max,
                            "{} seed {seed}: stroke {stroke} invalid for extent {}",
                            tier.name,
                            shape.extent
                        );
                        assert!(stroke <= tier.stroke.hi, "{} seed {seed}", tier.name);
                        assert!(
                            stroke >= tier.stroke.lo || stroke == max,
                            "{} seed {seed}: stroke {stroke} below range and unclamped",
                            tier.name
                        );
                    }
                    let inside = shape.bbox().inside_canvas();
                    clipped_shapes += usize::from(!inside);
                    if tier.clip_prob == 0.0 {
                        assert!(inside, "{} seed {seed}: unexpected clip", tier.name);
                    } else if tier.clip_prob == 1.0 {
                        assert!(!inside, "{} seed {seed}: expected clip", tier.name);
                    }
                }
                if let Some(cap) = tier.max_bbox_iou {
                    let shapes = scene.shapes();
                    for i in 0..shapes.len() {
                        for j in (i + 1)..shapes.len() {
                            let iou = bbox_iou(&shapes[i].bbox(), &shapes[j].bbox());
                            assert!(
                                iou <= cap,
                                "{} seed {seed}: bbox IoU {iou:.4} > {cap}",
                                tier.name
                            );
                        }
                    }
                }
                if tier.require_overlap {
                    let shapes = scene.shapes();
                    let overlaps = (0..shapes.len()).any(|i| {
                        ((i + 1)..shapes.len())
                            .any(|j| bbox_iou(&shapes[i].bbox(), &shapes[j].bbox()) > 0.0)
                    });
                    assert!(overlaps, "{} seed {seed}: no overlapping pair", tier.name);
                }
            }
            // Fractional clip probability: the observed rate must track it.
            if tier.clip_prob > 0.0 && tier.clip_prob < 1.0 {
                let rate = clipped_shapes as f64 / total_shapes as f64;
                assert!(
                    (rate - tier.clip_prob).abs() < 0.07,
                    "{}: clip rate {rate:.3} vs prob {}",
                    tier.name,
                    tier.clip_prob
                );
            }
        }
    });
}

#[test]
fn criterion_10_runner_crash_safety() {
    criterion(10, "interrupted run + resume equals uninterrupted run (mod latency/run_id)", || {
        let keep = tempfile::tempdir().unwrap();
        let dataset = keep.path().join("data");
        let tiers = [TierConfig::easy(), TierConfig::medium()];
        generate_split("crash", &tiers, 0..=2, &dataset).unwrap();
        let adapter = AdapterSpec::builtin("heuristic-cv").unwrap();

        let root_a = keep.path().join("runs_a");
        let uninterrupted =
            run_split(&dataset, &adapter, &root_a, &RunOptions::default()).unwrap();
        let run_id = uninterrupted.summary.run_id.clone();

        // Reconstruct the on-disk state a kill would leave: the run config,
        // a strict prefix of valid per-sample records, and one torn record
        // (per-sample writes are temp-file + rename, so a torn file can only
        // exist under a temp name; we keep one anyway as a hostile case).
        let root_b = keep.path().join("runs_b");
        let interrupted = root_b.join(&run_id);
        std::fs::create_dir_all(interrupted.join("samples")).unwrap();
        std::fs::copy(
            uninterrupted.run_dir.join("run_config.json"),
            interrupted.join("run_config.json"),
        )
        .unwrap();
        for record in &uninterrupted.records[..3] {
            let name = format!("{}.json", record.sample_id);
            std::fs::copy(
                uninterrupted.run_dir.join("samples").join(&name),
                interrupted.join("samples").join(&name),
            )
            .unwrap();
        }
        let torn = format!("{}.json", uninterrupted.records[3].sample_id);
        std::fs::write(interrupted.join("samples").join(torn), "{\"sample_id\": \"ea").unwrap();

        let resumed = run_split(
            &dataset,
            &adapter,
            &root_b,
            &RunOptions { resume_run_id: Some(run_id), ..RunOptions::default() },
        )
        .unwrap();

        assert_eq!(resumed.summary, uninterrupted.summary);
        assert_eq!(resumed.records.len(), uninterrupted.records.len());
        for (a, b) in uninterrupted.records.iter().zip(&resumed.records) {
            assert_eq!(a.sample_id, b.sample_id);
            assert_eq!(a.difficulty, b.difficulty);
            assert_eq!(a.request, b.request);
            assert_eq!(a.raw_response, b.raw_response);
            assert_eq!(a.normalized_prediction, b.normalized_prediction);
            assert_eq!(a.attempt_count, b.attempt_count);
            assert_eq!(a.note, b.note);
            assert_eq!(a.eval, b.eval);
        }
    });
}

#[test]
fn criterion_11_bootstrap_sanity() {
    criterion(11, "degenerate CIs are zero-width; overall = weighted tier mean exactly", || {
        for value in [0.0, 0.25, 1.0] {
            let values = vec![value; 150];
            let (mean, lo, hi) = bootstrap_ci(&values, 1000, 0).unwrap();
            assert_eq!((mean, lo, hi), (value, value, value));
        }
        let artifact = baseline_run("heuristic-cv");
        let combined = MetricMeans::weighted_combine(artifact.summary.per_tier.values());
        assert_eq!(combined, artifact.summary.overall, "weighted-mean identity");
        assert_eq!(combined.n, 150);
    });
}
