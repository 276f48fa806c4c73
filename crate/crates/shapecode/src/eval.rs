//! Scoring of predicted programs against target rasters: parse → render →
//! compare, yielding five metrics and an optional failure tag.
//!
//! The evaluator never throws on model misbehavior; every failure mode is
//! encoded in the returned [`EvalResult`].

use crate::parser::{self, ErrorTag};
use crate::render::{foreground_mask, render, RasterImage, RenderConfig, DEFAULT_FG_THRESHOLD};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Why a prediction scored zero: one of the eleven parse tags, or
/// `execution_error` when the renderer itself faults on a valid scene.
/// The latter is unreachable with the built-in renderer but kept so the
/// parse/exec distinction stays in the vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureTag {
    EmptyProgram,
    SyntaxError,
    DisallowedConstruct,
    UnknownFunction,
    PositionalArgs,
    NonIntegerLiteral,
    DuplicateKeyword,
    UnexpectedKeyword,
    MissingKeyword,
    OutOfRange,
    InvalidStroke,
    ExecutionError,
}

impl FailureTag {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureTag::ExecutionError => "execution_error",
            FailureTag::EmptyProgram => ErrorTag::EmptyProgram.as_str(),
            FailureTag::SyntaxError => ErrorTag::SyntaxError.as_str(),
            FailureTag::DisallowedConstruct => ErrorTag::DisallowedConstruct.as_str(),
            FailureTag::UnknownFunction => ErrorTag::UnknownFunction.as_str(),
            FailureTag::PositionalArgs => ErrorTag::PositionalArgs.as_str(),
            FailureTag::NonIntegerLiteral => ErrorTag::NonIntegerLiteral.as_str(),
            FailureTag::DuplicateKeyword => ErrorTag::DuplicateKeyword.as_str(),
            FailureTag::UnexpectedKeyword => ErrorTag::UnexpectedKeyword.as_str(),
            FailureTag::MissingKeyword => ErrorTag::MissingKeyword.as_str(),
            FailureTag::OutOfRange => ErrorTag::OutOfRange.as_str(),
            FailureTag::InvalidStroke => ErrorTag::InvalidStroke.as_str(),
        }
    }
}

impl From<ErrorTag> for FailureTag {
    fn from(tag: ErrorTag) -> FailureTag {
        match tag {
            ErrorTag::EmptyProgram => FailureTag::EmptyProgram,
            ErrorTag::SyntaxError => FailureTag::SyntaxError,
            ErrorTag::DisallowedConstruct => FailureTag::DisallowedConstruct,
            ErrorTag::UnknownFunction => FailureTag::UnknownFunction,
            ErrorTag::PositionalArgs => FailureTag::PositionalArgs,
            ErrorTag::NonIntegerLiteral => FailureTag::NonIntegerLiteral,
            ErrorTag::DuplicateKeyword => FailureTag::DuplicateKeyword,
            ErrorTag::UnexpectedKeyword => FailureTag::UnexpectedKeyword,
            ErrorTag::MissingKeyword => FailureTag::MissingKeyword,
            ErrorTag::OutOfRange => FailureTag::OutOfRange,
            ErrorTag::InvalidStroke => FailureTag::InvalidStroke,
        }
    }
}

impl fmt::Display for FailureTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The five metrics plus the failure taxonomy for one (prediction, target)
/// pair.
///
/// Invariants: `parse_success == 0` implies `exec_success == 0`, all
/// similarity metrics zero, and a present `error_tag`; `exact_match == 1`
/// iff `pixel_accuracy == 1`, and implies `fg_iou == 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub exact_match: u8,
    pub pixel_accuracy: f64,
    pub fg_iou: f64,
    pub parse_success: u8,
    pub exec_success: u8,
    #[serde(default)]
    pub error_tag: Option<FailureTag>,
    #[serde(default)]
    pub error_message: Option<String>,
}

impl EvalResult {
    /// All-zero metrics with the given failure recorded. `parse_success` is
    /// set for execution failures (the program did parse).
    fn failure(tag: FailureTag, message: String) -> EvalResult {
        EvalResult {
            exact_match: 0,
            pixel_accuracy: 0.0,
            fg_iou: 0.0,
            parse_success: u8::from(tag == FailureTag::ExecutionError),
            exec_success: 0,
            error_tag: Some(tag),
            error_message: Some(message),
        }
    }
}

/// 1 iff the two pixel buffers are byte-identical.
pub fn exact_match(target: &RasterImage, pred: &RasterImage) -> u8 {
    u8::from(target.pixels() == pred.pixels())
}

/// Fraction of the 262144 pixel positions whose bytes are equal.
pub fn pixel_accuracy(target: &RasterImage, pred: &RasterImage) -> f64 {
    let equal = target
        .pixels()
        .iter()
        .zip(pred.pixels())
        .filter(|(t, p)| t == p)
        .count();
    equal as f64 / RasterImage::PIXEL_COUNT as f64
}

/// Intersection-over-union of the two foreground masks (pixels `< threshold`);
/// 1 when both masks are empty.
pub fn fg_iou(target: &RasterImage, pred: &RasterImage, threshold: u8) -> f64 {
    let mut intersection = 0u64;
    let mut union = 0u64;
    for (t, p) in target.pixels().iter().zip(pred.pixels()) {
        let t_fg = *t < threshold;
        let p_fg = *p < threshold;
        intersection += u64::from(t_fg && p_fg);
        union += u64::from(t_fg || p_fg);
    }
    if union == 0 {
        1.0
    } else {
        intersection as f64 / union as f64
    }
}

/// Foreground (0) exactly where one of the two masks is foreground and the
/// other is not; background (255) elsewhere. Used for qualitative panels.
pub fn xor_diff(target: &RasterImage, pred: &RasterImage) -> RasterImage {
    let target_mask = foreground_mask(target, DEFAULT_FG_THRESHOLD);
    let pred_mask = foreground_mask(pred, DEFAULT_FG_THRESHOLD);
    let mut diff = RasterImage::filled(255);
    for (index, (t, p)) in target_mask.iter().zip(&pred_mask).enumerate() {
        if t != p {
            diff.set(index % RasterImage::WIDTH, index / RasterImage::WIDTH, 0);
        }
    }
    diff
}

/// Scores a predicted program text against a target raster.
///
/// Parse failures yield zero metrics and the parse tag. Valid scenes are
/// rendered through the same deterministic pipeline that produced the
/// targets; a renderer fault (unreachable in practice) is caught and
/// reported as `execution_error` rather than propagated.
pub fn evaluate(prediction: &str, target: &RasterImage) -> EvalResult {
    let scene = match parser::parse(prediction) {
        Ok(scene) => scene,
        Err(e) => return EvalResult::failure(FailureTag::from(e.tag), e.to_string()),
    };
    let rendered = catch_unwind(AssertUnwindSafe(|| render(&scene, &RenderConfig::default())));
    let pred_img = match rendered {
        Ok(img) => img,
        Err(_) => {
            return EvalResult::failure(
                FailureTag::ExecutionError,
                "renderer fault while drawing a validated scene".to_string(),
            )
        }
    };
    EvalResult {
        exact_match: exact_match(target, &pred_img),
        pixel_accuracy: pixel_accuracy(target, &pred_img),
        fg_iou: fg_iou(target, &pred_img, DEFAULT_FG_THRESHOLD),
        parse_success: 1,
        exec_success: 1,
        error_tag: None,
        error_message: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{serialize, Scene, Shape};
    use crate::rng::Prng;

    fn image_of(scene: &Scene) -> RasterImage {
        render(scene, &RenderConfig::default())
    }

    #[test]
    fn ground_truth_round_trip_scores_perfectly() {
        let scene = Scene::new(vec![
            Shape::filled_circle(100, 100, 50),
            Shape::square(300, 300, 80, 5),
        ]);
        let target = image_of(&scene);
        let result = evaluate(&serialize(&scene), &target);
        assert_eq!(result.exact_match, 1);
        assert_eq!(result.pixel_accuracy, 1.0);
        assert_eq!(result.fg_iou, 1.0);
        assert_eq!(result.parse_success, 1);
        assert_eq!(result.exec_success, 1);
        assert_eq!(result.error_tag, None);
    }

    #[test]
    fn empty_prediction_scores_zero_with_tag() {
        let target = image_of(&Scene::new(vec![Shape::filled_circle(100, 100, 50)]));
        let result = evaluate("", &target);
        assert_eq!(result.exact_match, 0);
        assert_eq!(result.pixel_accuracy, 0.0);
        assert_eq!(result.fg_iou, 0.0);
        assert_eq!(result.parse_success, 0);
        assert_eq!(result.exec_success, 0);
        assert_eq!(result.error_tag, Some(FailureTag::EmptyProgram));
        assert!(result.error_message.is_some());
    }

    #[test]
    fn unknown_function_prediction_scores_zero() {
        let target = image_of(&Scene::default());
        let result = evaluate("blob(cx=1)", &target);
        assert_eq!(result.error_tag, Some(FailureTag::UnknownFunction));
        assert_eq!(result.parse_success, 0);
    }

    #[test]
    fn exact_match_on_buffers() {
        let white = RasterImage::filled(255);
        let black = RasterImage::filled(0);
        assert_eq!(exact_match(&white, &white.clone()), 1);
        assert_eq!(exact_match(&white, &black), 0);
        let mut off_by_one = white.clone();
        off_by_one.set(7, 9, 254);
        assert_eq!(exact_match(&white, &off_by_one), 0);
    }

    #[test]
    fn pixel_accuracy_counts_equal_bytes() {
        let white = RasterImage::filled(255);
        assert_eq!(pixel_accuracy(&white, &white.clone()), 1.0);
        assert_eq!(pixel_accuracy(&white, &RasterImage::filled(0)), 0.0);
        let mut off_by_one = white.clone();
        off_by_one.set(0, 0, 0);
        assert_eq!(pixel_accuracy(&white, &off_by_one), 262143.0 / 262144.0);
    }

    #[test]
    fn fg_iou_conventions() {
        let white = RasterImage::filled(255);
        assert_eq!(fg_iou(&white, &white.clone(), 128), 1.0);

        // 100-pixel mask vs the same mask plus 100 disjoint pixels.
        let mut small = white.clone();
        let mut big = white.clone();
        for i in 0..100 {
            small.set(i, 0, 0);
            big.set(i, 0, 0);
            big.set(i, 10, 0);
        }
        assert_eq!(fg_iou(&small, &big, 128), 0.5);
        assert_eq!(fg_iou(&small, &small.clone(), 128), 1.0);

        // Disjoint nonempty masks.
        let mut left = white.clone();
        let mut right = white.clone();
        left.set(0, 0, 0);
        right.set(511, 511, 0);
        assert_eq!(fg_iou(&left, &right, 128), 0.0);
    }

    #[test]
    fn xor_diff_marks_exactly_the_disagreement() {
        let white = RasterImage::filled(255);
        let identical = xor_diff(&white, &white.clone());
        assert!(identical.pixels().iter().all(|&p| p == 255));

        let opposite = xor_diff(&RasterImage::filled(0), &white);
        assert!(opposite.pixels().iter().all(|&p| p == 0));

        let mut extra = white.clone();
        extra.set(42, 17, 0);
        let diff = xor_diff(&white, &extra);
        assert_eq!(diff.pixels().iter().filter(|&&p| p == 0).count(), 1);
        assert_eq!(diff.get(42, 17), 0);
    }

    /// Naive double-loop re-computation of the two aggregate metrics.
    fn oracle_metrics(target: &RasterImage, pred: &RasterImage, threshold: u8) -> (f64, f64) {
        let mut equal = 0u64;
        let mut inter = 0u64;
        let mut union = 0u64;
        for y in 0..RasterImage::HEIGHT {
            for x in 0..RasterImage::WIDTH {
                let t = target.get(x, y);
                let p = pred.get(x, y);
                if t == p {
                    equal += 1;
                }
                let t_fg = t < threshold;
                let p_fg = p < threshold;
                if t_fg && p_fg {
                    inter += 1;
                }
                if t_fg || p_fg {
                    union += 1;
                }
            }
        }
        let accuracy = equal as f64 / RasterImage::PIXEL_COUNT as f64;
        let iou = if union == 0 { 1.0 } else { inter as f64 / union as f64 };
        (accuracy, iou)
    }

    fn random_binary_image(rng: &mut Prng) -> RasterImage {
        let pixels = (0..RasterImage::PIXEL_COUNT)
            .map(|_| if rng.bernoulli(0.5) { 0u8 } else { 255 })
            .collect();
        RasterImage::from_pixels(pixels).unwrap()
    }

    #[test]
    fn metrics_match_double_loop_oracle_on_random_buffers() {
        let mut rng = Prng::seed_from_u64(99);
        for _ in 0..5 {
            let a = random_binary_image(&mut rng);
            let b = random_binary_image(&mut rng);
            let (oracle_accuracy, oracle_iou) = oracle_metrics(&a, &b, 128);
            assert_eq!(pixel_accuracy(&a, &b), oracle_accuracy);
            assert_eq!(fg_iou(&a, &b, 128), oracle_iou);
        }
    }

    #[test]
    fn metrics_are_symmetric() {
        let mut rng = Prng::seed_from_u64(7);
        let a = random_binary_image(&mut rng);
        let b = random_binary_image(&mut rng);
        assert_eq!(pixel_accuracy(&a, &b), pixel_accuracy(&b, &a));
        assert_eq!(fg_iou(&a, &b, 128), fg_iou(&b, &a, 128));
        assert_eq!(exact_match(&a, &b), exact_match(&b, &a));
    }

    #[test]
    fn result_serialization_uses_fixed_field_names() {
        let target = image_of(&Scene::default());
        let json = serde_json::to_value(evaluate("", &target)).unwrap();
        for field in [
            "exact_match",
            "pixel_accuracy",
            "fg_iou",
            "parse_success",
            "exec_success",
            "error_tag",
            "error_message",
        ] {
            assert!(json.get(field).is_some(), "missing field {field}");
        }
        assert_eq!(json["error_tag"], "empty_program");

        let round_trip: EvalResult = serde_json::from_value(json).unwrap();
        assert_eq!(round_trip.error_tag, Some(FailureTag::EmptyProgram));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn result_invariants_hold_for_arbitrary_predictions(text in "\\PC*") {
                let target = RasterImage::filled(255);
                let r = evaluate(&text, &target);
                if r.parse_success == 0 {
                    prop_assert_eq!(r.exec_success, 0);
                    prop_assert_eq!(r.exact_match, 0);
                    prop_assert_eq!(r.pixel_accuracy, 0.0);
                    prop_assert_eq!(r.fg_iou, 0.0);
                    prop_assert!(r.error_tag.is_some());
                }
                prop_assert_eq!(r.exact_match == 1, r.pixel_accuracy == 1.0);
                if r.exact_match == 1 {
                    prop_assert_eq!(r.fg_iou, 1.0);
                }
            }
        }
    }
}
