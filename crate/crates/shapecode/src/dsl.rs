//! Domain types for the four-primitive drawing DSL: shapes, scenes, bounding
//! boxes, validity rules, and the canonical text serialization.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Canvas edge length in pixels. Fixed for v1.
pub const CANVAS_SIZE: u32 = 512;
/// Largest valid center coordinate (`cx`/`cy` live in `[0, COORD_MAX]`).
pub const COORD_MAX: i32 = CANVAS_SIZE as i32 - 1;
/// Largest valid radius or size.
pub const EXTENT_MAX: i32 = CANVAS_SIZE as i32;

/// The four primitives. No other shape exists in the language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    FilledCircle,
    Circle,
    FilledSquare,
    Square,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 4] = [
        ShapeKind::FilledCircle,
        ShapeKind::Circle,
        ShapeKind::FilledSquare,
        ShapeKind::Square,
    ];

    /// The function name this primitive uses in program text.
    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::FilledCircle => "filled_circle",
            ShapeKind::Circle => "circle",
            ShapeKind::FilledSquare => "filled_square",
            ShapeKind::Square => "square",
        }
    }

    pub fn from_name(name: &str) -> Option<ShapeKind> {
        ShapeKind::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Hollow primitives take a `stroke` parameter; filled ones must not.
    pub fn is_hollow(self) -> bool {
        matches!(self, ShapeKind::Circle | ShapeKind::Square)
    }

    pub fn is_circle(self) -> bool {
        matches!(self, ShapeKind::FilledCircle | ShapeKind::Circle)
    }

    /// Keyword used for the extent parameter: `radius` or `size`.
    pub fn extent_keyword(self) -> &'static str {
        if self.is_circle() {
            "radius"
        } else {
            "size"
        }
    }

    /// Upper stroke bound for a hollow primitive of the given extent:
    /// `extent` for circles, `ceil(extent / 2)` for squares.
    pub fn max_stroke(self, extent: i32) -> i32 {
        if self.is_circle() {
            extent
        } else {
            (extent + 1) / 2
        }
    }
}

/// One primitive instance. Fields are plain integers so that out-of-range
/// candidates can be represented and then rejected by [`Shape::validate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub kind: ShapeKind,
    pub cx: i32,
    pub cy: i32,
    /// Radius for circles, side length for squares.
    pub extent: i32,
    /// Present iff the kind is hollow.
    pub stroke: Option<i32>,
}

impl Shape {
    pub fn filled_circle(cx: i32, cy: i32, radius: i32) -> Shape {
        Shape { kind: ShapeKind::FilledCircle, cx, cy, extent: radius, stroke: None }
    }

    pub fn circle(cx: i32, cy: i32, radius: i32, stroke: i32) -> Shape {
        Shape { kind: ShapeKind::Circle, cx, cy, extent: radius, stroke: Some(stroke) }
    }

    pub fn filled_square(cx: i32, cy: i32, size: i32) -> Shape {
        Shape { kind: ShapeKind::FilledSquare, cx, cy, extent: size, stroke: None }
    }

    pub fn square(cx: i32, cy: i32, size: i32, stroke: i32) -> Shape {
        Shape { kind: ShapeKind::Square, cx, cy, extent: size, stroke: Some(stroke) }
    }

    /// Checks every parameter range: `cx`/`cy` in `[0, 511]`, extent in
    /// `[1, 512]`, stroke in `[1, radius]` for circles and
    /// `[1, ceil(size/2)]` for squares, and stroke presence matching the
    /// kind.
    pub fn validate(&self) -> Result<(), ValidationError> {
        if !(0..=COORD_MAX).contains(&self.cx) {
            return Err(ValidationError::out_of_range("cx", self.cx, 0, COORD_MAX));
        }
        if !(0..=COORD_MAX).contains(&self.cy) {
            return Err(ValidationError::out_of_range("cy", self.cy, 0, COORD_MAX));
        }
        if !(1..=EXTENT_MAX).contains(&self.extent) {
            return Err(ValidationError::out_of_range(
                self.kind.extent_keyword(),
                self.extent,
                1,
                EXTENT_MAX,
            ));
        }
        match (self.kind.is_hollow(), self.stroke) {
            (true, Some(stroke)) => {
                let max = self.kind.max_stroke(self.extent);
                if !(1..=max).contains(&stroke) {
                    return Err(ValidationError::StrokeOutOfBounds {
                        kind: self.kind,
                        stroke,
                        max,
                        extent: self.extent,
                    });
                }
            }
            (true, None) => return Err(ValidationError::StrokeMissing { kind: self.kind }),
            (false, Some(_)) => return Err(ValidationError::StrokeForbidden { kind: self.kind }),
            (false, None) => {}
        }
        Ok(())
    }

    /// Axis-aligned bounding box, inclusive and untruncated (it may extend
    /// outside the canvas). Circles cover `[c - r, c + r]` on each axis;
    /// squares have their left/top edge at `c - floor(s / 2)` and are exactly
    /// `s` pixels wide, which matches the renderer footprint.
    pub fn bbox(&self) -> BBox {
        let (cx, cy, e) = (i64::from(self.cx), i64::from(self.cy), i64::from(self.extent));
        if self.kind.is_circle() {
            BBox { x0: cx - e, y0: cy - e, x1: cx + e, y1: cy + e }
        } else {
            let x0 = cx - e / 2;
            let y0 = cy - e / 2;
            BBox { x0, y0, x1: x0 + e - 1, y1: y0 + e - 1 }
        }
    }
}

/// Why a shape failed validation. Stroke-presence violations cannot arise
/// from parsed text (the keyword checks fire first) but can from direct
/// construction.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("{param}={value} is outside [{lo}, {hi}]")]
    OutOfRange { param: &'static str, value: i32, lo: i32, hi: i32 },
    #[error("stroke={stroke} is outside [1, {max}] for {} with extent {extent}", kind.name())]
    StrokeOutOfBounds { kind: ShapeKind, stroke: i32, max: i32, extent: i32 },
    #[error("{} requires a stroke", kind.name())]
    StrokeMissing { kind: ShapeKind },
    #[error("{} does not take a stroke", kind.name())]
    StrokeForbidden { kind: ShapeKind },
}

impl ValidationError {
    fn out_of_range(param: &'static str, value: i32, lo: i32, hi: i32) -> ValidationError {
        ValidationError::OutOfRange { param, value, lo, hi }
    }

    /// True for every stroke-rule violation (as opposed to a range violation).
    pub fn is_stroke_error(&self) -> bool {
        !matches!(self, ValidationError::OutOfRange { .. })
    }
}

/// An ordered list of shapes; the parsed/serialized form of a program.
/// Equality is structural and order-sensitive.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Scene(pub Vec<Shape>);

impl Scene {
    pub fn new(shapes: Vec<Shape>) -> Scene {
        Scene(shapes)
    }

    pub fn shapes(&self) -> &[Shape] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        self.0.iter().try_for_each(Shape::validate)
    }
}

impl From<Vec<Shape>> for Scene {
    fn from(shapes: Vec<Shape>) -> Scene {
        Scene(shapes)
    }
}

impl FromIterator<Shape> for Scene {
    fn from_iter<I: IntoIterator<Item = Shape>>(iter: I) -> Scene {
        Scene(iter.into_iter().collect())
    }
}

/// Inclusive integer bounding box; may extend outside the canvas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BBox {
    pub x0: i64,
    pub y0: i64,
    pub x1: i64,
    pub y1: i64,
}

impl BBox {
    /// Pixel area with inclusive bounds.
    pub fn area(&self) -> i64 {
        (self.x1 - self.x0 + 1) * (self.y1 - self.y0 + 1)
    }

    pub fn intersect(&self, other: &BBox) -> Option<BBox> {
        let x0 = self.x0.max(other.x0);
        let y0 = self.y0.max(other.y0);
        let x1 = self.x1.min(other.x1);
        let y1 = self.y1.min(other.y1);
        (x0 <= x1 && y0 <= y1).then_some(BBox { x0, y0, x1, y1 })
    }

    /// True when the whole box lies inside the canvas.
    pub fn inside_canvas(&self) -> bool {
        self.x0 >= 0 && self.y0 >= 0 && self.x1 <= i64::from(COORD_MAX) && self.y1 <= i64::from(COORD_MAX)
    }

    /// Intersection-over-union with pixel areas; 0 when disjoint.
    pub fn iou(&self, other: &BBox) -> f64 {
        match self.intersect(other) {
            None => 0.0,
            Some(inter) => {
                let inter_area = inter.area();
                let union = self.area() + other.area() - inter_area;
                inter_area as f64 / union as f64
            }
        }
    }
}

/// Bounding-box IoU used as a generation constraint (not a score).
pub fn bbox_iou(a: &BBox, b: &BBox) -> f64 {
    a.iou(b)
}

fn shape_line(shape: &Shape, out: &mut String) {
    use std::fmt::Write;
    write!(
        out,
        "{}(cx={}, cy={}, {}={}",
        shape.kind.name(),
        shape.cx,
        shape.cy,
        shape.kind.extent_keyword(),
        shape.extent
    )
    .unwrap();
    if let Some(stroke) = shape.stroke {
        write!(out, ", stroke={stroke}").unwrap();
    }
    out.push(')');
}

/// Canonical program text: one call per line in `cx, cy, radius|size[, stroke]`
/// keyword order, a single space after each comma, no spaces around `=`, LF
/// line endings, and a single trailing newline. An empty scene serializes to
/// the empty string.
pub fn serialize(scene: &Scene) -> String {
    let mut out = String::new();
    for shape in scene.shapes() {
        shape_line(shape, &mut out);
        out.push('\n');
    }
    out
}
