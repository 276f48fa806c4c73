//! Deterministic rasterizer: scenes become 512×512 8-bit grayscale images,
//! black shapes on a white background, under exact pixel-membership rules.
//!
//! Membership (pixel centers at integer coordinates, shapes clipped to the
//! canvas):
//!
//! * `filled_circle`: `(x−cx)² + (y−cy)² ≤ r²`
//! * `circle` with stroke `t`: `(r−t)² < (x−cx)² + (y−cy)² ≤ r²`; at `t = r`
//!   the inner exclusion vanishes entirely (including the center pixel), so
//!   the ring degenerates to exactly the filled disk
//! * `filled_square`: `x ∈ [cx−⌊s/2⌋, cx−⌊s/2⌋+s−1]`, same for `y`
//! * `square` with stroke `t`: the `filled_square` footprint minus the inner
//!   box inset by `t` on all four sides (empty inner box when `2t ≥ s`)

use crate::dsl::{Scene, Shape, COORD_MAX};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use thiserror::Error;

/// Pixels strictly below this byte value count as foreground by default.
pub const DEFAULT_FG_THRESHOLD: u8 = 128;

/// Fixed raster parameters, recorded in sample metadata for forward
/// compatibility; v1 always uses the default values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderConfig {
    pub canvas_size: u32,
    pub background: u8,
    pub foreground: u8,
}

impl Default for RenderConfig {
    fn default() -> RenderConfig {
        RenderConfig { canvas_size: 512, background: 255, foreground: 0 }
    }
}

/// A 512×512 row-major grayscale pixel buffer. Renderer output contains only
/// the values 0 (foreground) and 255 (background); images loaded from disk
/// may contain intermediate grays.
#[derive(Clone, PartialEq, Eq)]
pub struct RasterImage {
    pixels: Vec<u8>,
}

impl RasterImage {
    pub const WIDTH: usize = 512;
    pub const HEIGHT: usize = 512;
    pub const PIXEL_COUNT: usize = RasterImage::WIDTH * RasterImage::HEIGHT;

    /// A canvas with every pixel set to `value`.
    pub fn filled(value: u8) -> RasterImage {
        RasterImage { pixels: vec![value; RasterImage::PIXEL_COUNT] }
    }

    /// Wraps an existing row-major buffer; the length must be exactly 262144.
    pub fn from_pixels(pixels: Vec<u8>) -> Result<RasterImage, ImageError> {
        if pixels.len() != RasterImage::PIXEL_COUNT {
            return Err(ImageError::BufferLength { len: pixels.len() });
        }
        Ok(RasterImage { pixels })
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * RasterImage::WIDTH + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.pixels[y * RasterImage::WIDTH + x] = value;
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }
}

impl fmt::Debug for RasterImage {
    // The buffer is 262144 bytes; a failed assertion must not dump it.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dark = self.pixels.iter().filter(|&&p| p < DEFAULT_FG_THRESHOLD).count();
        write!(f, "RasterImage(512x512, {dark} dark pixels, sha256={})", pixel_hash(self))
    }
}

/// Failures while loading, storing, or constructing images.
#[derive(Debug, Error)]
pub enum ImageError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("PNG encoding failed: {0}")]
    Encode(#[from] png::EncodingError),
    #[error("PNG decoding failed: {0}")]
    Decode(#[from] png::DecodingError),
    #[error("image is {width}x{height}, expected 512x512")]
    Dimensions { width: u32, height: u32 },
    #[error("image is not single-channel: color channels differ at pixel {index}")]
    NotGrayscale { index: usize },
    #[error("pixel buffer has {len} bytes, expected 262144")]
    BufferLength { len: usize },
}

fn shape_contains(shape: &Shape, x: i64, y: i64) -> bool {
    let cx = i64::from(shape.cx);
    let cy = i64::from(shape.cy);
    let extent = i64::from(shape.extent);
    match shape.kind {
        crate::dsl::ShapeKind::FilledCircle | crate::dsl::ShapeKind::Circle => {
            let d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
            if d2 > extent * extent {
                return false;
            }
            match shape.stroke {
                None => true,
                Some(t) => {
                    let inner = extent - i64::from(t);
                    inner == 0 || inner * inner < d2
                }
            }
        }
        crate::dsl::ShapeKind::FilledSquare | crate::dsl::ShapeKind::Square => {
            let x0 = cx - extent / 2;
            let y0 = cy - extent / 2;
            let x1 = x0 + extent - 1;
            let y1 = y0 + extent - 1;
            if x < x0 || x > x1 || y < y0 || y > y1 {
                return false;
            }
            match shape.stroke {
                None => true,
                Some(t) => {
                    let t = i64::from(t);
                    // Inside the inner box means outside the frame.
                    !(x >= x0 + t && x <= x1 - t && y >= y0 + t && y <= y1 - t)
                }
            }
        }
    }
}

fn draw_shape(img: &mut RasterImage, shape: &Shape, foreground: u8) {
    let bbox = shape.bbox();
    let x_lo = bbox.x0.max(0);
    let y_lo = bbox.y0.max(0);
    let x_hi = bbox.x1.min(i64::from(COORD_MAX));
    let y_hi = bbox.y1.min(i64::from(COORD_MAX));
    for y in y_lo..=y_hi {
        for x in x_lo..=x_hi {
            if shape_contains(shape, x, y) {
                img.set(x as usize, y as usize, foreground);
            }
        }
    }
}

/// Rasterizes the scene in program order onto a background-filled canvas.
/// Later shapes can add foreground pixels but cannot erase them, so the
/// foreground set is the union of per-shape member sets and the raster is
/// invariant under scene reordering.
pub fn render(scene: &Scene, config: &RenderConfig) -> RasterImage {
    let mut img = RasterImage::filled(config.background);
    for shape in scene.shapes() {
        draw_shape(&mut img, shape, config.foreground);
    }
    img
}

/// Boolean row-major mask of pixels with value strictly below `threshold`.
pub fn foreground_mask(img: &RasterImage, threshold: u8) -> Vec<bool> {
    img.pixels().iter().map(|&p| p < threshold).collect()
}

/// Hex-lowercase SHA-256 of the raw 262144-byte pixel buffer (not of PNG
/// bytes), so the digest is independent of any encoder.
pub fn pixel_hash(img: &RasterImage) -> String {
    hex::encode(Sha256::digest(img.pixels()))
}

/// Writes an 8-bit grayscale non-interlaced PNG with fixed encoder settings,
/// so equal pixel buffers produce byte-identical files.
pub fn write_png(img: &RasterImage, path: &Path) -> Result<(), ImageError> {
    let file = File::create(path)?;
    let mut encoder = png::Encoder::new(
        BufWriter::new(file),
        RasterImage::WIDTH as u32,
        RasterImage::HEIGHT as u32,
    );
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Eight);
    encoder.set_compression(png::Compression::Default);
    encoder.set_filter(png::FilterType::NoFilter);
    encoder.set_adaptive_filter(png::AdaptiveFilterType::NonAdaptive);
    let mut writer = encoder.write_header()?;
    writer.write_image_data(img.pixels())?;
    writer.finish()?;
    Ok(())
}

/// Reads a PNG and converts it to a single grayscale channel. Grayscale and
/// grayscale-alpha images convert directly; RGB(A) images are accepted only
/// when every pixel has equal channels. Any image that is not 512×512 is
/// rejected.
pub fn read_png(path: &Path) -> Result<RasterImage, ImageError> {
    let file = File::open(path)?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::normalize_to_color8());
    let mut reader = decoder.read_info()?;
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf)?;
    if info.width != RasterImage::WIDTH as u32 || info.height != RasterImage::HEIGHT as u32 {
        return Err(ImageError::Dimensions { width: info.width, height: info.height });
    }
    let data = &buf[..info.buffer_size()];
    let pixels = match info.color_type {
        png::ColorType::Grayscale => data.to_vec(),
        png::ColorType::GrayscaleAlpha => data.chunks_exact(2).map(|px| px[0]).collect(),
        png::ColorType::Rgb => single_channel(data, 3)?,
        png::ColorType::Rgba => single_channel(data, 4)?,
        // normalize_to_color8 expands indexed images to RGB8.
        png::ColorType::Indexed => single_channel(data, 3)?,
    };
    RasterImage::from_pixels(pixels)
}

fn single_channel(data: &[u8], stride: usize) -> Result<Vec<u8>, ImageError> {
    data.chunks_exact(stride)
        .enumerate()
        .map(|(index, px)| {
            if px[0] == px[1] && px[1] == px[2] {
                Ok(px[0])
            } else {
                Err(ImageError::NotGrayscale { index })
            }
        })
        .collect()
}
