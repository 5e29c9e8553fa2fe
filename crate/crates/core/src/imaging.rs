//! Raster images, polygonal text regions, axis-aligned boxes and masks.
//!
//! Every stage of the pipeline reads and writes [`RasterImage`] values and
//! talks about text through [`Polygon`] and [`BBox`]. The operations here are
//! pixel exact: compositing never touches a byte outside its regions.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageFormat, RgbImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Rgb = [u8; 3];

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("image dimensions must be positive, got {width}x{height}")]
    EmptyImage { width: u32, height: u32 },
    #[error("pixel buffer has {actual} bytes, expected {expected}")]
    BufferLength { expected: usize, actual: usize },
    #[error("dimension mismatch: {left_w}x{left_h} vs {right_w}x{right_h}")]
    DimensionMismatch {
        left_w: u32,
        left_h: u32,
        right_w: u32,
        right_h: u32,
    },
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("box {0:?} lies outside a {1}x{2} image")]
    OutOfBounds(BBox, u32, u32),
    #[error("png codec: {0}")]
    Png(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Row-major RGB8 image.
#[derive(Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl std::fmt::Debug for RasterImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RasterImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl RasterImage {
    pub fn filled(width: u32, height: u32, color: Rgb) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::EmptyImage { width, height });
        }
        let pixels = color
            .iter()
            .copied()
            .cycle()
            .take(width as usize * height as usize * 3)
            .collect();
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn from_raw(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::EmptyImage { width, height });
        }
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(ImagingError::BufferLength {
                expected,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.pixels
    }

    pub fn full_box(&self) -> BBox {
        BBox::new(0, 0, self.width, self.height)
    }

    fn offset(&self, x: u32, y: u32) -> usize {
        debug_assert!(x < self.width && y < self.height);
        (y as usize * self.width as usize + x as usize) * 3
    }

    pub fn get(&self, x: u32, y: u32) -> Rgb {
        let o = self.offset(x, y);
        [self.pixels[o], self.pixels[o + 1], self.pixels[o + 2]]
    }

    pub fn set(&mut self, x: u32, y: u32, color: Rgb) {
        let o = self.offset(x, y);
        self.pixels[o..o + 3].copy_from_slice(&color);
    }

    pub fn fill_box(&mut self, b: BBox, color: Rgb) {
        let b = b.clamp_to(self.width, self.height);
        for y in b.top..b.bottom() {
            for x in b.left..b.right() {
                self.set(x, y, color);
            }
        }
    }

    pub fn same_dims(&self, other: &RasterImage) -> Result<(), ImagingError> {
        if self.width != other.width || self.height != other.height {
            return Err(ImagingError::DimensionMismatch {
                left_w: self.width,
                left_h: self.height,
                right_w: other.width,
                right_h: other.height,
            });
        }
        Ok(())
    }

    /// Most frequent color in the image. Ties resolve to the smallest RGB value.
    pub fn dominant_color(&self) -> Rgb {
        most_frequent(self.pixels.chunks_exact(3).map(|p| [p[0], p[1], p[2]]))
            .expect("images are never empty")
    }

    /// Decode a PNG. Alpha is flattened against white.
    pub fn from_png_bytes(bytes: &[u8]) -> Result<Self, ImagingError> {
        let decoded = image::load_from_memory_with_format(bytes, ImageFormat::Png)
            .map_err(|e| ImagingError::Png(e.to_string()))?;
        let rgba = decoded.to_rgba8();
        let (width, height) = rgba.dimensions();
        let mut pixels = Vec::with_capacity(width as usize * height as usize * 3);
        for p in rgba.pixels() {
            let a = p.0[3] as u32;
            for c in 0..3 {
                // src * a + 255 * (255 - a), rounded
                let v = (p.0[c] as u32 * a + 255 * (255 - a) + 127) / 255;
                pixels.push(v as u8);
            }
        }
        Self::from_raw(width, height, pixels)
    }

    pub fn to_png_bytes(&self) -> Result<Vec<u8>, ImagingError> {
        let buf = RgbImage::from_raw(self.width, self.height, self.pixels.clone())
            .expect("buffer length is an invariant");
        let mut out = Cursor::new(Vec::new());
        DynamicImage::ImageRgb8(buf)
            .write_to(&mut out, ImageFormat::Png)
            .map_err(|e| ImagingError::Png(e.to_string()))?;
        Ok(out.into_inner())
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self, ImagingError> {
        Self::from_png_bytes(&std::fs::read(path)?)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), ImagingError> {
        std::fs::write(path, self.to_png_bytes()?)?;
        Ok(())
    }
}

pub(crate) fn most_frequent(colors: impl Iterator<Item = Rgb>) -> Option<Rgb> {
    let mut counts = std::collections::BTreeMap::<Rgb, usize>::new();
    for c in colors {
        *counts.entry(c).or_default() += 1;
    }
    // max_by_key keeps the last maximum; iterate in reverse so the smallest key wins.
    counts
        .into_iter()
        .rev()
        .max_by_key(|&(_, n)| n)
        .map(|(c, _)| c)
}

/// Axis-aligned integer box. `left`/`top` are inclusive, `right()`/`bottom()` exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BBox {
    pub left: u32,
    pub top: u32,
    pub width: u32,
    pub height: u32,
}

impl BBox {
    pub const fn new(left: u32, top: u32, width: u32, height: u32) -> Self {
        Self {
            left,
            top,
            width,
            height,
        }
    }

    pub fn right(&self) -> u32 {
        self.left + self.width
    }

    pub fn bottom(&self) -> u32 {
        self.top + self.height
    }

    pub fn area(&self) -> u64 {
        self.width as u64 * self.height as u64
    }

    pub fn is_empty(&self) -> bool {
        self.width == 0 || self.height == 0
    }

    pub fn contains_point(&self, x: u32, y: u32) -> bool {
        x >= self.left && x < self.right() && y >= self.top && y < self.bottom()
    }

    /// Real-valued containment, edges inclusive.
    pub fn contains_vertex(&self, x: f64, y: f64) -> bool {
        x >= self.left as f64
            && x <= self.right() as f64
            && y >= self.top as f64
            && y <= self.bottom() as f64
    }

    pub fn contains(&self, other: &BBox) -> bool {
        other.left >= self.left
            && other.top >= self.top
            && other.right() <= self.right()
            && other.bottom() <= self.bottom()
    }

    pub fn fits_within(&self, width: u32, height: u32) -> bool {
        self.right() <= width && self.bottom() <= height
    }

    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let left = self.left.max(other.left);
        let top = self.top.max(other.top);
        let right = self.right().min(other.right());
        let bottom = self.bottom().min(other.bottom());
        (left < right && top < bottom).then(|| BBox::new(left, top, right - left, bottom - top))
    }

    pub fn intersects(&self, other: &BBox) -> bool {
        self.intersection(other).is_some()
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection(other).map_or(0, |b| b.area());
        let union = self.area() + other.area() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    pub fn clamp_to(&self, width: u32, height: u32) -> BBox {
        let left = self.left.min(width);
        let top = self.top.min(height);
        let right = self.right().min(width);
        let bottom = self.bottom().min(height);
        BBox::new(left, top, right - left, bottom - top)
    }
}

/// Polygonal word region in pixel coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct Polygon {
    vertices: Vec<(f64, f64)>,
}

impl Polygon {
    pub fn new(vertices: Vec<(f64, f64)>) -> Result<Self, ImagingError> {
        if vertices.len() < 3 {
            return Err(ImagingError::TooFewVertices(vertices.len()));
        }
        Ok(Self { vertices })
    }

    pub fn from_bbox(b: BBox) -> Self {
        let (l, t, r, btm) = (
            b.left as f64,
            b.top as f64,
            b.right() as f64,
            b.bottom() as f64,
        );
        Self {
            vertices: vec![(l, t), (r, t), (r, btm), (l, btm)],
        }
    }

    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    /// Clamp every vertex into `[0, width] x [0, height]`. Non-finite coordinates
    /// collapse to 0.
    pub fn clamped(&self, width: u32, height: u32) -> Polygon {
        let clamp = |v: f64, hi: u32| {
            if v.is_finite() {
                v.clamp(0.0, hi as f64)
            } else {
                0.0
            }
        };
        Polygon {
            vertices: self
                .vertices
                .iter()
                .map(|&(x, y)| (clamp(x, width), clamp(y, height)))
                .collect(),
        }
    }
}

impl TryFrom<Vec<[f64; 2]>> for Polygon {
    type Error = ImagingError;

    fn try_from(v: Vec<[f64; 2]>) -> Result<Self, Self::Error> {
        Polygon::new(v.into_iter().map(|[x, y]| (x, y)).collect())
    }
}

impl From<Polygon> for Vec<[f64; 2]> {
    fn from(p: Polygon) -> Self {
        p.vertices.into_iter().map(|(x, y)| [x, y]).collect()
    }
}

/// Result of [`polygon_to_bbox`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolygonBox {
    pub bbox: BBox,
    /// The polygon collapsed to zero area after rounding; `bbox` is then a 1x1
    /// box at the rounded centroid.
    pub degenerate: bool,
}

/// Minimal axis-aligned integer box around a polygon: floor of the minimum
/// coordinates, ceiling of the maximum ones, so text is never clipped.
pub fn polygon_to_bbox(poly: &Polygon) -> PolygonBox {
    let vs = poly.vertices();
    let fold = |f: fn(f64, f64) -> f64, init: f64, pick: fn(&(f64, f64)) -> f64| {
        vs.iter().map(pick).fold(init, f)
    };
    let min_x = fold(f64::min, f64::INFINITY, |v| v.0).floor().max(0.0);
    let min_y = fold(f64::min, f64::INFINITY, |v| v.1).floor().max(0.0);
    let max_x = fold(f64::max, f64::NEG_INFINITY, |v| v.0).ceil().max(0.0);
    let max_y = fold(f64::max, f64::NEG_INFINITY, |v| v.1).ceil().max(0.0);

    if max_x <= min_x || max_y <= min_y {
        let n = vs.len() as f64;
        let cx = (vs.iter().map(|v| v.0).sum::<f64>() / n).round().max(0.0);
        let cy = (vs.iter().map(|v| v.1).sum::<f64>() / n).round().max(0.0);
        return PolygonBox {
            bbox: BBox::new(cx as u32, cy as u32, 1, 1),
            degenerate: true,
        };
    }
    PolygonBox {
        bbox: BBox::new(
            min_x as u32,
            min_y as u32,
            (max_x - min_x) as u32,
            (max_y - min_y) as u32,
        ),
        degenerate: false,
    }
}

/// Grow a box by `round(factor * height)` pixels on every side, clamped to
/// the image bounds.
pub fn enlarge_bbox(b: BBox, factor: f64, width: u32, height: u32) -> BBox {
    let pad = (factor.max(0.0) * b.height as f64).round() as u32;
    let left = b.left.saturating_sub(pad);
    let top = b.top.saturating_sub(pad);
    let right = b.right().saturating_add(pad).min(width.max(b.right()));
    let bottom = b.bottom().saturating_add(pad).min(height.max(b.bottom()));
    BBox::new(left, top, right - left, bottom - top)
}

/// Split regions into those whose box height reaches `theta * image_height`
/// and those strictly below it. Order is preserved in both lists.
pub fn filter_small_regions(
    regions: Vec<Polygon>,
    theta: f64,
    image_height: u32,
) -> (Vec<Polygon>, Vec<Polygon>) {
    let threshold = theta * image_height as f64;
    regions
        .into_iter()
        .partition(|p| polygon_to_bbox(p).bbox.height as f64 >= threshold)
}

/// Binary raster, `true` marks a pixel of interest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl Mask {
    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    /// Union of boxes, each clamped to the mask bounds.
    pub fn from_boxes(width: u32, height: u32, boxes: &[BBox]) -> Self {
        let mut mask = Self::empty(width, height);
        for b in boxes {
            mask.add_box(*b);
        }
        mask
    }

    pub fn add_box(&mut self, b: BBox) {
        let b = b.clamp_to(self.width, self.height);
        for y in b.top..b.bottom() {
            let row = y as usize * self.width as usize;
            self.bits[row + b.left as usize..row + b.right() as usize].fill(true);
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        x < self.width && y < self.height && self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Copy `edit` into `base` inside the union of `regions`; everything else stays
/// byte-identical to `base`.
pub fn composite(
    base: &RasterImage,
    edit: &RasterImage,
    regions: &[BBox],
) -> Result<RasterImage, ImagingError> {
    base.same_dims(edit)?;
    for r in regions {
        if !r.fits_within(base.width, base.height) {
            return Err(ImagingError::OutOfBounds(*r, base.width, base.height));
        }
    }
    let mut out = base.clone();
    let row_bytes = base.width as usize * 3;
    for r in regions {
        for y in r.top..r.bottom() {
            let start = y as usize * row_bytes + r.left as usize * 3;
            let end = start + r.width as usize * 3;
            out.pixels[start..end].copy_from_slice(&edit.pixels[start..end]);
        }
    }
    Ok(out)
}
