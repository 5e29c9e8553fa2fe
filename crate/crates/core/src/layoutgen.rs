//! Layout regeneration for missing words.
//!
//! The planner works on a fixed 128x128 canvas. Existing text boxes are scaled
//! down onto it, the planner's answer is checked against the element schema,
//! and after the retry budget is spent a deterministic band placement takes
//! over so the run never stalls on a misbehaving planner.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::LayoutPlanner;
use crate::imaging::{BBox, RasterImage};

pub const CANVAS: i64 = 128;
/// Overlap tolerated between a planned element and an existing box.
pub const MAX_EXISTING_IOU: f64 = 0.3;

const BAND_HEIGHT: i64 = 12;
const BAND_MARGIN: i64 = 1;
const MAX_BAND_WIDTH: i64 = 124;

/// System prompt sent with every planning request.
pub const LAYOUT_SYSTEM_PROMPT: &str = include_str!("../data/prompts/layout_system.txt");

/// One word box on the 128x128 canvas. Fields are wide signed integers so
/// out-of-schema planner output is representable and can be rejected.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayoutElement {
    pub word: String,
    pub width: i64,
    pub height: i64,
    pub left: i64,
    pub top: i64,
}

impl LayoutElement {
    pub fn new(word: impl Into<String>, width: i64, height: i64, left: i64, top: i64) -> Self {
        Self {
            word: word.into(),
            width,
            height,
            left,
            top,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.word.is_empty() {
            return Err("element word is empty".into());
        }
        let check = |name: &str, v: i64, lo: i64, hi: i64| {
            if v < lo || v > hi {
                Err(format!("{name} {v} outside {lo}..={hi} for {:?}", self.word))
            } else {
                Ok(())
            }
        };
        check("width", self.width, 1, CANVAS)?;
        check("height", self.height, 1, CANVAS)?;
        check("left", self.left, 0, CANVAS - 1)?;
        check("top", self.top, 0, CANVAS - 1)?;
        if self.left + self.width > CANVAS || self.top + self.height > CANVAS {
            return Err(format!("{:?} extends past the canvas", self.word));
        }
        Ok(())
    }

    fn iou(&self, other: &LayoutElement) -> f64 {
        let ix = (self.left + self.width).min(other.left + other.width) - self.left.max(other.left);
        let iy = (self.top + self.height).min(other.top + other.height) - self.top.max(other.top);
        let inter = (ix.max(0) * iy.max(0)) as f64;
        let union = (self.width * self.height + other.width * other.height) as f64 - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutSource {
    Planner,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedLayout {
    /// One element per missing word, in the order requested.
    pub elements: Vec<LayoutElement>,
    pub source: LayoutSource,
    pub planner_calls: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<String>,
}

#[derive(Debug, Error, PartialEq)]
pub enum PlanningError {
    #[error("no missing words to plan")]
    NothingToPlan,
    #[error("no room left on the canvas for {unplaceable:?}")]
    Overflow {
        unplaceable: Vec<String>,
        placed: Vec<LayoutElement>,
        planner_calls: u32,
    },
}

/// Image box to canvas units: floor the near edges, ceil the far ones.
pub fn to_canvas(b: BBox, image_width: u32, image_height: u32) -> (i64, i64, i64, i64) {
    let axis = |lo: u32, len: u32, size: u32| {
        let scale = CANVAS as f64 / size as f64;
        let start = ((lo as f64 * scale).floor() as i64).clamp(0, CANVAS - 1);
        let end = (((lo + len) as f64 * scale).ceil() as i64).clamp(start + 1, CANVAS);
        (start, end - start)
    };
    let (left, width) = axis(b.left, b.width, image_width);
    let (top, height) = axis(b.top, b.height, image_height);
    (left, top, width, height)
}

/// Canvas element to image pixels, scaled per axis, rounded and clamped so
/// the box stays inside the image with positive area.
pub fn to_image_coords(element: &LayoutElement, image_width: u32, image_height: u32) -> BBox {
    let axis = |lo: i64, len: i64, size: u32| {
        let scale = size as f64 / CANVAS as f64;
        let size = size as i64;
        let start = ((lo as f64 * scale).round() as i64).clamp(0, size - 1);
        let end = (((lo + len) as f64 * scale).round() as i64).clamp(0, size);
        let extent = (end - start).max(1);
        (start.min(size - extent), extent)
    };
    let (left, width) = axis(element.left, element.width, image_width);
    let (top, height) = axis(element.top, element.height, image_height);
    BBox::new(left as u32, top as u32, width as u32, height as u32)
}

/// Deterministic placement: each word goes into the topmost horizontal band
/// that clears every occupied element by one canvas unit, centered, sized
/// `min(124, 6 * len + 2)` by 12. Words that do not fit are returned as the
/// error value together with the elements that were placed.
pub fn band_layout(
    existing: &[LayoutElement],
    missing: &[String],
) -> Result<Vec<LayoutElement>, (Vec<LayoutElement>, Vec<String>)> {
    let mut occupied: Vec<(i64, i64)> = existing
        .iter()
        .map(|e| (e.top - BAND_MARGIN, e.top + e.height + BAND_MARGIN))
        .collect();
    let mut placed = Vec::new();
    let mut unplaceable = Vec::new();
    for word in missing {
        let width = (6 * word.chars().count() as i64 + 2).min(MAX_BAND_WIDTH);
        let free = (0..=CANVAS - BAND_HEIGHT)
            .find(|&top| occupied.iter().all(|&(a, b)| top + BAND_HEIGHT <= a || top >= b));
        match free {
            Some(top) => {
                occupied.push((top - BAND_MARGIN, top + BAND_HEIGHT + BAND_MARGIN));
                placed.push(LayoutElement::new(
                    word.clone(),
                    width,
                    BAND_HEIGHT,
                    (CANVAS - width) / 2,
                    top,
                ));
            }
            None => unplaceable.push(word.clone()),
        }
    }
    if unplaceable.is_empty() {
        Ok(placed)
    } else {
        Err((placed, unplaceable))
    }
}

/// Check a planner answer and reorder it to follow `missing`.
pub fn validate_plan(
    elements: &[LayoutElement],
    existing: &[LayoutElement],
    missing: &[String],
) -> Result<Vec<LayoutElement>, String> {
    for e in elements {
        e.validate()?;
        if let Some(hit) = existing.iter().find(|x| e.iou(x) > MAX_EXISTING_IOU) {
            return Err(format!(
                "{:?} overlaps existing {:?} beyond IoU {MAX_EXISTING_IOU}",
                e.word, hit.word
            ));
        }
    }
    let mut pool: HashMap<&str, Vec<&LayoutElement>> = HashMap::new();
    for e in elements.iter().rev() {
        pool.entry(e.word.as_str()).or_default().push(e);
    }
    let mut ordered = Vec::with_capacity(missing.len());
    for word in missing {
        match pool.get_mut(word.as_str()).and_then(Vec::pop) {
            Some(e) => ordered.push(e.clone()),
            None => return Err(format!("no element for missing word {word:?}")),
        }
    }
    if let Some((extra, _)) = pool.iter().find(|(_, v)| !v.is_empty()) {
        return Err(format!("unrequested element {extra:?}"));
    }
    Ok(ordered)
}

/// Ask the planner for boxes for `missing`, retrying invalid answers up to
/// `retries` times before falling back to [`band_layout`].
pub fn plan_missing(
    image: &RasterImage,
    existing: &[(BBox, String)],
    missing: &[String],
    planner: &dyn LayoutPlanner,
    retries: u32,
) -> Result<PlannedLayout, PlanningError> {
    if missing.is_empty() {
        return Err(PlanningError::NothingToPlan);
    }
    let (w, h) = (image.width(), image.height());
    let existing: Vec<LayoutElement> = existing
        .iter()
        .map(|(b, word)| {
            let (left, top, width, height) = to_canvas(*b, w, h);
            LayoutElement::new(word.clone(), width, height, left, top)
        })
        .collect();

    let mut violations = Vec::new();
    let mut calls = 0;
    for _ in 0..=retries {
        calls += 1;
        let answer = planner
            .plan(image, &existing, missing)
            .map_err(|e| e.to_string())
            .and_then(|elements| validate_plan(&elements, &existing, missing));
        match answer {
            Ok(elements) => {
                return Ok(PlannedLayout {
                    elements,
                    source: LayoutSource::Planner,
                    planner_calls: calls,
                    violations,
                })
            }
            Err(why) => violations.push(why),
        }
    }

    match band_layout(&existing, missing) {
        Ok(elements) => Ok(PlannedLayout {
            elements,
            source: LayoutSource::Fallback,
            planner_calls: calls,
            violations,
        }),
        Err((placed, unplaceable)) => Err(PlanningError::Overflow {
            unplaceable,
            placed,
            planner_calls: calls,
        }),
    }
}
