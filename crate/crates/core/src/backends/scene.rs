//! Synthetic scenes: flat backgrounds with words drawn in the built-in font.
//! They stand in for generated images when testing the pipeline end to end.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{BBox, ImagingError, RasterImage, Rgb};

use super::font;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("character {0:?} has no glyph in the built-in font")]
    UnknownGlyph(char),
    #[error("placement {index} ({word:?}) is empty or has scale 0")]
    EmptyPlacement { index: usize, word: String },
    #[error("placement {index} box {found:?} does not match the rendered extent {expected:?}")]
    BoxMismatch {
        index: usize,
        found: BBox,
        expected: BBox,
    },
    #[error("placement {0} lies outside the image")]
    OutOfBounds(usize),
    #[error("placements {0} and {1} overlap")]
    Overlap(usize, usize),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub word: String,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub scale: u32,
}

impl Placement {
    /// Placement whose box is the exact rendered extent of `word`.
    pub fn at(word: impl Into<String>, left: u32, top: u32, scale: u32) -> Self {
        let word = word.into();
        let (w, h) = font::text_extent(word.chars().count(), scale);
        Self {
            bbox: BBox::new(left, top, w, h),
            word,
            scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticScene {
    pub width: u32,
    pub height: u32,
    pub background: Rgb,
    pub text_color: Rgb,
    pub placements: Vec<Placement>,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticScene {
    pub fn new(width: u32, height: u32, background: Rgb, text_color: Rgb) -> Self {
        Self {
            width,
            height,
            background,
            text_color,
            placements: Vec::new(),
            seed: 0,
        }
    }

    pub fn with(mut self, placement: Placement) -> Self {
        self.placements.push(placement);
        self
    }

    pub fn words(&self) -> Vec<&str> {
        self.placements.iter().map(|p| p.word.as_str()).collect()
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        for (index, p) in self.placements.iter().enumerate() {
            if p.word.is_empty() || p.scale == 0 {
                return Err(SceneError::EmptyPlacement {
                    index,
                    word: p.word.clone(),
                });
            }
            if let Some(c) = p.word.chars().find(|&c| !font::is_renderable(c)) {
                return Err(SceneError::UnknownGlyph(c));
            }
            let expected = Placement::at(p.word.as_str(), p.bbox.left, p.bbox.top, p.scale).bbox;
            if expected != p.bbox {
                return Err(SceneError::BoxMismatch {
                    index,
                    found: p.bbox,
                    expected,
                });
            }
            if !p.bbox.fits_within(self.width, self.height) {
                return Err(SceneError::OutOfBounds(index));
            }
        }
        let grown: Vec<BBox> = self
            .placements
            .iter()
            .map(|p| enlarge_px(p.bbox, 1))
            .collect();
        for i in 0..grown.len() {
            for j in i + 1..grown.len() {
                if grown[i].intersects(&grown[j]) {
                    return Err(SceneError::Overlap(i, j));
                }
            }
        }
        Ok(())
    }
}

fn enlarge_px(b: BBox, px: u32) -> BBox {
    let left = b.left.saturating_sub(px);
    let top = b.top.saturating_sub(px);
    BBox::new(left, top, b.right() + px - left, b.bottom() + px - top)
}

pub fn render_scene(scene: &SyntheticScene) -> Result<RasterImage, SceneError> {
    scene.validate()?;
    let mut image = RasterImage::filled(scene.width, scene.height, scene.background)?;
    for p in &scene.placements {
        font::draw_word(
            &mut image,
            &p.word,
            p.bbox.left,
            p.bbox.top,
            p.scale,
            scene.text_color,
        )
        .map_err(SceneError::UnknownGlyph)?;
    }
    Ok(image)
}
