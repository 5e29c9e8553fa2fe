//! Rating port for model-based image critique. Only the contract and the
//! system prompts live here; no rater is implemented in-process.

use serde::{Deserialize, Serialize};

use super::BackendResult;
use crate::imaging::RasterImage;

pub const GRAPHIC_DESIGN_PROMPT: &str = include_str!("../../data/prompts/rate_graphic.txt");
pub const TEXT_MATCHING_PROMPT: &str = include_str!("../../data/prompts/rate_matching.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatingAspect {
    GraphicDesign,
    TextMatching,
}

impl RatingAspect {
    pub fn system_prompt(self) -> &'static str {
        match self {
            Self::GraphicDesign => GRAPHIC_DESIGN_PROMPT,
            Self::TextMatching => TEXT_MATCHING_PROMPT,
        }
    }
}

/// Score in 1..=10 with the rater's explanation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rating {
    pub score: u8,
    pub explanation: String,
}

pub trait Rater: Send + Sync {
    fn rate(&self, image: &RasterImage, prompt: &str, aspect: RatingAspect) -> BackendResult<Rating>;
}
