use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::imaging::BBox;
use crate::layoutgen::LayoutSource;
use crate::prompt::PromptSpec;
use crate::wordmatch::ErrorReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetOrigin {
    /// A detected word that needs its spelling fixed.
    Typo,
    /// A missing word given a fresh box by layout regeneration.
    Regenerated,
}

/// One word the correction loop tries to render.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetRecord {
    pub word: String,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub origin: TargetOrigin,
    pub corrected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectedWord {
    pub word: String,
    #[serde(rename = "box")]
    pub bbox: BBox,
}

/// Everything a run observed and did.
///
/// The five `*_words` counts follow the usual word-statistics columns.
/// `typo_corrected_words` counts every correction target whose render the
/// pipeline's own recognizer verified: fixed typos plus regenerated missing
/// words.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub prompt: Option<PromptSpec>,
    pub prompt_words: usize,
    pub detected_words: usize,
    pub surplus_words: usize,
    pub lack_words: usize,
    pub typo_words: usize,
    pub typo_corrected_words: usize,
    /// Regions dropped before recognition (too small or unreadable).
    pub filtered_words: usize,

    pub detected: Vec<DetectedWord>,
    pub errors: ErrorReport,
    /// Enlarged boxes whose pixels were replaced by the eraser.
    pub removal_boxes: Vec<BBox>,
    pub planner_source: Option<LayoutSource>,
    pub planner_calls: u32,
    /// Missing words the layout stage could not place.
    pub unplaceable: Vec<String>,
    pub targets: Vec<TargetRecord>,
    /// Outstanding target words before the first edit round and after each
    /// round.
    pub history: Vec<Vec<String>>,
    /// Prompt words the final image should be missing or misspelling, by the
    /// pipeline's own bookkeeping.
    pub residual_errors: Vec<String>,
    /// Exact plus verified-corrected prompt words over the prompt word count.
    pub ocr_star: f64,
    /// Wall-clock milliseconds per stage; never part of equality checks.
    #[serde(default)]
    pub timings_ms: BTreeMap<String, f64>,
}

impl RunReport {
    pub fn outstanding_counts(&self) -> Vec<usize> {
        self.history.iter().map(Vec::len).collect()
    }

    /// Copy with timings cleared, for reproducibility comparisons.
    pub fn without_timings(&self) -> Self {
        Self {
            timings_ms: BTreeMap::new(),
            ..self.clone()
        }
    }

    /// Check the bookkeeping laws tying the counts together.
    pub fn check_consistency(&self) -> Result<(), String> {
        let exact = self.errors.exact.len();
        if self.detected_words != exact + self.typo_words + self.surplus_words {
            return Err("detected != exact + typo + surplus".into());
        }
        if self.prompt_words != exact + self.typo_words + self.lack_words {
            return Err("prompt words != exact + typo + lack".into());
        }
        let placed = self.lack_words - self.unplaceable.len().min(self.lack_words);
        if self.typo_corrected_words > self.typo_words + placed {
            return Err("corrected exceeds typo + placed missing".into());
        }
        if self.typo_corrected_words != self.targets.iter().filter(|t| t.corrected).count() {
            return Err("corrected count disagrees with target records".into());
        }
        if self.outstanding_counts().windows(2).any(|w| w[1] > w[0]) {
            return Err("outstanding count increased".into());
        }
        Ok(())
    }
}
