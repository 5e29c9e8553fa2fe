//! Scoring: word accuracy against the prompt, corpus-wide word statistics,
//! and convergence curves of the correction loop.
//!
//! Accuracy here is measured with an evaluation recognizer that is configured
//! independently of the one the pipeline uses internally.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::backends::{BackendResult, TextDetector, TextRecognizer};
use crate::imaging::RasterImage;
use crate::pipeline::RunReport;
use crate::wordmatch::{Matcher, WordSet, DEFAULT_PAD_COST};

fn exact_pairs(targets: &WordSet, recognized: &WordSet, case_insensitive: bool) -> usize {
    Matcher::new(DEFAULT_PAD_COST, case_insensitive).exact_count(targets, recognized)
}

/// Fraction of prompt words the optimal assignment pairs with an identical
/// recognized word (ties between optimal assignments resolved toward more
/// exact pairs, so word order never matters). With no prompt words, 1.0 if nothing was recognized and
/// 0.0 otherwise.
pub fn ocr_accuracy(targets: &WordSet, recognized: &WordSet, case_insensitive: bool) -> f64 {
    if targets.is_empty() {
        return if recognized.is_empty() { 1.0 } else { 0.0 };
    }
    exact_pairs(targets, recognized, case_insensitive) as f64 / targets.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    pub targets: Vec<String>,
    pub recognized: Vec<String>,
    pub exact: usize,
    pub accuracy: f64,
}

impl EvalRecord {
    pub fn new(id: impl Into<String>, targets: &WordSet, recognized: &WordSet, case_insensitive: bool) -> Self {
        Self {
            id: id.into(),
            targets: targets.words().to_vec(),
            recognized: recognized.words().to_vec(),
            exact: exact_pairs(targets, recognized, case_insensitive),
            accuracy: ocr_accuracy(targets, recognized, case_insensitive),
        }
    }
}

/// Read every word in `image` with the evaluation OCR and score it.
pub fn evaluate_image(
    id: &str,
    image: &RasterImage,
    targets: &WordSet,
    detector: &dyn TextDetector,
    recognizer: &dyn TextRecognizer,
    case_insensitive: bool,
) -> BackendResult<EvalRecord> {
    let regions = detector.detect(image)?;
    let text = if regions.is_empty() {
        Vec::new()
    } else {
        recognizer.recognize(image, &regions)?
    };
    let recognized = WordSet::split(&text.join(" "));
    Ok(EvalRecord::new(id, targets, &recognized, case_insensitive))
}

/// Mean of per-image accuracies; 0.0 for no records.
pub fn macro_accuracy(records: &[EvalRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    records.iter().map(|r| r.accuracy).sum::<f64>() / records.len() as f64
}

/// Exact words over prompt words across the corpus. Records without prompt
/// words count only through their own accuracy when nothing else exists.
pub fn micro_accuracy(records: &[EvalRecord]) -> f64 {
    let total: usize = records.iter().map(|r| r.targets.len()).sum();
    if total == 0 {
        return macro_accuracy(records);
    }
    records.iter().map(|r| r.exact).sum::<usize>() as f64 / total as f64
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub images: usize,
    pub prompt_word_total: usize,
    pub detected_words: usize,
    pub surplus_words: usize,
    pub lack_words: usize,
    pub typo_words: usize,
    pub typo_corrected_words: usize,
}

pub fn corpus_stats(reports: &[RunReport]) -> CorpusStats {
    reports.iter().fold(CorpusStats::default(), |acc, r| CorpusStats {
        images: acc.images + 1,
        prompt_word_total: acc.prompt_word_total + r.prompt_words,
        detected_words: acc.detected_words + r.detected_words,
        surplus_words: acc.surplus_words + r.surplus_words,
        lack_words: acc.lack_words + r.lack_words,
        typo_words: acc.typo_words + r.typo_words,
        typo_corrected_words: acc.typo_corrected_words + r.typo_corrected_words,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCurve {
    /// Mean corrected-so-far fraction per iteration; index 0 is before any
    /// edit.
    pub mean_fraction: Vec<f64>,
    /// Reports without a correction history.
    pub skipped: usize,
}

impl ConvergenceCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,mean_fraction\n");
        for (i, f) in self.mean_fraction.iter().enumerate() {
            writeln!(out, "{i},{f}").expect("writing to a String");
        }
        out
    }
}

/// Per iteration, the mean over images of words corrected so far divided by
/// words eventually corrected (0 when an image never corrects anything).
/// Histories that stop early are held at their last value.
pub fn convergence_curve(reports: &[RunReport]) -> ConvergenceCurve {
    let histories: Vec<Vec<usize>> = reports
        .iter()
        .map(RunReport::outstanding_counts)
        .filter(|h| !h.is_empty())
        .collect();
    let skipped = reports.len() - histories.len();
    let len = histories.iter().map(Vec::len).max().unwrap_or(0);
    let mean_fraction = (0..len)
        .map(|t| {
            let sum: f64 = histories
                .iter()
                .map(|h| {
                    let (first, last) = (h[0], *h.last().unwrap());
                    let now = h[t.min(h.len() - 1)];
                    if first == last {
                        0.0
                    } else {
                        (first - now) as f64 / (first - last) as f64
                    }
                })
                .sum();
            sum / histories.len() as f64
        })
        .collect();
    ConvergenceCurve {
        mean_fraction,
        skipped,
    }
}
