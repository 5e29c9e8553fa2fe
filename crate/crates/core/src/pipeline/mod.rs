//! The four-stage repair run: detect and classify word errors, erase
//! unwanted text, plan boxes for missing words, then edit and re-read until
//! every target reads correctly or the round budget runs out.

mod report;

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use report::{DetectedWord, RunReport, TargetOrigin, TargetRecord};

use crate::backends::{
    mix_seed, BackendError, EditTarget, LayoutPlanner, Ports, TextDetector, TextEditor,
    TextEraser, TextRecognizer,
};
use crate::imaging::{
    composite, enlarge_bbox, filter_small_regions, polygon_to_bbox, BBox, Polygon, RasterImage,
};
use crate::layoutgen::{plan_missing, to_image_coords, LayoutSource, PlanningError};
use crate::prompt::extract_targets;
use crate::wordmatch::{classify, ErrorReport, Matcher, WordSet, DEFAULT_PAD_COST};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Regions shorter than `theta * image height` are treated as noise.
    pub theta: f64,
    pub t_max: u32,
    pub pad_cost: u32,
    /// Removal boxes grow by `round(enlarge_factor * height)` per side.
    pub enlarge_factor: f64,
    /// Mask every text region when erasing, compositing only the removals.
    pub erase_all: bool,
    pub planner_retries: u32,
    pub case_insensitive: bool,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            theta: 0.04,
            t_max: 10,
            pad_cost: DEFAULT_PAD_COST,
            enlarge_factor: 0.1,
            erase_all: true,
            planner_retries: 5,
            case_insensitive: false,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(format!("theta must lie in [0, 1], got {}", self.theta));
        }
        if self.t_max < 1 {
            return Err("t_max must be at least 1".into());
        }
        if self.pad_cost < 1 {
            return Err("pad_cost must be at least 1".into());
        }
        if !(self.enlarge_factor.is_finite() && self.enlarge_factor >= 0.0) {
            return Err(format!(
                "enlarge_factor must be a non-negative number, got {}",
                self.enlarge_factor
            ));
        }
        Ok(())
    }

    fn matcher(&self) -> Matcher {
        Matcher::new(self.pad_cost, self.case_insensitive)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterReason {
    /// Box height below the theta threshold.
    TooSmall,
    /// The recognizer returned nothing readable.
    Unrecognized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilteredRegion {
    pub polygon: Polygon,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub reason: FilterReason,
}

/// Retained word regions, one word each, plus the regions that were dropped.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectedText {
    pub regions: Vec<Polygon>,
    pub boxes: Vec<BBox>,
    pub words: Vec<String>,
    pub filtered: Vec<FilteredRegion>,
}

impl DetectedText {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word_set(&self) -> WordSet {
        WordSet::new(self.words.iter().cloned()).expect("detected words are split on whitespace")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Detect,
    Erase,
    Regenerate,
    Correct,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Detect => "detect",
            Stage::Erase => "erase",
            Stage::Regenerate => "regenerate",
            Stage::Correct => "correct",
        })
    }
}

/// A stage failed; carries whatever the run had produced up to that point.
#[derive(Debug, Error)]
#[error("{stage} stage failed: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: BackendError,
    pub partial: Box<RunReport>,
    pub image: Option<RasterImage>,
}

/// Failure inside the correction loop, with the loop's progress so far.
#[derive(Debug, Error)]
#[error("correction round {round} failed: {source}")]
pub struct CorrectionError {
    pub round: u32,
    #[source]
    pub source: BackendError,
    pub image: RasterImage,
    pub history: Vec<Vec<String>>,
}

fn check_dims(expected: &RasterImage, got: &RasterImage, what: &str) -> Result<(), BackendError> {
    if expected.width() != got.width() || expected.height() != got.height() {
        return Err(BackendError::Malformed(format!(
            "{what} returned a {}x{} image for a {}x{} input",
            got.width(),
            got.height(),
            expected.width(),
            expected.height()
        )));
    }
    Ok(())
}

/// Split a box holding several space-separated words into one box per word,
/// dividing the width in proportion to character positions.
fn split_words(bbox: BBox, text: &str) -> Vec<(BBox, String)> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    if tokens.len() <= 1 {
        return tokens.into_iter().map(|t| (bbox, t.to_owned())).collect();
    }
    let total = tokens.iter().map(|t| t.chars().count()).sum::<usize>() + tokens.len() - 1;
    let mut start = 0;
    tokens
        .into_iter()
        .map(|t| {
            let end = start + t.chars().count();
            let x = |c: usize| (bbox.width as f64 * c as f64 / total as f64).round() as u32;
            let (x0, x1) = (x(start), x(end).max(x(start) + 1).min(bbox.width.max(1)));
            start = end + 1;
            (
                BBox::new(bbox.left + x0, bbox.top, (x1 - x0).max(1), bbox.height),
                t.to_owned(),
            )
        })
        .collect()
}

pub fn detect_words(
    image: &RasterImage,
    detector: &dyn TextDetector,
    recognizer: &dyn TextRecognizer,
    config: &PipelineConfig,
) -> Result<DetectedText, BackendError> {
    let (w, h) = (image.width(), image.height());
    let regions: Vec<Polygon> = detector
        .detect(image)?
        .into_iter()
        .map(|p| p.clamped(w, h))
        .collect();
    let (kept, small) = filter_small_regions(regions, config.theta, h);

    let mut out = DetectedText::default();
    for polygon in small {
        out.filtered.push(FilteredRegion {
            bbox: polygon_to_bbox(&polygon).bbox.clamp_to(w, h),
            polygon,
            reason: FilterReason::TooSmall,
        });
    }
    if kept.is_empty() {
        return Ok(out);
    }

    let words = recognizer.recognize(image, &kept)?;
    if words.len() != kept.len() {
        return Err(BackendError::Malformed(format!(
            "recognizer returned {} words for {} regions",
            words.len(),
            kept.len()
        )));
    }
    for (polygon, text) in kept.into_iter().zip(words) {
        let bbox = polygon_to_bbox(&polygon).bbox.clamp_to(w, h);
        let pieces = split_words(bbox, &text);
        if pieces.is_empty() {
            out.filtered.push(FilteredRegion {
                polygon,
                bbox,
                reason: FilterReason::Unrecognized,
            });
            continue;
        }
        let single = pieces.len() == 1;
        for (b, word) in pieces {
            out.regions.push(if single {
                polygon.clone()
            } else {
                Polygon::from_bbox(b)
            });
            out.boxes.push(b);
            out.words.push(word);
        }
    }
    Ok(out)
}

/// Enlarged boxes of surplus words and filtered regions.
pub fn removal_boxes(
    image: &RasterImage,
    detected: &DetectedText,
    report: &ErrorReport,
    config: &PipelineConfig,
) -> Vec<BBox> {
    let (w, h) = (image.width(), image.height());
    report
        .surplus
        .iter()
        .map(|&i| detected.boxes[i])
        .chain(detected.filtered.iter().map(|f| f.bbox))
        .map(|b| enlarge_bbox(b, config.enlarge_factor, w, h))
        .filter(|b| !b.is_empty())
        .collect()
}

/// Erase surplus and filtered text. Only the removal boxes are composited
/// back, so every other pixel keeps its input value.
pub fn erase_stage(
    image: &RasterImage,
    detected: &DetectedText,
    report: &ErrorReport,
    eraser: &dyn TextEraser,
    config: &PipelineConfig,
) -> Result<RasterImage, BackendError> {
    let removal = removal_boxes(image, detected, report, config);
    if removal.is_empty() {
        return Ok(image.clone());
    }
    let masks = if config.erase_all {
        let (w, h) = (image.width(), image.height());
        let mut all = removal.clone();
        all.extend(
            detected
                .boxes
                .iter()
                .map(|&b| enlarge_bbox(b, config.enlarge_factor, w, h))
                .filter(|b| !removal.contains(b)),
        );
        all
    } else {
        removal.clone()
    };
    let erased = eraser.erase(image, &masks, config.erase_all)?;
    check_dims(image, &erased, "eraser")?;
    Ok(composite(image, &erased, &removal)?)
}

/// Boxes for the missing words.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Regenerated {
    pub boxes: Vec<(BBox, String)>,
    pub source: Option<LayoutSource>,
    pub planner_calls: u32,
    pub unplaceable: Vec<String>,
}

pub fn regenerate_stage(
    image: &RasterImage,
    detected: &DetectedText,
    report: &ErrorReport,
    planner: &dyn LayoutPlanner,
    config: &PipelineConfig,
) -> Regenerated {
    if report.missing.is_empty() {
        return Regenerated::default();
    }
    let (w, h) = (image.width(), image.height());
    let existing: Vec<(BBox, String)> = report
        .exact
        .iter()
        .chain(&report.typos)
        .map(|(i, word)| (detected.boxes[*i], word.clone()))
        .collect();
    match plan_missing(image, &existing, &report.missing, planner, config.planner_retries) {
        Ok(plan) => Regenerated {
            boxes: plan
                .elements
                .iter()
                .map(|e| (to_image_coords(e, w, h), e.word.clone()))
                .collect(),
            source: Some(plan.source),
            planner_calls: plan.planner_calls,
            unplaceable: Vec::new(),
        },
        Err(PlanningError::Overflow {
            unplaceable,
            placed,
            planner_calls,
        }) => Regenerated {
            boxes: placed
                .iter()
                .map(|e| (to_image_coords(e, w, h), e.word.clone()))
                .collect(),
            source: Some(LayoutSource::Fallback),
            planner_calls,
            unplaceable,
        },
        Err(PlanningError::NothingToPlan) => Regenerated::default(),
    }
}

/// Outcome of the edit-and-verify loop.
#[derive(Debug, Clone, PartialEq)]
pub struct Correction {
    pub image: RasterImage,
    pub history: Vec<Vec<String>>,
    pub corrected: Vec<bool>,
}

/// Render all outstanding targets, re-read each box, keep the boxes that now
/// read correctly, and repeat for at most `t_max` rounds.
pub fn typo_correct(
    image: &RasterImage,
    targets: &[(BBox, String)],
    editor: &dyn TextEditor,
    recognizer: &dyn TextRecognizer,
    config: &PipelineConfig,
) -> Result<Correction, CorrectionError> {
    let matcher = config.matcher();
    let mut working = image.clone();
    let mut outstanding: Vec<usize> = (0..targets.len()).collect();
    let mut corrected = vec![false; targets.len()];
    let words_of = |idx: &[usize]| idx.iter().map(|&i| targets[i].1.clone()).collect::<Vec<_>>();
    let mut history = vec![words_of(&outstanding)];

    for round in 0..config.t_max {
        if outstanding.is_empty() {
            break;
        }
        let fail = |source, working: &RasterImage, history: &Vec<Vec<String>>| CorrectionError {
            round: round + 1,
            source,
            image: working.clone(),
            history: history.clone(),
        };
        let requests: Vec<EditTarget> = outstanding
            .iter()
            .map(|&i| EditTarget {
                bbox: targets[i].0,
                word: targets[i].1.clone(),
            })
            .collect();
        let edited = editor
            .edit(&working, &requests, mix_seed(config.seed, round as u64))
            .and_then(|out| check_dims(&working, &out.image, "editor").map(|_| out.image))
            .map_err(|e| fail(e, &working, &history))?;
        let regions: Vec<Polygon> = requests.iter().map(|r| Polygon::from_bbox(r.bbox)).collect();
        let read = recognizer
            .recognize(&edited, &regions)
            .and_then(|words| {
                if words.len() == regions.len() {
                    Ok(words)
                } else {
                    Err(BackendError::Malformed("recognizer dropped regions".into()))
                }
            })
            .map_err(|e| fail(e, &working, &history))?;

        let mut verified = Vec::new();
        let mut still = Vec::new();
        for (&i, got) in outstanding.iter().zip(&read) {
            if matcher.same_word(got, &targets[i].1) {
                verified.push(targets[i].0);
                corrected[i] = true;
            } else {
                still.push(i);
            }
        }
        outstanding = still;
        working = composite(&working, &edited, &verified)
            .map_err(|e| fail(e.into(), &working, &history))?;
        history.push(words_of(&outstanding));
    }
    Ok(Correction {
        image: working,
        history,
        corrected,
    })
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1000.0
}

/// Run every stage on one image.
pub fn run(
    image: &RasterImage,
    prompt: &str,
    config: &PipelineConfig,
    ports: &Ports,
) -> Result<(RasterImage, RunReport), PipelineError> {
    let spec = extract_targets(prompt);
    let targets = spec.targets.clone();
    let mut report = RunReport {
        prompt_words: targets.len(),
        prompt: Some(spec),
        ..RunReport::default()
    };
    let fail = |stage, source, report: &RunReport, image: Option<&RasterImage>| PipelineError {
        stage,
        source,
        partial: Box::new(report.clone()),
        image: image.cloned(),
    };

    let t = Instant::now();
    let detected = detect_words(image, ports.detector.as_ref(), ports.recognizer.as_ref(), config)
        .map_err(|e| fail(Stage::Detect, e, &report, None))?;
    let matcher = config.matcher();
    let errors = classify(
        &matcher.match_sets(&targets, &detected.word_set()),
        &targets,
        &detected.word_set(),
    );
    report.timings_ms.insert("detect".into(), elapsed_ms(t));
    report.detected_words = detected.len();
    report.filtered_words = detected.filtered.len();
    report.surplus_words = errors.surplus.len();
    report.lack_words = errors.missing.len();
    report.typo_words = errors.typos.len();
    report.detected = detected
        .words
        .iter()
        .zip(&detected.boxes)
        .map(|(word, &bbox)| DetectedWord {
            word: word.clone(),
            bbox,
        })
        .collect();
    report.errors = errors.clone();

    let t = Instant::now();
    report.removal_boxes = removal_boxes(image, &detected, &errors, config);
    let erased = erase_stage(image, &detected, &errors, ports.eraser.as_ref(), config)
        .map_err(|e| fail(Stage::Erase, e, &report, None))?;
    report.timings_ms.insert("erase".into(), elapsed_ms(t));

    let t = Instant::now();
    let regenerated = regenerate_stage(&erased, &detected, &errors, ports.planner.as_ref(), config);
    report.timings_ms.insert("regenerate".into(), elapsed_ms(t));
    report.planner_source = regenerated.source;
    report.planner_calls = regenerated.planner_calls;
    report.unplaceable = regenerated.unplaceable.clone();

    let mut work: Vec<(BBox, String, TargetOrigin)> = errors
        .typos
        .iter()
        .map(|(i, word)| (detected.boxes[*i], word.clone(), TargetOrigin::Typo))
        .collect();
    work.extend(
        regenerated
            .boxes
            .into_iter()
            .map(|(b, word)| (b, word, TargetOrigin::Regenerated)),
    );
    report.targets = work
        .iter()
        .map(|(bbox, word, origin)| TargetRecord {
            word: word.clone(),
            bbox: *bbox,
            origin: *origin,
            corrected: false,
        })
        .collect();

    let t = Instant::now();
    let pairs: Vec<(BBox, String)> = work.iter().map(|(b, w, _)| (*b, w.clone())).collect();
    let output = if pairs.is_empty() {
        erased
    } else {
        let done = typo_correct(&erased, &pairs, ports.editor.as_ref(), ports.recognizer.as_ref(), config)
            .map_err(|e| {
                report.history = e.history.clone();
                fail(Stage::Correct, e.source, &report, Some(&e.image))
            })?;
        for (record, ok) in report.targets.iter_mut().zip(&done.corrected) {
            record.corrected = *ok;
        }
        report.history = done.history;
        done.image
    };
    report.timings_ms.insert("correct".into(), elapsed_ms(t));

    report.typo_corrected_words = report.targets.iter().filter(|t| t.corrected).count();
    report.residual_errors = report
        .targets
        .iter()
        .filter(|t| !t.corrected)
        .map(|t| t.word.clone())
        .chain(report.unplaceable.iter().cloned())
        .collect();
    report.ocr_star = if report.prompt_words == 0 {
        1.0
    } else {
        (errors.exact.len() + report.typo_corrected_words) as f64 / report.prompt_words as f64
    };
    Ok((output, report))
}
