//! Deterministic stand-ins for the model ports.
//!
//! The mock OCR reads pixels through the template scanner rather than a
//! side-channel registry, so erasing and editing are observed exactly the way
//! the pipeline observes them.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::font::{self, SUBSTITUTION_ALPHABET};
use super::scan::{has_ink, scan_words};
use super::{
    mix_seed, BackendError, BackendResult, EditOutput, EditTarget, LayoutPlanner,
    PromptAugmenter, TextDetector, TextEditor, TextEraser, TextRecognizer,
};
use crate::imaging::{most_frequent, polygon_to_bbox, BBox, Mask, Polygon, RasterImage, Rgb};
use crate::layoutgen::{band_layout, LayoutElement};

#[derive(Debug, Clone, Copy, Default)]
pub struct MockDetector;

impl TextDetector for MockDetector {
    fn detect(&self, image: &RasterImage) -> BackendResult<Vec<Polygon>> {
        let background = image.dominant_color();
        Ok(scan_words(image, background, image.full_box())
            .into_iter()
            .map(|w| Polygon::from_bbox(w.bbox))
            .collect())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MockRecognizer;

impl TextRecognizer for MockRecognizer {
    fn recognize(&self, image: &RasterImage, regions: &[Polygon]) -> BackendResult<Vec<String>> {
        let background = image.dominant_color();
        Ok(regions
            .iter()
            .map(|poly| {
                let region = polygon_to_bbox(&poly.clamped(image.width(), image.height())).bbox;
                let words = scan_words(image, background, region);
                if words.is_empty() {
                    if has_ink(image, background, region) {
                        font::UNKNOWN_GLYPH.to_string()
                    } else {
                        String::new()
                    }
                } else {
                    words
                        .into_iter()
                        .map(|w| w.text)
                        .collect::<Vec<_>>()
                        .join(" ")
                }
            })
            .collect())
    }
}

/// Most frequent color among pixels touching `boxes` from outside, skipping
/// anything inside `exclude`.
fn border_color(image: &RasterImage, boxes: &[BBox], exclude: &Mask) -> Option<Rgb> {
    let (w, h) = (image.width(), image.height());
    let mut seen = Mask::empty(w, h);
    let mut ring = Vec::new();
    for b in boxes {
        let x0 = b.left.saturating_sub(1);
        let y0 = b.top.saturating_sub(1);
        let x1 = (b.right() + 1).min(w);
        let y1 = (b.bottom() + 1).min(h);
        for y in y0..y1 {
            for x in x0..x1 {
                if b.contains_point(x, y) || exclude.get(x, y) || seen.get(x, y) {
                    continue;
                }
                seen.add_box(BBox::new(x, y, 1, 1));
                ring.push(image.get(x, y));
            }
        }
    }
    most_frequent(ring.into_iter())
}

/// Fills every mask with the most frequent color bordering it. Overlapping
/// masks are merged and filled once.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockEraser;

impl TextEraser for MockEraser {
    fn erase(&self, image: &RasterImage, masks: &[BBox], _erase_all: bool) -> BackendResult<RasterImage> {
        let (w, h) = (image.width(), image.height());
        let masks: Vec<BBox> = masks
            .iter()
            .map(|m| m.clamp_to(w, h))
            .filter(|m| !m.is_empty())
            .collect();
        let union = Mask::from_boxes(w, h, &masks);

        let mut group: Vec<usize> = (0..masks.len()).collect();
        fn root(group: &mut [usize], mut i: usize) -> usize {
            while group[i] != i {
                group[i] = group[group[i]];
                i = group[i];
            }
            i
        }
        for i in 0..masks.len() {
            for j in i + 1..masks.len() {
                if masks[i].intersects(&masks[j]) {
                    let (a, b) = (root(&mut group, i), root(&mut group, j));
                    group[a.max(b)] = a.min(b);
                }
            }
        }

        let mut out = image.clone();
        let fallback = image.dominant_color();
        for r in 0..masks.len() {
            if root(&mut group, r) != r {
                continue;
            }
            let members: Vec<BBox> = (0..masks.len())
                .filter(|&i| root(&mut group, i) == r)
                .map(|i| masks[i])
                .collect();
            let color = border_color(image, &members, &union).unwrap_or(fallback);
            for b in members {
                out.fill_box(b, color);
            }
        }
        Ok(out)
    }
}

/// Band placement planner; always schema-valid.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockPlanner;

impl LayoutPlanner for MockPlanner {
    fn plan(
        &self,
        _image: &RasterImage,
        existing: &[LayoutElement],
        missing: &[String],
    ) -> BackendResult<Vec<LayoutElement>> {
        band_layout(existing, missing).map_err(|(_, unplaceable)| BackendError::Overflow(unplaceable))
    }
}

/// Planner that answers with seeded garbage: errors, out-of-range numbers,
/// wrong or extra words, and occasionally something valid.
#[derive(Debug, Default)]
pub struct ByzantinePlanner {
    seed: u64,
    calls: AtomicU64,
}

impl ByzantinePlanner {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            calls: AtomicU64::new(0),
        }
    }
}

impl LayoutPlanner for ByzantinePlanner {
    fn plan(
        &self,
        _image: &RasterImage,
        _existing: &[LayoutElement],
        missing: &[String],
    ) -> BackendResult<Vec<LayoutElement>> {
        let call = self.calls.fetch_add(1, Ordering::Relaxed);
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.seed, call));
        if rng.gen_bool(0.25) {
            return Err(BackendError::Malformed("planner emitted unparsable output".into()));
        }
        let count = rng.gen_range(0..=missing.len() + 2);
        Ok((0..count)
            .map(|i| {
                let word = match (missing.get(i), rng.gen_range(0..4)) {
                    (Some(w), 0..=2) => w.clone(),
                    (_, 3) => String::new(),
                    _ => "JUNK".to_owned(),
                };
                LayoutElement::new(
                    word,
                    rng.gen_range(-20..=300),
                    rng.gen_range(-20..=300),
                    rng.gen_range(-50..=200),
                    rng.gen_range(-50..=200),
                )
            })
            .collect())
    }
}

/// Text editor that renders each target correctly with probability
/// `success`, and otherwise with exactly one character substituted.
///
/// Output depends only on `(image, targets, editor seed, call seed)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlakyEditor {
    success: f64,
    seed: u64,
}

impl FlakyEditor {
    pub fn new(success: f64, seed: u64) -> Self {
        assert!((0.0..=1.0).contains(&success), "success probability out of range");
        Self { success, seed }
    }

    pub fn success(&self) -> f64 {
        self.success
    }
}

fn contrast_color(fill: Rgb) -> Rgb {
    let luma = 0.299 * fill[0] as f64 + 0.587 * fill[1] as f64 + 0.114 * fill[2] as f64;
    if luma > 127.5 {
        [0, 0, 0]
    } else {
        [255, 255, 255]
    }
}

impl TextEditor for FlakyEditor {
    fn edit(&self, image: &RasterImage, targets: &[EditTarget], seed: u64) -> BackendResult<EditOutput> {
        let (w, h) = (image.width(), image.height());
        if let Some(t) = targets.iter().find(|t| t.bbox.is_empty() || !t.bbox.fits_within(w, h)) {
            return Err(BackendError::InvalidRequest(format!(
                "target box {:?} outside a {w}x{h} image",
                t.bbox
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.seed, seed));
        let alphabet: Vec<char> = SUBSTITUTION_ALPHABET.chars().collect();
        let no_exclusion = Mask::empty(w, h);
        let mut out = image.clone();
        let mut skipped = Vec::new();

        for (i, target) in targets.iter().enumerate() {
            let mut chars: Vec<char> = target.word.chars().collect();
            let succeed = rng.gen::<f64>() < self.success;
            if !succeed && !chars.is_empty() {
                let pos = rng.gen_range(0..chars.len());
                let choices: Vec<char> = alphabet.iter().copied().filter(|&c| c != chars[pos]).collect();
                chars[pos] = choices[rng.gen_range(0..choices.len())];
            }
            let b = target.bbox;
            let renderable = chars.iter().all(|&c| font::is_renderable(c));
            let Some(scale) = font::fit_scale(chars.len(), b.width, b.height).filter(|_| renderable) else {
                skipped.push(i);
                continue;
            };

            let fill = border_color(image, &[b], &no_exclusion).unwrap_or_else(|| image.dominant_color());
            let inside = (b.top..b.bottom())
                .flat_map(|y| (b.left..b.right()).map(move |x| (x, y)))
                .map(|(x, y)| image.get(x, y))
                .filter(|&c| c != fill);
            let ink = most_frequent(inside).unwrap_or_else(|| contrast_color(fill));

            let word: String = chars.into_iter().collect();
            let (tw, th) = font::text_extent(word.chars().count(), scale);
            out.fill_box(b, fill);
            font::draw_word(
                &mut out,
                &word,
                b.left + (b.width - tw) / 2,
                b.top + (b.height - th) / 2,
                scale,
                ink,
            )
            .expect("glyphs checked above");
        }
        Ok(EditOutput { image: out, skipped })
    }
}

/// Augmenter that frames the prompt as a poster description and keeps every
/// quoted span untouched.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockAugmenter;

impl PromptAugmenter for MockAugmenter {
    fn augment(&self, prompt: &str) -> BackendResult<String> {
        Ok(format!("A clean, high-contrast poster design: {prompt}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::scene::{render_scene, Placement, SyntheticScene};

    const BG: Rgb = [240, 235, 220];
    const INK: Rgb = [30, 30, 90];

    fn scene(placements: Vec<Placement>) -> SyntheticScene {
        let mut s = SyntheticScene::new(200, 120, BG, INK);
        s.placements = placements;
        s
    }

    fn read(image: &RasterImage, b: BBox) -> String {
        MockRecognizer
            .recognize(image, &[Polygon::from_bbox(b)])
            .unwrap()
            .remove(0)
    }

    #[test]
    fn detect_recovers_placement_box() {
        let s = scene(vec![Placement::at("SALE", 20, 30, 2)]);
        let img = render_scene(&s).unwrap();
        let polys = MockDetector.detect(&img).unwrap();
        assert_eq!(polys.len(), 1);
        assert_eq!(polygon_to_bbox(&polys[0]).bbox, s.placements[0].bbox);
        assert_eq!(read(&img, s.placements[0].bbox), "SALE");
    }

    #[test]
    fn detect_blank_and_three_words() {
        let blank = render_scene(&scene(vec![])).unwrap();
        assert!(MockDetector.detect(&blank).unwrap().is_empty());

        let s = scene(vec![
            Placement::at("BIG", 5, 5, 2),
            Placement::at("SALE", 100, 5, 3),
            Placement::at("NOW", 40, 70, 2),
        ]);
        let img = render_scene(&s).unwrap();
        let polys = MockDetector.detect(&img).unwrap();
        assert_eq!(polys.len(), 3);
        let mut words = MockRecognizer.recognize(&img, &polys).unwrap();
        words.sort();
        assert_eq!(words, ["BIG", "NOW", "SALE"]);
    }

    #[test]
    fn recognize_blank_region_is_empty() {
        let img = render_scene(&scene(vec![Placement::at("A", 0, 0, 2)])).unwrap();
        assert_eq!(read(&img, BBox::new(100, 60, 30, 20)), "");
    }

    #[test]
    fn corrupted_column_reads_as_unknown() {
        let s = scene(vec![Placement::at("SALE", 20, 30, 2)]);
        let mut img = render_scene(&s).unwrap();
        // Column 2 of the 'A' cell (font pixels) becomes solid ink.
        let cell_left = 20 + 6 * 2;
        for y in 30..44 {
            for dx in 0..2 {
                img.set(cell_left + 2 * 2 + dx, y, INK);
            }
        }
        assert_eq!(read(&img, s.placements[0].bbox), "S?LE");
    }

    #[test]
    fn erase_flattens_word() {
        let s = scene(vec![Placement::at("SALE", 20, 30, 2), Placement::at("NOW", 20, 80, 2)]);
        let img = render_scene(&s).unwrap();
        let mask = s.placements[0].bbox;
        let out = MockEraser.erase(&img, &[mask], false).unwrap();
        assert_eq!(MockDetector.detect(&out).unwrap().len(), 1);
        for y in 0..img.height() {
            for x in 0..img.width() {
                if mask.contains_point(x, y) {
                    assert_eq!(out.get(x, y), BG);
                } else {
                    assert_eq!(out.get(x, y), img.get(x, y));
                }
            }
        }
        assert_eq!(MockEraser.erase(&img, &[], false).unwrap(), img);
    }

    #[test]
    fn overlapping_masks_erase_union_once() {
        let s = scene(vec![Placement::at("SALE", 20, 30, 2)]);
        let img = render_scene(&s).unwrap();
        let a = BBox::new(18, 28, 30, 18);
        let b = BBox::new(40, 28, 30, 18);
        let both = MockEraser.erase(&img, &[a, b], false).unwrap();
        let reversed = MockEraser.erase(&img, &[b, a], false).unwrap();
        assert_eq!(both, reversed);
        assert!(MockDetector.detect(&both).unwrap().is_empty());
    }

    #[test]
    fn mock_plan_band_rules() {
        let img = RasterImage::filled(128, 128, BG).unwrap();
        let plan = MockPlanner.plan(&img, &[], &["HI".to_string()]).unwrap();
        assert_eq!(plan.len(), 1);
        assert_eq!((plan[0].width, plan[0].height, plan[0].top), (14, 12, 0));
        assert!(MockPlanner.plan(&img, &[], &[]).unwrap().is_empty());
        let full = vec![LayoutElement::new("X", 128, 128, 0, 0)];
        assert!(matches!(
            MockPlanner.plan(&img, &full, &["HI".to_string()]),
            Err(BackendError::Overflow(_))
        ));
    }

    fn typo_targets(n: u32) -> (RasterImage, Vec<EditTarget>) {
        let cols = 10;
        let mut s = SyntheticScene::new(cols * 40, (n / cols + 1) * 16, BG, INK);
        let mut targets = Vec::new();
        for i in 0..n {
            let p = Placement::at("SALF", 4 + (i % cols) * 40, 4 + (i / cols) * 16, 1);
            targets.push(EditTarget {
                bbox: p.bbox,
                word: "SALE".into(),
            });
            s.placements.push(p);
        }
        (render_scene(&s).unwrap(), targets)
    }

    #[test]
    fn forced_success_and_failure() {
        let (img, targets) = typo_targets(12);
        let ok = FlakyEditor::new(1.0, 3).edit(&img, &targets, 0).unwrap();
        assert!(ok.skipped.is_empty());
        for t in &targets {
            assert_eq!(read(&ok.image, t.bbox), "SALE");
        }
        let bad = FlakyEditor::new(0.0, 3).edit(&img, &targets, 0).unwrap();
        for t in &targets {
            let got = read(&bad.image, t.bbox);
            assert_eq!(crate::wordmatch::levenshtein(&got, "SALE"), 1, "{got}");
        }
    }

    #[test]
    fn half_success_rate_is_concentrated() {
        let (img, targets) = typo_targets(1000);
        let out = FlakyEditor::new(0.5, 11).edit(&img, &targets, 99).unwrap();
        let good = targets.iter().filter(|t| read(&out.image, t.bbox) == "SALE").count();
        let frac = good as f64 / 1000.0;
        assert!((0.45..=0.55).contains(&frac), "{frac}");
        let again = FlakyEditor::new(0.5, 11).edit(&img, &targets, 99).unwrap();
        assert_eq!(again.image, out.image);
    }

    #[test]
    fn edit_stays_inside_boxes_and_skips_tiny() {
        let (img, mut targets) = typo_targets(3);
        targets[1].bbox = BBox::new(targets[1].bbox.left, targets[1].bbox.top, 4, 4);
        let out = FlakyEditor::new(1.0, 0).edit(&img, &targets, 0).unwrap();
        assert_eq!(out.skipped, vec![1]);
        let boxes = Mask::from_boxes(img.width(), img.height(), &targets.iter().map(|t| t.bbox).collect::<Vec<_>>());
        for y in 0..img.height() {
            for x in 0..img.width() {
                if !boxes.get(x, y) {
                    assert_eq!(out.image.get(x, y), img.get(x, y));
                }
            }
        }
    }

    #[test]
    fn byzantine_planner_is_seeded() {
        let img = RasterImage::filled(64, 64, BG).unwrap();
        let missing = vec!["A".to_string()];
        let a = ByzantinePlanner::new(5);
        let b = ByzantinePlanner::new(5);
        for _ in 0..10 {
            assert_eq!(
                format!("{:?}", a.plan(&img, &[], &missing)),
                format!("{:?}", b.plan(&img, &[], &missing))
            );
        }
    }
}
