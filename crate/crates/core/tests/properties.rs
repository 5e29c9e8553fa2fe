use glyphfix::backends::corpus::{generate_scene, CorpusConfig};
use glyphfix::backends::{
    render_scene, ByzantinePlanner, EditTarget, FlakyEditor, MockDetector, MockEraser,
    MockRecognizer, Placement, Ports, SyntheticScene, TextDetector, TextEditor, TextEraser,
    TextRecognizer,
};
use glyphfix::imaging::{
    composite, enlarge_bbox, filter_small_regions, polygon_to_bbox, BBox, Mask, Polygon,
    RasterImage,
};
use glyphfix::layoutgen::{plan_missing, to_image_coords, LayoutElement, LayoutSource, PlanningError};
use glyphfix::pipeline::{run, PipelineConfig};
use proptest::prelude::*;

const BG: [u8; 3] = [250, 250, 245];
const INK: [u8; 3] = [20, 20, 20];

fn bbox_in(w: u32, h: u32) -> impl Strategy<Value = BBox> {
    (0..w, 0..h).prop_flat_map(move |(l, t)| (Just(l), Just(t), 1..=w - l, 1..=h - t))
        .prop_map(|(l, t, bw, bh)| BBox::new(l, t, bw, bh))
}

/// Words stacked in rows so they never collide.
fn scene_strategy() -> impl Strategy<Value = SyntheticScene> {
    let word = "[A-Z0-9!%&#$]{1,6}";
    prop::collection::vec((word, 1u32..=3, 0u32..40), 0..5).prop_map(|rows| {
        let mut scene = SyntheticScene::new(240, 200, BG, INK);
        let mut top = 2;
        for (word, scale, left) in rows {
            let p = Placement::at(word, left, top, scale);
            if p.bbox.bottom() + 2 > 200 {
                break;
            }
            top = p.bbox.bottom() + 3;
            scene.placements.push(p);
        }
        scene
    })
}

fn outside_identical(a: &RasterImage, b: &RasterImage, keep: &Mask) -> bool {
    (0..a.height()).all(|y| (0..a.width()).all(|x| keep.get(x, y) || a.get(x, y) == b.get(x, y)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn polygon_box_contains_its_vertices(
        pts in prop::collection::vec((-20.0f64..300.0, -20.0f64..300.0), 3..8)
    ) {
        let poly = Polygon::new(pts).unwrap().clamped(256, 256);
        let pb = polygon_to_bbox(&poly);
        if !pb.degenerate {
            for &(x, y) in poly.vertices() {
                prop_assert!(pb.bbox.contains_vertex(x, y));
            }
        }
        prop_assert!(pb.bbox.area() >= 1);
    }

    #[test]
    fn enlarged_box_contains_original(b in bbox_in(100, 80), f in 0.0f64..1.0) {
        let e = enlarge_bbox(b, f, 100, 80);
        prop_assert!(e.contains(&b));
        prop_assert!(e.fits_within(100, 80));
    }

    #[test]
    fn filter_partitions_by_height(heights in prop::collection::vec(1u32..20, 0..10), theta in 0.0f64..0.2) {
        let regions: Vec<Polygon> = heights.iter().map(|&h| Polygon::from_bbox(BBox::new(0, 0, 5, h))).collect();
        let (kept, removed) = filter_small_regions(regions, theta, 100);
        prop_assert_eq!(kept.len() + removed.len(), heights.len());
        for p in &kept {
            prop_assert!(polygon_to_bbox(p).bbox.height as f64 >= theta * 100.0);
        }
        for p in &removed {
            prop_assert!((polygon_to_bbox(p).bbox.height as f64) < theta * 100.0);
        }
    }

    #[test]
    fn composite_only_touches_regions(regions in prop::collection::vec(bbox_in(40, 30), 0..4)) {
        let base = RasterImage::filled(40, 30, BG).unwrap();
        let edit = RasterImage::filled(40, 30, INK).unwrap();
        let out = composite(&base, &edit, &regions).unwrap();
        let mask = Mask::from_boxes(40, 30, &regions);
        for y in 0..30 {
            for x in 0..40 {
                prop_assert_eq!(out.get(x, y), if mask.get(x, y) { INK } else { BG });
            }
        }
    }

    #[test]
    fn mock_ocr_closed_loop(scene in scene_strategy()) {
        let img = render_scene(&scene).unwrap();
        let polys = MockDetector.detect(&img).unwrap();
        let mut got = MockRecognizer.recognize(&img, &polys).unwrap();
        let mut want: Vec<String> = scene.placements.iter().map(|p| p.word.clone()).collect();
        got.sort();
        want.sort();
        prop_assert_eq!(got, want);
        let mut boxes: Vec<BBox> = polys.iter().map(|p| polygon_to_bbox(p).bbox).collect();
        let mut expected: Vec<BBox> = scene.placements.iter().map(|p| p.bbox).collect();
        boxes.sort();
        expected.sort();
        prop_assert_eq!(boxes, expected);
    }

    #[test]
    fn mocks_stay_inside_their_boxes(
        scene in scene_strategy(),
        masks in prop::collection::vec(bbox_in(240, 200), 0..4),
        p in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let img = render_scene(&scene).unwrap();
        let mask = Mask::from_boxes(240, 200, &masks);
        let erased = MockEraser.erase(&img, &masks, false).unwrap();
        prop_assert!(outside_identical(&img, &erased, &mask));

        let targets: Vec<EditTarget> = masks.iter().map(|&b| EditTarget { bbox: b, word: "OK".into() }).collect();
        let edited = FlakyEditor::new(p, seed).edit(&img, &targets, 3).unwrap();
        prop_assert!(outside_identical(&img, &edited.image, &mask));
        prop_assert_eq!(edited, FlakyEditor::new(p, seed).edit(&img, &targets, 3).unwrap());
    }

    #[test]
    fn canvas_elements_map_inside_image(
        (w, h, l, t) in (1i64..=128, 1i64..=128, 0i64..128, 0i64..128),
        iw in 1u32..1000,
        ih in 1u32..1000,
    ) {
        let e = LayoutElement::new("W", w.min(128 - l), h.min(128 - t), l, t);
        let b = to_image_coords(&e, iw, ih);
        prop_assert!(b.fits_within(iw, ih) && b.area() >= 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn byzantine_planning_always_valid(seed in any::<u64>(), n in 1usize..5, retries in 0u32..6) {
        let img = RasterImage::filled(256, 256, BG).unwrap();
        let missing: Vec<String> = (0..n).map(|i| format!("W{i}")).collect();
        let existing = vec![(BBox::new(10, 100, 100, 20), "OLD".to_string())];
        match plan_missing(&img, &existing, &missing, &ByzantinePlanner::new(seed), retries) {
            Ok(plan) => {
                prop_assert!(plan.planner_calls <= retries + 1);
                prop_assert_eq!(plan.elements.iter().map(|e| e.word.clone()).collect::<Vec<_>>(), missing);
                for e in &plan.elements {
                    prop_assert!(e.validate().is_ok());
                }
                if plan.source == LayoutSource::Fallback {
                    prop_assert_eq!(plan.planner_calls, retries + 1);
                }
            }
            Err(PlanningError::Overflow { planner_calls, .. }) => prop_assert_eq!(planner_calls, retries + 1),
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pipeline_invariants_on_generated_scenes(
        index in 0usize..1000,
        p in 0.0f64..=1.0,
        seed in any::<u64>(),
        erase_all in any::<bool>(),
    ) {
        let config = CorpusConfig { tiny_rate: 0.3, ..CorpusConfig::default() };
        let truth = generate_scene(&config, index);
        let img = render_scene(&truth.scene).unwrap();
        let ports = Ports::mock(p, seed);
        let cfg = PipelineConfig { seed, erase_all, ..PipelineConfig::default() };
        let (out, report) = run(&img, &truth.prompt, &cfg, &ports).unwrap();

        let mut touched = report.removal_boxes.clone();
        touched.extend(report.targets.iter().map(|t| t.bbox));
        prop_assert!(outside_identical(&img, &out, &Mask::from_boxes(img.width(), img.height(), &touched)));
        prop_assert!(report.check_consistency().is_ok(), "{:?}", report.check_consistency());
        prop_assert!(report.history.len() <= cfg.t_max as usize + 1);
        prop_assert!(report.planner_calls <= cfg.planner_retries + 1);

        let e = truth.expected;
        prop_assert_eq!(
            (report.detected_words, report.surplus_words, report.lack_words, report.typo_words, report.filtered_words),
            (e.detected_words, e.surplus_words, e.lack_words, e.typo_words, e.filtered_words)
        );
    }
}
