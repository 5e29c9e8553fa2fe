//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any fails.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

use std::collections::HashMap;
use std::net::{Ipv4Addr, SocketAddr};
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use glyphfix::backends::corpus::{generate, CorpusConfig, GroundTruth};
use glyphfix::backends::{
    render_scene, BackendEndpoint, BackendResult, ByzantinePlanner, EndpointTarget, FlakyEditor,
    MockRecognizer, Placement, Ports, SyntheticScene, TextDetector, TextRecognizer,
};
use glyphfix::evalharness::{convergence_curve, corpus_stats, evaluate_image, macro_accuracy, CorpusStats};
use glyphfix::imaging::{filter_small_regions, polygon_to_bbox, BBox, Mask, Polygon, RasterImage};
use glyphfix::layoutgen::{plan_missing, LayoutSource, PlanningError};
use glyphfix::pipeline::{detect_words, run, typo_correct, FilterReason, PipelineConfig, RunReport};
use glyphfix::wordmatch::{classify, Matcher, WordSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

// ---- oracles -------------------------------------------------------------

/// Edit distance by its recursive definition, memoized on suffix positions.
fn edit_oracle(a: &[u8], b: &[u8]) -> usize {
    fn go(a: &[u8], b: &[u8], memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if a.is_empty() {
            return b.len();
        }
        if b.is_empty() {
            return a.len();
        }
        if let Some(&d) = memo.get(&(a.len(), b.len())) {
            return d;
        }
        let sub = go(&a[1..], &b[1..], memo) + usize::from(a[0] != b[0]);
        let del = go(&a[1..], b, memo) + 1;
        let ins = go(a, &b[1..], memo) + 1;
        let d = sub.min(del).min(ins);
        memo.insert((a.len(), b.len()), d);
        d
    }
    go(a, b, &mut HashMap::new())
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Exhaustive minimum over all pairings of the padded lists.
fn brute_min_cost(prompt: &[String], detected: &[String], pad: u64) -> u64 {
    let size = prompt.len().max(detected.len());
    let cost = |i: usize, j: usize| match (prompt.get(i), detected.get(j)) {
        (Some(a), Some(b)) => edit_oracle(a.as_bytes(), b.as_bytes()) as u64,
        (None, None) => 0,
        _ => pad,
    };
    permutations(size)
        .iter()
        .map(|p| p.iter().enumerate().map(|(i, &j)| cost(i, j)).sum())
        .min()
        .unwrap_or(0)
}

fn random_words(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    (0..n)
        .map(|_| {
            let len = rng.gen_range(1..=6);
            (0..len).map(|_| char::from(b'a' + rng.gen_range(0..4u8))).collect()
        })
        .collect()
}

fn instances() -> Vec<(Vec<String>, Vec<String>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..1000)
        .map(|_| {
            let n = rng.gen_range(0..=6);
            let m = rng.gen_range(0..=6);
            (random_words(&mut rng, n), random_words(&mut rng, m))
        })
        .collect()
}

fn corpus() -> Vec<GroundTruth> {
    generate(&CorpusConfig::default())
}

fn outside_identical(a: &RasterImage, b: &RasterImage, keep: &Mask) -> bool {
    (0..a.height()).all(|y| (0..a.width()).all(|x| keep.get(x, y) || a.get(x, y) == b.get(x, y)))
}

fn run_corpus(ports: &Ports, seed: u64) -> Result<Vec<(RasterImage, RasterImage, RunReport)>, String> {
    corpus()
        .iter()
        .enumerate()
        .map(|(i, truth)| {
            let img = render_scene(&truth.scene).map_err(|e| e.to_string())?;
            let cfg = PipelineConfig {
                seed: seed ^ i as u64,
                ..PipelineConfig::default()
            };
            let (out, report) = run(&img, &truth.prompt, &cfg, ports).map_err(|e| format!("{}: {e}", truth.id))?;
            Ok((img, out, report))
        })
        .collect()
}

// ---- criteria ------------------------------------------------------------

fn assignment_optimality() -> Check {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for (k, (p, d)) in instances().iter().enumerate() {
        let pad = rng.gen_range(1..=12);
        let got = Matcher::new(pad, false)
            .match_sets(&WordSet::new(p.clone()).unwrap(), &WordSet::new(d.clone()).unwrap())
            .total_cost;
        let want = brute_min_cost(p, d, pad as u64);
        ensure!(got == want, "instance {k} {p:?} vs {d:?} pad {pad}: {got} != {want}");
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!("1000 instances equal exhaustive minimum in {elapsed:.2?}"))
}

fn taxonomy_cardinality() -> Check {
    // Words are at most 6 long, so no Levenshtein distance exceeds 6.
    let pad = 7;
    for (k, (p, d)) in instances().iter().enumerate() {
        let (pw, dw) = (WordSet::new(p.clone()).unwrap(), WordSet::new(d.clone()).unwrap());
        let report = classify(&Matcher::new(pad, false).match_sets(&pw, &dw), &pw, &dw);
        let (n, m) = (p.len(), d.len());
        ensure!(
            report.surplus.len() == m.saturating_sub(n) && report.missing.len() == n.saturating_sub(m),
            "instance {k}: N={n} N^={m} surplus {} missing {}",
            report.surplus.len(),
            report.missing.len()
        );
    }
    Ok("surplus = max(0, N^-N) and missing = max(0, N-N^) on 1000 instances".into())
}

fn levenshtein_oracle() -> Check {
    let mut words = vec![String::new()];
    let mut frontier = vec![String::new()];
    for _ in 0..5 {
        frontier = frontier
            .iter()
            .flat_map(|w| ['a', 'b', 'c'].map(|c| format!("{w}{c}")))
            .collect();
        words.extend(frontier.iter().cloned());
    }
    let mut pairs = 0usize;
    for a in &words {
        for b in &words {
            let got = glyphfix::wordmatch::levenshtein(a, b);
            let want = edit_oracle(a.as_bytes(), b.as_bytes());
            ensure!(got == want, "d({a:?}, {b:?}) = {got}, oracle {want}");
            pairs += 1;
        }
    }
    Ok(format!("{pairs} pairs agree with the recursive definition"))
}

fn pixel_conservatism() -> Check {
    let started = Instant::now();
    let mut checked = 0;
    for (img, out, report) in run_corpus(&Ports::mock(0.5, 17), 3)? {
        let mut touched = report.removal_boxes.clone();
        touched.extend(report.targets.iter().map(|t| t.bbox));
        ensure!(
            outside_identical(&img, &out, &Mask::from_boxes(img.width(), img.height(), &touched)),
            "scene {checked}: pixels changed outside removal and target boxes"
        );
        checked += 1;
    }
    pixel_conservatism_erase_all_off()?;
    checked *= 2;
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!("{checked} outputs (erase-all on and off) unchanged outside edited boxes in {elapsed:.2?}"))
}

fn pixel_conservatism_erase_all_off() -> Result<(), String> {
    // Same property with erase_all off, so both erase variants are covered.
    let ports = Ports::mock(0.5, 17);
    for (i, truth) in corpus().iter().enumerate() {
        let img = render_scene(&truth.scene).map_err(|e| e.to_string())?;
        let cfg = PipelineConfig {
            seed: i as u64,
            erase_all: false,
            ..PipelineConfig::default()
        };
        let (out, report) = run(&img, &truth.prompt, &cfg, &ports).map_err(|e| e.to_string())?;
        let mut touched = report.removal_boxes.clone();
        touched.extend(report.targets.iter().map(|t| t.bbox));
        ensure!(
            outside_identical(&img, &out, &Mask::from_boxes(img.width(), img.height(), &touched)),
            "{}: pixels changed outside edited boxes (erase_all off)",
            truth.id
        );
    }
    Ok(())
}

fn end_to_end_perfection() -> Check {
    let ports = Ports::mock(1.0, 5);
    let truths = corpus();
    let mut records = Vec::new();
    let mut residual = 0;
    for ((_, out, report), truth) in run_corpus(&ports, 11)?.into_iter().zip(&truths) {
        residual += report.residual_errors.len();
        let targets = WordSet::new(truth.targets.clone()).unwrap();
        records.push(
            evaluate_image(&truth.id, &out, &targets, &glyphfix::backends::MockDetector, &MockRecognizer, false)
                .map_err(|e| e.to_string())?,
        );
    }
    let acc = macro_accuracy(&records);
    ensure!(acc == 1.0, "corpus OCR accuracy {acc}");
    ensure!(residual == 0, "{residual} residual errors");
    Ok(format!("{} scenes: OCR accuracy {acc}, residual errors 0", records.len()))
}

struct Boxes(Vec<BBox>);

impl TextDetector for Boxes {
    fn detect(&self, _: &RasterImage) -> BackendResult<Vec<Polygon>> {
        Ok(self.0.iter().map(|&b| Polygon::from_bbox(b)).collect())
    }
}

struct Reads;

impl TextRecognizer for Reads {
    fn recognize(&self, _: &RasterImage, regions: &[Polygon]) -> BackendResult<Vec<String>> {
        Ok(regions.iter().map(|_| "WORD".to_owned()).collect())
    }
}

fn filter_threshold() -> Check {
    let theta = 0.04;
    let heights: Vec<u32> = (1..=10).collect();
    let regions: Vec<Polygon> = heights.iter().map(|&h| Polygon::from_bbox(BBox::new(0, 0, 20, h))).collect();
    let (kept, removed) = filter_small_regions(regions, theta, 100);
    let height = |p: &Polygon| polygon_to_bbox(p).bbox.height;
    let removed_h: Vec<u32> = removed.iter().map(height).collect();
    let kept_h: Vec<u32> = kept.iter().map(height).collect();
    ensure!(removed_h == [1, 2, 3], "removed heights {removed_h:?}");
    ensure!(kept_h == (4..=10).collect::<Vec<_>>(), "kept heights {kept_h:?}");

    // Through detection on a constructed 100-pixel-high scene.
    let img = RasterImage::filled(120, 100, [255, 255, 255]).unwrap();
    let det = Boxes(vec![BBox::new(10, 10, 30, 3), BBox::new(10, 40, 30, 4)]);
    let cfg = PipelineConfig {
        theta,
        ..PipelineConfig::default()
    };
    let found = detect_words(&img, &det, &Reads, &cfg).map_err(|e| e.to_string())?;
    ensure!(found.boxes == [BBox::new(10, 40, 30, 4)], "kept boxes {:?}", found.boxes);
    ensure!(
        found.filtered.len() == 1
            && found.filtered[0].bbox == BBox::new(10, 10, 30, 3)
            && found.filtered[0].reason == FilterReason::TooSmall,
        "filtered {:?}",
        found.filtered
    );
    Ok("height 3 removed, height 4 kept at H = 100 (strict less-than)".into())
}

fn convergence() -> Check {
    let started = Instant::now();
    let cols = 20;
    let k = 200;
    let mut scene = SyntheticScene::new(cols * 30 + 4, (k / cols) * 12 + 4, [250, 250, 245], [20, 20, 20]);
    for i in 0..k {
        scene.placements.push(Placement::at("SALF", 4 + (i % cols) * 30, 4 + (i / cols) * 12, 1));
    }
    let img = render_scene(&scene).map_err(|e| e.to_string())?;
    let targets: Vec<(BBox, String)> = scene.placements.iter().map(|p| (p.bbox, "SALE".to_owned())).collect();
    let cfg = PipelineConfig {
        t_max: 10,
        seed: 42,
        ..PipelineConfig::default()
    };
    let c = typo_correct(&img, &targets, &FlakyEditor::new(0.4, 2024), &MockRecognizer, &cfg)
        .map_err(|e| e.to_string())?;
    let counts: Vec<usize> = c.history.iter().map(Vec::len).collect();
    ensure!(counts[0] == 200, "initial outstanding {}", counts[0]);
    ensure!(counts.windows(2).all(|w| w[1] <= w[0]), "outstanding increased: {counts:?}");
    let report = RunReport {
        history: c.history.clone(),
        ..RunReport::default()
    };
    let curve = convergence_curve(&[report]);
    let at4 = curve.mean_fraction[4.min(curve.mean_fraction.len() - 1)];
    ensure!(at4 >= 0.8, "fraction at iteration 4 is {at4:.3} ({counts:?})");
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!("fraction at iteration 4 = {at4:.3}, outstanding {counts:?}"))
}

fn layout_robustness() -> Check {
    let img = RasterImage::filled(256, 256, [250, 250, 245]).unwrap();
    let existing = vec![(BBox::new(20, 96, 120, 24), "SALE".to_owned())];
    let (mut planned, mut fallback, mut errors) = (0, 0, 0);
    for seed in 0..100u64 {
        let retries = (seed % 6) as u32;
        let missing: Vec<String> = (0..=(seed % 4)).map(|i| format!("W{i}")).collect();
        match plan_missing(&img, &existing, &missing, &ByzantinePlanner::new(seed), retries) {
            Ok(plan) => {
                ensure!(plan.planner_calls <= retries + 1, "seed {seed}: {} calls", plan.planner_calls);
                let words: Vec<&String> = plan.elements.iter().map(|e| &e.word).collect();
                ensure!(words == missing.iter().collect::<Vec<_>>(), "seed {seed}: words {words:?}");
                for e in &plan.elements {
                    e.validate().map_err(|m| format!("seed {seed}: {m}"))?;
                }
                match plan.source {
                    LayoutSource::Fallback => fallback += 1,
                    _ => planned += 1,
                }
            }
            Err(PlanningError::Overflow { planner_calls, .. }) => {
                ensure!(planner_calls == retries + 1, "seed {seed}: overflow after {planner_calls} calls");
                errors += 1;
            }
            Err(e) => return Err(format!("seed {seed}: {e}")),
        }
    }
    Ok(format!("100 cases: {planned} planner layouts, {fallback} fallbacks, {errors} planning errors"))
}

fn determinism_and_transparency() -> Check {
    let server = glyphfix_remote::serve(Ports::mock(0.5, 77), SocketAddr::from((Ipv4Addr::LOCALHOST, 0)))
        .map_err(|e| e.to_string())?;
    let remote = glyphfix_remote::remote_ports(&BackendEndpoint {
        target: EndpointTarget::Remote(server.url()),
        timeout_secs: 30.0,
        retries: 0,
    })
    .map_err(|e| e.to_string())?;
    let local = run_corpus(&Ports::mock(0.5, 77), 9)?;
    let again = run_corpus(&Ports::mock(0.5, 77), 9)?;
    let wire = run_corpus(&remote, 9)?;
    for (i, ((a, b), c)) in local.iter().zip(&again).zip(&wire).enumerate() {
        ensure!(a.1 == b.1 && a.2.without_timings() == b.2.without_timings(), "scene {i}: in-process rerun differs");
        ensure!(a.1.pixels() == c.1.pixels(), "scene {i}: wire image differs");
        ensure!(a.2.without_timings() == c.2.without_timings(), "scene {i}: wire report differs");
    }
    Ok(format!("{} scenes bit-identical in-process, rerun and over the wire", local.len()))
}

fn statistics_schema() -> Check {
    // Constructed reports.
    let mk = |c: [usize; 5]| RunReport {
        detected_words: c[0],
        surplus_words: c[1],
        lack_words: c[2],
        typo_words: c[3],
        typo_corrected_words: c[4],
        ..RunReport::default()
    };
    let s = corpus_stats(&[mk([1, 1, 0, 1, 1]), mk([2, 0, 1, 0, 0])]);
    ensure!(
        [s.detected_words, s.surplus_words, s.lack_words, s.typo_words, s.typo_corrected_words] == [3, 1, 1, 1, 1],
        "constructed sums {s:?}"
    );
    let keys = serde_json::to_value(s).map_err(|e| e.to_string())?;
    for col in ["detected_words", "surplus_words", "lack_words", "typo_words", "typo_corrected_words"] {
        ensure!(keys.get(col).is_some(), "stats JSON lacks {col}");
    }

    // Pipeline reports on the constructed corpus versus its ground truth.
    let truths = corpus();
    let reports: Vec<RunReport> = run_corpus(&Ports::mock(1.0, 1), 0)?.into_iter().map(|r| r.2).collect();
    let got = corpus_stats(&reports);
    let want = truths.iter().fold(CorpusStats::default(), |acc, t| CorpusStats {
        images: acc.images + 1,
        prompt_word_total: acc.prompt_word_total + t.targets.len(),
        detected_words: acc.detected_words + t.expected.detected_words,
        surplus_words: acc.surplus_words + t.expected.surplus_words,
        lack_words: acc.lack_words + t.expected.lack_words,
        typo_words: acc.typo_words + t.expected.typo_words,
        typo_corrected_words: acc.typo_corrected_words + t.expected.typo_corrected_words,
    });
    ensure!(got == want, "stats {got:?} != ground truth {want:?}");
    Ok(format!(
        "{} scenes: detected {} surplus {} lack {} typo {} corrected {} of {} prompt words",
        got.images,
        got.detected_words,
        got.surplus_words,
        got.lack_words,
        got.typo_words,
        got.typo_corrected_words,
        got.prompt_word_total
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("assignment optimality", assignment_optimality),
        ("taxonomy cardinality", taxonomy_cardinality),
        ("levenshtein oracle", levenshtein_oracle),
        ("pixel conservatism", pixel_conservatism),
        ("end-to-end perfection", end_to_end_perfection),
        ("filter threshold", filter_threshold),
        ("correction convergence", convergence),
        ("layout robustness", layout_robustness),
        ("determinism and protocol transparency", determinism_and_transparency),
        ("statistics schema", statistics_schema),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
