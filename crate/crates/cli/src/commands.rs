use std::collections::BTreeSet;
use std::fs;
use std::io::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use glyphfix::backends::corpus::{generate, CorpusConfig};
use glyphfix::backends::{
    mix_seed, render_scene, seed_for_id, ByzantinePlanner, LayoutPlanner, Ports,
};
use glyphfix::evalharness::{
    convergence_curve, corpus_stats, evaluate_image, macro_accuracy, micro_accuracy, CorpusStats, EvalRecord,
};
use glyphfix::imaging::RasterImage;
use glyphfix::pipeline::{self, PipelineConfig, RunReport};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::Config;

pub const STAGE_FAILED: u8 = 2;
pub const BAD_INPUT: u8 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

type Outcome = Result<(), Failure>;

fn bad_input(error: anyhow::Error) -> Failure {
    Failure { code: BAD_INPUT, error }
}

pub fn config_step(config: anyhow::Result<Config>) -> Result<Config, Failure> {
    config.map_err(bad_input)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(bad_input)?;
    // create_dir_all succeeds on existing read-only directories.
    let probe = dir.join(".glyphfix-write-probe");
    fs::write(&probe, b"")
        .with_context(|| format!("{} is not writable", dir.display()))
        .map_err(bad_input)?;
    let _ = fs::remove_file(probe);
    Ok(())
}

/// `out.png` → `out.report.json`.
pub fn report_path(out: &Path) -> PathBuf {
    out.with_extension("report.json")
}

fn load_image(path: &Path) -> anyhow::Result<RasterImage> {
    RasterImage::load_png(path).with_context(|| format!("reading {}", path.display()))
}

/// Run the pipeline, mapping a stage error to a message that names it.
fn repair(image: &RasterImage, prompt: &str, config: &PipelineConfig, ports: &Ports) -> anyhow::Result<(RasterImage, RunReport)> {
    pipeline::run(image, prompt, config, ports).map_err(|e| anyhow!("{} stage failed: {}", e.stage, e.source))
}

pub fn run(image: &Path, prompt: &str, out: &Path, config: &Config) -> Outcome {
    let input = load_image(image).map_err(bad_input)?;
    let ports = config.ports().map_err(bad_input)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    let (output, report) = repair(&input, prompt, &config.pipeline, &ports).map_err(|error| Failure {
        code: STAGE_FAILED,
        error,
    })?;
    output
        .save_png(out)
        .with_context(|| format!("writing {}", out.display()))
        .map_err(bad_input)?;
    write_json(&report_path(out), &report).map_err(bad_input)?;
    eprintln!(
        "{}: {} prompt words, OCR* {:.3}, residual {:?}",
        out.display(),
        report.prompt_words,
        report.ocr_star,
        report.residual_errors
    );
    Ok(())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestRow {
    image: PathBuf,
    prompt: String,
    #[serde(default)]
    id: Option<String>,
}

#[derive(Debug, Clone)]
struct Job {
    id: String,
    image: PathBuf,
    prompt: String,
}

fn read_manifest(path: &Path) -> anyhow::Result<Vec<Job>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut jobs = Vec::new();
    let mut ids = BTreeSet::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: ManifestRow =
            serde_json::from_str(line).with_context(|| format!("{}:{}", path.display(), n + 1))?;
        if row.prompt.trim().is_empty() {
            bail!("{}:{}: empty prompt", path.display(), n + 1);
        }
        let image = base.join(&row.image);
        if !image.is_file() {
            bail!("{}:{}: no image at {}", path.display(), n + 1, image.display());
        }
        let id = match row.id {
            Some(id) => id,
            None => row
                .image
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .ok_or_else(|| anyhow!("{}:{}: cannot derive an id", path.display(), n + 1))?,
        };
        if !ids.insert(id.clone()) {
            bail!("{}:{}: duplicate id {id:?}", path.display(), n + 1);
        }
        jobs.push(Job {
            id,
            image,
            prompt: row.prompt,
        });
    }
    Ok(jobs)
}

/// One line of `batch.jsonl`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchRow {
    pub id: String,
    pub image: PathBuf,
    pub prompt: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<RunReport>,
}

fn batch_one(job: &Job, out: &Path, config: &Config, ports: &Ports) -> BatchRow {
    // Seeds depend on the id only, so results don't depend on worker count.
    let seed = mix_seed(config.pipeline.seed, seed_for_id(&job.id));
    let mut row = BatchRow {
        id: job.id.clone(),
        image: job.image.clone(),
        prompt: job.prompt.clone(),
        seed,
        output: None,
        error: None,
        report: None,
    };
    let result = (|| {
        let image = load_image(&job.image)?;
        let cfg = PipelineConfig {
            seed,
            ..config.pipeline.clone()
        };
        let (output, report) = repair(&image, &job.prompt, &cfg, ports)?;
        let path = out.join(format!("{}.png", job.id));
        output.save_png(&path).with_context(|| format!("writing {}", path.display()))?;
        write_json(&report_path(&path), &report)?;
        anyhow::Ok((path, report))
    })();
    match result {
        Ok((path, report)) => {
            row.output = Some(path);
            row.report = Some(report);
        }
        Err(e) => row.error = Some(format!("{e:#}")),
    }
    row
}

pub fn batch(manifest: &Path, out: &Path, workers: Option<usize>, config: &Config) -> Outcome {
    let jobs = read_manifest(manifest).map_err(bad_input)?;
    let ports = config.ports().map_err(bad_input)?;
    ensure_dir(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| bad_input(e.into()))?;
    let rows: Vec<BatchRow> = pool.install(|| jobs.par_iter().map(|j| batch_one(j, out, config, &ports)).collect());

    let mut lines = String::new();
    for row in &rows {
        lines.push_str(&serde_json::to_string(row).expect("rows serialize"));
        lines.push('\n');
    }
    let path = out.join("batch.jsonl");
    fs::write(&path, lines)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(bad_input)?;

    let failed: Vec<&BatchRow> = rows.iter().filter(|r| r.error.is_some()).collect();
    for r in &failed {
        eprintln!("{}: {}", r.id, r.error.as_deref().unwrap_or_default());
    }
    eprintln!("{} of {} images repaired", rows.len() - failed.len(), rows.len());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: STAGE_FAILED,
            error: anyhow!("{} of {} rows failed", failed.len(), rows.len()),
        })
    }
}

pub fn mock_scene(config: &CorpusConfig, out: &Path) -> Outcome {
    config.validate().map_err(|e| bad_input(anyhow!(e)))?;
    ensure_dir(out)?;
    let corpus = generate(config);
    let mut manifest = String::new();
    let mut expected = CorpusStats::default();
    for truth in &corpus {
        let png = format!("{}.png", truth.id);
        render_scene(&truth.scene)
            .map_err(anyhow::Error::from)
            .and_then(|img| Ok(img.save_png(out.join(&png))?))
            .with_context(|| format!("writing {png}"))
            .map_err(bad_input)?;
        write_json(&out.join(format!("{}.truth.json", truth.id)), truth).map_err(bad_input)?;
        manifest.push_str(&json!({ "id": truth.id, "image": png, "prompt": truth.prompt }).to_string());
        manifest.push('\n');

        let e = truth.expected;
        expected.images += 1;
        expected.prompt_word_total += truth.targets.len();
        expected.detected_words += e.detected_words;
        expected.surplus_words += e.surplus_words;
        expected.lack_words += e.lack_words;
        expected.typo_words += e.typo_words;
        expected.typo_corrected_words += e.typo_corrected_words;
    }
    fs::write(out.join("manifest.jsonl"), manifest)
        .context("writing manifest.jsonl")
        .map_err(bad_input)?;
    write_json(&out.join("expected_stats.json"), &expected).map_err(bad_input)?;
    eprintln!("wrote {} scenes to {}", corpus.len(), out.display());
    Ok(())
}

struct Scored {
    id: String,
    report: RunReport,
    image: Option<PathBuf>,
}

fn collect_reports(input: &Path) -> anyhow::Result<Vec<Scored>> {
    let mut found = Vec::new();
    if input.is_dir() {
        let mut paths: Vec<PathBuf> = fs::read_dir(input)
            .with_context(|| format!("reading {}", input.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.to_string_lossy().ends_with(".report.json"))
            .collect();
        paths.sort();
        for path in paths {
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let report: RunReport =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            let name = path.file_name().unwrap().to_string_lossy();
            let id = name.trim_end_matches(".report.json").to_owned();
            let png = input.join(format!("{id}.png"));
            found.push(Scored {
                id,
                report,
                image: png.is_file().then_some(png),
            });
        }
    } else {
        let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let row: BatchRow =
                serde_json::from_str(line).with_context(|| format!("{}:{}", input.display(), n + 1))?;
            if let Some(report) = row.report {
                found.push(Scored {
                    id: row.id,
                    report,
                    image: row.output,
                });
            }
        }
    }
    Ok(found)
}

pub fn eval(input: &Path, out: Option<&Path>, config: &Config) -> Outcome {
    config.validate().map_err(bad_input)?;
    let scored = collect_reports(input).map_err(bad_input)?;
    if scored.is_empty() {
        return Err(bad_input(anyhow!("no run reports found in {}", input.display())));
    }
    let ports = config.eval_ports().map_err(bad_input)?;
    let out = match out {
        Some(o) => o.to_path_buf(),
        None if input.is_dir() => input.to_path_buf(),
        None => input.parent().unwrap_or(Path::new(".")).to_path_buf(),
    };
    ensure_dir(&out)?;

    let ci = config.pipeline.case_insensitive;
    let records: Vec<EvalRecord> = scored
        .par_iter()
        .filter_map(|s| {
            let (Some(path), Some(prompt)) = (&s.image, &s.report.prompt) else {
                return None;
            };
            Some(
                load_image(path)
                    .and_then(|img| {
                        Ok(evaluate_image(&s.id, &img, &prompt.targets, &*ports.detector, &*ports.recognizer, ci)?)
                    })
                    .with_context(|| format!("evaluating {}", s.id)),
            )
        })
        .collect::<anyhow::Result<_>>()
        .map_err(|error| Failure {
            code: STAGE_FAILED,
            error,
        })?;

    let reports: Vec<RunReport> = scored.into_iter().map(|s| s.report).collect();
    let stats = corpus_stats(&reports);
    let curve = convergence_curve(&reports);
    let ocr_star = reports.iter().map(|r| r.ocr_star).sum::<f64>() / reports.len() as f64;
    let summary = json!({
        "reports": reports.len(),
        "stats": stats,
        "ocr_accuracy": {
            "average": "macro",
            "macro": macro_accuracy(&records),
            "micro": micro_accuracy(&records),
            "evaluated_images": records.len(),
        },
        "ocr_star_mean": ocr_star,
        "residual_errors": reports.iter().map(|r| r.residual_errors.len()).sum::<usize>(),
        "curve_skipped": curve.skipped,
        "records": records,
    });
    write_json(&out.join("stats.json"), &summary).map_err(bad_input)?;
    fs::write(out.join("curve.csv"), curve.to_csv())
        .context("writing curve.csv")
        .map_err(bad_input)?;
    if curve.skipped > 0 {
        eprintln!("warning: {} reports had no correction history", curve.skipped);
    }
    eprintln!(
        "{} reports, OCR accuracy {:.4} (macro) / {:.4} (micro)",
        reports.len(),
        macro_accuracy(&records),
        micro_accuracy(&records)
    );
    Ok(())
}

pub fn serve_mock(addr: SocketAddr, editor_success: f64, editor_seed: u64, planner: &str, planner_seed: u64) -> Outcome {
    if !(0.0..=1.0).contains(&editor_success) {
        return Err(bad_input(anyhow!("editor success must lie in [0, 1]")));
    }
    let mut ports = Ports::mock(editor_success, editor_seed);
    ports.planner = match planner {
        "band" => ports.planner,
        "byzantine" => Arc::new(ByzantinePlanner::new(planner_seed)) as Arc<dyn LayoutPlanner>,
        other => return Err(bad_input(anyhow!("unknown planner {other:?} (band or byzantine)"))),
    };
    let handle = glyphfix_remote::serve(ports, addr)
        .with_context(|| format!("binding {addr}"))
        .map_err(bad_input)?;
    println!("{}", handle.url());
    let _ = std::io::stdout().flush();
    handle.wait().context("server stopped").map_err(|error| Failure {
        code: STAGE_FAILED,
        error,
    })
}
