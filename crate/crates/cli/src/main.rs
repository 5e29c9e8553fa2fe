//! `glyphfix`: repair rendered text in generated images.
//!
//! Exit codes: 0 success, 2 a pipeline stage (or batch row) failed,
//! 3 configuration or input error.

mod commands;
mod config;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use glyphfix::backends::EndpointTarget;

use crate::config::{Config, EndpointSpec};

#[derive(Debug, Parser)]
#[command(name = "glyphfix", version, about = "Detect, erase, re-plan and re-render misspelled text in images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Repair a single image.
    Run {
        image: PathBuf,
        /// Prompt with the target words in quotes.
        #[arg(long)]
        prompt: String,
        /// Output PNG; the report goes next to it as <stem>.report.json.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        opts: PipelineOpts,
    },
    /// Repair every row of a JSON-Lines manifest of {"image", "prompt"}.
    Batch {
        manifest: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Images processed in parallel (default: available cores).
        #[arg(long)]
        workers: Option<usize>,
        #[command(flatten)]
        opts: PipelineOpts,
    },
    /// Write a seeded synthetic corpus with ground truth and a manifest.
    MockScene {
        #[arg(long, default_value_t = 50)]
        count: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        surplus_rate: f64,
        #[arg(long, default_value_t = 0.3)]
        missing_rate: f64,
        #[arg(long, default_value_t = 0.5)]
        typo_rate: f64,
        /// Probability of an extra word below the height threshold.
        #[arg(long, default_value_t = 0.0)]
        tiny_rate: f64,
    },
    /// Score run reports: word statistics, OCR accuracy and convergence.
    Eval {
        /// Directory of *.report.json files (and their PNGs), or a JSON-Lines
        /// file of batch rows.
        input: PathBuf,
        /// Output directory for stats.json and curve.csv (default: input dir).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Serve the mock backends over the wire protocol.
    ServeMock {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long, default_value_t = 1.0)]
        editor_success: f64,
        #[arg(long, default_value_t = 0)]
        editor_seed: u64,
        /// `band` or `byzantine`.
        #[arg(long, default_value = "band")]
        planner: String,
        #[arg(long, default_value_t = 0)]
        planner_seed: u64,
    },
}

#[derive(Debug, Args)]
struct PipelineOpts {
    /// TOML config with [pipeline], [mock], [endpoints] and [eval] tables.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long = "t-max")]
    t_max: Option<u32>,
    #[arg(long = "erase-all", overrides_with = "no_erase_all")]
    erase_all: bool,
    #[arg(long = "no-erase-all", overrides_with = "erase_all")]
    no_erase_all: bool,
    /// Mock editor success probability.
    #[arg(long)]
    editor_success: Option<f64>,
    #[arg(long = "endpoint.detect", value_name = "URL|mock")]
    detect: Option<EndpointTarget>,
    #[arg(long = "endpoint.recognize", value_name = "URL|mock")]
    recognize: Option<EndpointTarget>,
    #[arg(long = "endpoint.erase", value_name = "URL|mock")]
    erase: Option<EndpointTarget>,
    #[arg(long = "endpoint.plan_layout", value_name = "URL|mock")]
    plan_layout: Option<EndpointTarget>,
    #[arg(long = "endpoint.edit_text", value_name = "URL|mock")]
    edit_text: Option<EndpointTarget>,
    #[arg(long = "endpoint.augment", value_name = "URL|mock")]
    augment: Option<EndpointTarget>,
}

impl PipelineOpts {
    fn resolve(&self) -> anyhow::Result<Config> {
        let mut config = Config::load(self.config.as_deref())?;
        let p = &mut config.pipeline;
        if let Some(s) = self.seed {
            p.seed = s;
        }
        if let Some(t) = self.theta {
            p.theta = t;
        }
        if let Some(t) = self.t_max {
            p.t_max = t;
        }
        if self.erase_all {
            p.erase_all = true;
        }
        if self.no_erase_all {
            p.erase_all = false;
        }
        if let Some(s) = self.editor_success {
            config.mock.editor_success = s;
        }
        for (port, target) in [
            ("detect", &self.detect),
            ("recognize", &self.recognize),
            ("erase", &self.erase),
            ("plan_layout", &self.plan_layout),
            ("edit_text", &self.edit_text),
            ("augment", &self.augment),
        ] {
            if let Some(target) = target {
                // Keep timeout/retries from the file; only the target changes.
                let mut endpoint = config
                    .endpoints
                    .get(port)
                    .map(EndpointSpec::endpoint)
                    .unwrap_or_else(glyphfix::backends::BackendEndpoint::mock);
                endpoint.target = target.clone();
                config.endpoints.insert(port.to_owned(), EndpointSpec::Full(endpoint));
            }
        }
        config.validate()?;
        Ok(config)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { image, prompt, out, opts } => {
            commands::config_step(opts.resolve()).and_then(|c| commands::run(&image, &prompt, &out, &c))
        }
        Command::Batch { manifest, out, workers, opts } => {
            commands::config_step(opts.resolve()).and_then(|c| commands::batch(&manifest, &out, workers, &c))
        }
        Command::MockScene {
            count,
            seed,
            out,
            surplus_rate,
            missing_rate,
            typo_rate,
            tiny_rate,
        } => commands::mock_scene(
            &glyphfix::backends::corpus::CorpusConfig {
                count,
                seed,
                surplus_rate,
                missing_rate,
                typo_rate,
                tiny_rate,
            },
            &out,
        ),
        Command::Eval { input, out, config } => commands::config_step(Config::load(config.as_deref()))
            .and_then(|c| commands::eval(&input, out.as_deref(), &c)),
        Command::ServeMock {
            addr,
            editor_success,
            editor_seed,
            planner,
            planner_seed,
        } => commands::serve_mock(addr, editor_success, editor_seed, &planner, planner_seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("glyphfix: {:#}", e.error);
            ExitCode::from(e.code)
        }
    }
}
