use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use activenet::forest::{Hyperparams, LogisticParams};
use activenet::level::Level;
use activenet::pipeline::commands::{EncodeFormat, ModelKind, SYNTH_NOTE};
use activenet::pipeline::config::ENV_LOG;
use activenet::pipeline::synth::SyntheticPoseParams;
use activenet::pipeline::{cmd_encode, cmd_evaluate, cmd_synth, cmd_train, run_stream, PipelineConfig, PipelineError, TrainOptions};

#[derive(Parser)]
#[command(name = "activenet", version, about = "Posture-level classification and inactivity alerts from 2D keypoints")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a classifier and write a model file.
    Train(TrainArgs),
    /// Turn keypoint frames into 15-angle encodings.
    Encode(EncodeArgs),
    /// Generate a labeled synthetic dataset.
    Synth(SynthArgs),
    /// Score a model on a labeled dataset.
    Evaluate(EvaluateArgs),
    /// Classify a live frame stream and raise alerts.
    Run(RunArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Labeled frames (NDJSON) or labeled encoding CSV.
    #[arg(long)]
    data: PathBuf,
    /// Output model file.
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, default_value = "forest", value_parser = ["forest", "tree", "logistic"])]
    kind: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    /// Skip the grid search and use the forest flags below.
    #[arg(long)]
    no_search: bool,
    #[arg(long, default_value_t = 100)]
    n_trees: usize,
    /// Omit for unlimited depth.
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long, default_value_t = 2)]
    min_samples_split: usize,
    #[arg(long, default_value_t = activenet::forest::default_max_features())]
    max_features: usize,
    /// Skip the baseline classifiers in the report.
    #[arg(long)]
    no_baselines: bool,
    /// Write the full report as JSON here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EncodeArgs {
    /// Frames file, or `-` for standard input.
    #[arg(long, default_value = "-")]
    input: PathBuf,
    /// Output file; standard output when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv", value_parser = ["csv", "ndjson"])]
    format: String,
}

#[derive(Args)]
struct SynthArgs {
    /// Frames per class.
    #[arg(long, short, default_value_t = 100)]
    n: usize,
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 0.05)]
    occlusion_prob: f64,
    /// Fix the slump angle in degrees instead of sampling per class.
    #[arg(long)]
    slump_angle: Option<f64>,
    #[arg(long)]
    arm_droop: Option<f64>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Write `true,predicted` rows here.
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Write the metrics as JSON here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    /// `stdin`, `tcp:<port>`, `tcp:<host>:<port>` or a file path.
    #[arg(long)]
    input: Option<String>,
    /// Per-frame records; standard output when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Write alerts to the output instead of posting them.
    #[arg(long)]
    dry_run: bool,
    /// Stop after the first TCP connection closes.
    #[arg(long)]
    tcp_once: bool,
    /// Consecutive lowest-level frames that trigger an alert.
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    cooldown_ms: Option<u64>,
    #[arg(long)]
    metrics_output: Option<PathBuf>,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, PipelineError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| PipelineError::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), PipelineError> {
    let text = serde_json::to_string_pretty(value).expect("report serializes") + "\n";
    std::fs::write(path, text).map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = match path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    cfg.apply_env(|k| std::env::var(k).ok());
    Ok(cfg)
}

fn init_logging(cfg: &PipelineConfig) {
    let level = cfg.log_level.clone().unwrap_or_else(|| "info".into());
    env_logger::Builder::new()
        .parse_filters(&level)
        .parse_env(ENV_LOG)
        .target(env_logger::Target::Stderr)
        .init();
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let mut cfg = load_config(cli.config.as_deref())?;
    init_logging(&cfg);
    match cli.command {
        Command::Synth(a) => {
            let params = SyntheticPoseParams {
                slump_angle: a.slump_angle,
                arm_droop: a.arm_droop,
                noise_sigma: a.noise_sigma,
                occlusion_prob: a.occlusion_prob,
                seed: a.seed,
            };
            let n = cmd_synth(&params, a.n, &mut output(a.out.as_deref())?)?;
            log::info!("wrote {n} labeled frames");
            eprintln!("{SYNTH_NOTE}");
        }
        Command::Encode(a) => {
            let format: EncodeFormat = a.format.parse()?;
            let summary = cmd_encode(&a.input, &mut output(a.out.as_deref())?, format)?;
            for e in &summary.errors {
                eprintln!("{}: {e}", a.input.display());
            }
            log::info!("encoded {} frames, {} malformed lines", summary.rows, summary.errors.len());
        }
        Command::Train(a) => {
            let kind: ModelKind = a.kind.parse()?;
            let opts = TrainOptions {
                kind,
                search: !a.no_search,
                forest_params: Hyperparams {
                    n_trees: a.n_trees,
                    max_depth: a.max_depth,
                    min_samples_split: a.min_samples_split,
                    max_features: a.max_features,
                    ..Hyperparams::default()
                },
                logistic_params: LogisticParams::default(),
                folds: a.folds,
                seed: a.seed,
                test_fraction: a.test_fraction,
                baselines: !a.no_baselines,
                ..TrainOptions::new(a.data, a.out.clone())
            };
            opts.forest_params.validate()?;
            let report = cmd_train(&opts)?;
            print!("{}", report.render());
            if let Some(p) = &a.report {
                write_json(p, &report)?;
            }
            log::info!("model written to {}", a.out.display());
        }
        Command::Evaluate(a) => {
            let metrics = cmd_evaluate(&a.model, &a.data, a.predictions.as_deref())?;
            print!("{}", metrics.render_table());
            if let Some(p) = &a.report {
                write_json(p, &metrics)?;
            }
        }
        Command::Run(a) => {
            if a.model.is_some() {
                cfg.model = a.model;
            }
            if a.input.is_some() {
                cfg.input = a.input;
            }
            if a.out.is_some() {
                cfg.output = a.out;
            }
            if a.metrics_output.is_some() {
                cfg.metrics_output = a.metrics_output;
            }
            if let Some(k) = a.k {
                cfg.alert.k = k;
            }
            if let Some(c) = a.cooldown_ms {
                cfg.alert.cooldown_ms = c;
            }
            cfg.dry_run |= a.dry_run;
            cfg.tcp_once |= a.tcp_once;
            if cfg.alert.lowest_class != Level::LOWEST {
                log::info!("alerting on {}", cfg.alert.lowest_class);
            }
            if let Some(url) = &cfg.alert.webhook_url {
                log::debug!("webhook configured: {url:?}");
            }
            let summary = run_stream(&cfg, true)?;
            eprintln!("{}", summary.render());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("activenet: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
