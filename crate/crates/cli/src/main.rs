//! Batch driver: train, score, distort, evaluate, gradcheck.
//!
//! stdout carries machine-parseable CSV only; everything diagnostic goes to
//! stderr. Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use priorvq::config;
use priorvq::distort::{apply_distortion, DistortionKind, DistortionSpec};
use priorvq::error::Error;
use priorvq::eval::{evaluate_manifest, evaluate_with_scorer, Manifest};
use priorvq::gradcheck::{run_suite, GRADCHECK_TOLERANCE};
use priorvq::net::{NetworkConfig, NetworkWeights};
use priorvq::score::{report_line, score_video};
use priorvq::train::{train_pair, TrainConfig};
use priorvq::video::{infer_format, read_sequence, write_sequence, ChannelMode};
use priorvq::Result;

#[derive(Parser)]
#[command(name = "priorvq", version, about = "Blind video quality scoring from a single-pair restoration prior")]
struct Cli {
    /// Thread budget. 1 is the reproducible mode; the kernels never spawn
    /// beyond it (higher values are accepted and currently unused).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the restorer on one original/distorted pair and save its weights.
    Train {
        /// Pristine video (PNG directory or .y4m file).
        #[arg(long)]
        original: PathBuf,
        /// Distorted copy of the same video.
        #[arg(long)]
        distorted: PathBuf,
        /// Output weights file; the loss trace lands next to it as
        /// `<out>.loss.csv`.
        #[arg(long)]
        out: PathBuf,
        /// Override the epoch count from the config (default 10).
        #[arg(long)]
        epochs: Option<usize>,
        /// Override the training seed from the config (default 0).
        #[arg(long)]
        seed: Option<u64>,
        /// Flat `key = value` file mirroring the network/training fields.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Score a video with trained weights; prints one report line.
    Score {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        video: PathBuf,
    },
    /// Apply a synthetic distortion to a video.
    Distort {
        /// Input video, read as luma (PNG directory or .y4m file).
        #[arg(long = "in")]
        input: PathBuf,
        /// Output video; its format follows the path (directory or .y4m).
        #[arg(long)]
        out: PathBuf,
        /// awgn, gaussian_blur, or block_quantize.
        #[arg(long, value_parser = parse_kind)]
        kind: DistortionKind,
        /// Distortion strength; 0 copies the input bit for bit.
        #[arg(long)]
        severity: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train on the manifest's pair, score its test videos, and correlate
    /// the scores with the MOS labels.
    Evaluate {
        /// CSV manifest `video_id,path,mos,role[,pair_path]`.
        #[arg(long)]
        manifest: PathBuf,
        /// Flat `key = value` file mirroring the network/training fields.
        #[arg(long)]
        config: PathBuf,
        /// Self-test: report each test entry's own MOS as its prediction,
        /// skipping training entirely. Must yield perfect correlations.
        #[arg(long, hide = true)]
        echo_mos: bool,
    },
    /// Verify analytic gradients against central differences.
    Gradcheck,
}

fn parse_kind(s: &str) -> std::result::Result<DistortionKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Reads the combined flat config, or falls back to defaults. Both sections
/// share one file; unknown keys are rejected.
fn load_configs(path: Option<&Path>) -> Result<(NetworkConfig, TrainConfig)> {
    let (net_cfg, train_cfg) = match path {
        None => (NetworkConfig::default(), TrainConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            let mut map = config::parse_kv(&text)?;
            let net = NetworkConfig::from_kv_map(&mut map)?;
            let train = TrainConfig::from_kv_map(&mut map)?;
            config::reject_unknown(&map, "config file")?;
            (net, train)
        }
    };
    net_cfg.validate()?;
    train_cfg.validate()?;
    Ok((net_cfg, train_cfg))
}

fn video_id_for(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn cmd_train(
    original: &Path,
    distorted: &Path,
    out: &Path,
    epochs: Option<usize>,
    seed: Option<u64>,
    config: Option<&Path>,
) -> Result<()> {
    let (net_cfg, mut train_cfg) = load_configs(config)?;
    if let Some(epochs) = epochs {
        train_cfg.epochs = epochs;
    }
    if let Some(seed) = seed {
        train_cfg.seed = seed;
    }
    train_cfg.validate()?;

    let mode = ChannelMode::for_channel_count(net_cfg.in_channels)?;
    let original = read_sequence(original, infer_format(original)?, mode)?;
    let distorted = read_sequence(distorted, infer_format(distorted)?, mode)?;
    let (weights, trace) = train_pair(&original, &distorted, &net_cfg, &train_cfg)?;
    weights.save(out)?;
    let trace_path = PathBuf::from(format!("{}.loss.csv", out.display()));
    trace.write_csv(&trace_path)?;

    let final_mean = trace
        .last_epoch()
        .and_then(|e| trace.epoch_mean(e))
        .ok_or_else(|| Error::State("training produced an empty loss trace".into()))?;
    println!("final_epoch_mean_loss,{final_mean:?}");
    eprintln!("wrote {} and {}", out.display(), trace_path.display());
    Ok(())
}

fn cmd_score(weights: &Path, video: &Path) -> Result<()> {
    let weights = NetworkWeights::load(weights)?;
    let mode = ChannelMode::for_channel_count(weights.config().in_channels)?;
    let sequence = read_sequence(video, infer_format(video)?, mode)?;
    let quality = score_video(&weights, &sequence)?;
    println!("{}", report_line(&video_id_for(video), &quality));
    Ok(())
}

fn cmd_distort(input: &Path, out: &Path, spec: &DistortionSpec) -> Result<()> {
    spec.validate()?;
    let out_format = infer_format(out)?;
    let sequence = read_sequence(input, infer_format(input)?, ChannelMode::Luma)?;
    let distorted = apply_distortion(&sequence, spec)?;
    write_sequence(&distorted, out, out_format)?;
    eprintln!("wrote {} frames to {}", distorted.frame_count(), out.display());
    Ok(())
}

fn cmd_evaluate(manifest: &Path, config: &Path, echo_mos: bool) -> Result<()> {
    let (net_cfg, train_cfg) = load_configs(Some(config))?;
    let manifest = Manifest::load(manifest)?;
    let report = if echo_mos {
        evaluate_with_scorer(&manifest, |entry| {
            Ok(entry.mos.expect("test rows always carry MOS"))
        })?
    } else {
        evaluate_manifest(&manifest, &net_cfg, &train_cfg)?
    };
    println!("{}", report.summary_line());
    print!("{}", report.to_csv_table());
    Ok(())
}

fn cmd_gradcheck() -> Result<()> {
    let report = run_suite()?;
    print!("{}", report.to_table());
    if !report.passed() {
        return Err(Error::Contract(format!(
            "worst relative error {:e} exceeds the {GRADCHECK_TOLERANCE:e} tolerance",
            report.worst()
        )));
    }
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Train { original, distorted, out, epochs, seed, config } => {
            cmd_train(&original, &distorted, &out, epochs, seed, config.as_deref())
        }
        Command::Score { weights, video } => cmd_score(&weights, &video),
        Command::Distort { input, out, kind, severity, seed } => {
            cmd_distort(&input, &out, &DistortionSpec { kind, severity, seed })
        }
        Command::Evaluate { manifest, config, echo_mos } => {
            cmd_evaluate(&manifest, &config, echo_mos)
        }
        Command::Gradcheck => cmd_gradcheck(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(2);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
