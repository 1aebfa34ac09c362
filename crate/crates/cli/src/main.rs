use std::fs;
use std::path::{Path, PathBuf};

use alignnet::distortion::{
    apply_warp, warp_to_correspondence, write_correspondence_csv, DistortionConfig,
};
use alignnet::frontend::{io, Layout};
use alignnet::model::{Ablation, AlignNet, AlignNetConfig};
use alignnet::pipeline::data::{load_dataset, write_synthetic_dataset, EvalCase};
use alignnet::pipeline::eval::{
    evaluate_dtw, evaluate_identity, evaluate_model_detailed, format_table, TableRow,
};
use alignnet::pipeline::export::{align_files, dtw_files, export_attention};
use alignnet::pipeline::synth::SynthConfig;
use alignnet::pipeline::train::{train, TrainConfig, BEST_DIR};
use alignnet::tensor::AdamConfig;
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(
    name = "alignnet",
    version,
    about = "Dense audio-visual temporal alignment"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset of paired keypoints and audio.
    SynthData(SynthDataArgs),
    /// Apply a random monotonic warp to a keypoint file.
    Distort(DistortArgs),
    /// Train a model with online distortion.
    Train(TrainArgs),
    /// Predict the correspondence of a keypoint file to an audio file.
    Align(PairArgs),
    /// Baseline alignment with dynamic time warping.
    Dtw(PairArgs),
    /// Score checkpoints and the baseline on a dataset's held-out clips.
    Eval(EvalArgs),
    /// Export keypoint and temporal attention of a checkpoint.
    ExportAttn(ExportArgs),
}

#[derive(Args)]
struct WarpArgs {
    #[arg(long, default_value_t = 2)]
    min_segments: usize,
    #[arg(long, default_value_t = 6)]
    max_segments: usize,
    #[arg(long, default_value_t = 0.5)]
    slope_min: f64,
    #[arg(long, default_value_t = 2.0)]
    slope_max: f64,
}

impl WarpArgs {
    fn config(&self) -> DistortionConfig {
        DistortionConfig {
            min_segments: self.min_segments,
            max_segments: self.max_segments,
            slope_min: self.slope_min,
            slope_max: self.slope_max,
        }
    }
}

#[derive(Args)]
struct SynthDataArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 500)]
    train: usize,
    #[arg(long, default_value_t = 100)]
    test: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4.0)]
    duration: f64,
    #[arg(long, default_value_t = 30.0)]
    fps: f64,
    #[arg(long, default_value_t = 0.5)]
    beat_period: f64,
    #[command(flatten)]
    warp: WarpArgs,
}

#[derive(Args)]
struct DistortArgs {
    #[arg(long)]
    keypoints: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth correspondence CSV.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Audio frames per video frame for the ground truth.
    #[arg(long, default_value_t = 3)]
    audio_per_video: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    warp: WarpArgs,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset directory written by `synth-data`.
    #[arg(long)]
    data: PathBuf,
    /// Run directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 4)]
    batch_size: usize,
    #[arg(long, default_value_t = 3e-4)]
    lr: f64,
    #[arg(long, default_value_t = 0.9)]
    beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    beta2: f64,
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,
    #[arg(long, default_value_t = 1.0)]
    final_lr_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Enabled modules, e.g. `FP,MI,SA,KA,TA` or `Base`.
    #[arg(long, default_value = "FP,MI,SA,KA,TA")]
    ablation: Ablation,
    #[arg(long)]
    no_flip: bool,
    /// Held-out clips used for model selection (taken from the test split).
    #[arg(long, default_value_t = 32)]
    val: usize,
    #[arg(long, default_value = "pose19")]
    layout: String,
}

#[derive(Args)]
struct PairArgs {
    #[arg(long)]
    keypoints: PathBuf,
    #[arg(long)]
    audio: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Checkpoint directory (ignored by `dtw`).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Repair and smooth the keypoints before aligning.
    #[arg(long)]
    clean: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint or run directory; repeat for ablation rows.
    #[arg(long = "checkpoint")]
    checkpoints: Vec<PathBuf>,
    /// Directory for per-clip reports.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    audio: Option<PathBuf>,
    #[arg(long, default_value_t = 30.0)]
    fps: f64,
    /// JSON output; the temporal part is also written next to it as CSV.
    #[arg(long)]
    out: PathBuf,
}

/// Accepts a run directory as well as a checkpoint directory.
fn load_model(path: &Path) -> Result<AlignNet> {
    let dir = if path.join(BEST_DIR).is_dir() {
        path.join(BEST_DIR)
    } else {
        path.to_path_buf()
    };
    AlignNet::load(&dir).with_context(|| format!("loading checkpoint {}", dir.display()))
}

fn synth_data(a: SynthDataArgs) -> Result<()> {
    let synth = SynthConfig {
        duration_s: a.duration,
        fps: a.fps,
        beat_period_s: a.beat_period,
        ..SynthConfig::default()
    };
    let m = write_synthetic_dataset(&a.out, &synth, &a.warp.config(), a.train, a.test, a.seed)?;
    println!(
        "wrote {} training and {} held-out clips to {}",
        m.train.len(),
        m.test.len(),
        a.out.display()
    );
    Ok(())
}

fn distort(a: DistortArgs) -> Result<()> {
    let kps = io::read_keypoints(&a.keypoints)?;
    let w = a
        .warp
        .config()
        .sample(&mut ChaCha8Rng::seed_from_u64(a.seed))?;
    let n = kps.num_frames();
    io::write_keypoints(&a.out, &apply_warp(&kps, &w, n)?)?;
    if let Some(gt) = &a.gt {
        let m = a.audio_per_video * (n - 1) + 1;
        write_correspondence_csv(gt, &warp_to_correspondence(&w, n, m).values)?;
    }
    println!("{}", w.to_json()?);
    Ok(())
}

fn run_train(a: TrainArgs) -> Result<()> {
    let (clips, test) = load_dataset(&a.data)?;
    let val: Vec<EvalCase> = test.into_iter().take(a.val).collect();
    let layout = Layout::parse(
        &a.layout,
        clips.first().map_or(0, |c| c.keypoints.num_keypoints()),
    )?;
    let mut cfg = TrainConfig::new(AlignNetConfig::new(layout).with_ablation(a.ablation));
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch_size;
    cfg.adam = AdamConfig {
        lr: a.lr,
        beta1: a.beta1,
        beta2: a.beta2,
        eps: a.eps,
    };
    cfg.final_lr_fraction = a.final_lr_fraction;
    cfg.seed = a.seed;
    cfg.flip = !a.no_flip;
    let out = train(&cfg, &clips, &val, Some(&a.out), |r| {
        println!("{}", serde_json::to_string(r).unwrap_or_default());
    })?;
    println!(
        "best epoch {} saved to {}",
        out.best_epoch,
        a.out.join(BEST_DIR).display()
    );
    Ok(())
}

fn align(a: PairArgs) -> Result<()> {
    let Some(ckpt) = &a.checkpoint else {
        bail!("align needs --checkpoint");
    };
    let model = load_model(ckpt)?;
    let corr = align_files(&model, &a.keypoints, &a.audio, &a.out, a.clean)?;
    println!("wrote {} rows to {}", corr.len(), a.out.display());
    Ok(())
}

fn dtw(a: PairArgs) -> Result<()> {
    let corr = dtw_files(&a.keypoints, &a.audio, &a.out, a.clean)?;
    println!("wrote {} rows to {}", corr.len(), a.out.display());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let (_, test) = load_dataset(&a.data)?;
    if test.is_empty() {
        bail!("dataset {} has no held-out clips", a.data.display());
    }
    let mut rows = Vec::new();
    let mut detailed = Vec::new();
    for ckpt in &a.checkpoints {
        let model = load_model(ckpt)?;
        let reports = evaluate_model_detailed(&model, &test)?;
        let label = format!("AlignNet [{}]", model.config().ablation);
        rows.push(TableRow::from_reports(label.clone(), &reports));
        detailed.push((label, reports));
    }
    let dtw = evaluate_dtw(&test)?;
    rows.push(TableRow::from_reports("DTW baseline", &dtw));
    detailed.push(("DTW baseline".into(), dtw));
    rows.push(TableRow::from_reports(
        "No alignment",
        &evaluate_identity(&test)?,
    ));
    let table = format_table(&rows);
    print!("{table}");
    if let Some(out) = &a.out {
        fs::create_dir_all(out)?;
        fs::write(out.join("table.md"), &table)?;
        fs::write(out.join("table.json"), serde_json::to_string_pretty(&rows)?)?;
        for (i, (label, reports)) in detailed.iter().enumerate() {
            let mut csv = String::new();
            if let Some(first) = reports.first() {
                csv.push_str(&first.csv_header());
                csv.push('\n');
            }
            for r in reports {
                csv.push_str(&r.csv_row());
                csv.push('\n');
            }
            fs::write(out.join(format!("reports_{i}.csv")), csv)?;
            fs::write(
                out.join(format!("reports_{i}.json")),
                serde_json::to_string_pretty(
                    &serde_json::json!({ "method": label, "clips": reports }),
                )?,
            )?;
        }
    }
    Ok(())
}

fn export(a: ExportArgs) -> Result<()> {
    let model = load_model(&a.checkpoint)?;
    let audio = match &a.audio {
        Some(p) => Some(io::read_wav(p)?),
        None => None,
    };
    let export = export_attention(
        &model,
        audio.as_ref().map(|(w, sr)| (w.as_slice(), *sr)),
        a.fps,
    )?;
    fs::write(&a.out, serde_json::to_string_pretty(&export)?)?;
    if let Some(csv) = export.temporal_csv() {
        fs::write(a.out.with_extension("csv"), csv)?;
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::SynthData(a) => synth_data(a),
        Command::Distort(a) => distort(a),
        Command::Train(a) => run_train(a),
        Command::Align(a) => align(a),
        Command::Dtw(a) => dtw(a),
        Command::Eval(a) => eval(a),
        Command::ExportAttn(a) => export(a),
    }
}
