use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use fomtrace_core::eval::{sequence_report, EffortEntry, ReportMeta};
use fomtrace_core::imgcore::{load_frame_sequence, load_mask, mask_file_name, save_label};
use fomtrace_core::pipeline::{Mode, PipelineError, SessionConfig};
use fomtrace_core::{LabelMap, Session};

mod segtrack;

/// Errors caused by the caller's input rather than by the computation.
#[derive(Debug)]
struct BadInput(String);

impl std::fmt::Display for BadInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for BadInput {}

fn bad_input(msg: impl Into<String>) -> anyhow::Error {
    BadInput(msg.into()).into()
}

#[derive(Parser)]
#[command(name = "fomtrace", version, about = "Interactive video object segmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment every frame after the first from an initial mask, without corrections.
    Segment(SegmentArgs),
    /// Score predicted masks against ground truth and write a JSON report.
    Eval(EvalArgs),
    /// Host interactive sessions over HTTP.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "data")]
        data: PathBuf,
    },
    /// Convert one SegTrackv2 sequence to numbered frame and mask files.
    ImportSegtrack {
        /// Dataset root containing JPEGImages/ and GroundTruth/.
        #[arg(long)]
        root: PathBuf,
        #[arg(long)]
        sequence: String,
        /// Receives frames/ and gt/.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
struct SegmentArgs {
    /// Directory of frame_00000.png, frame_00001.png, ...
    #[arg(long)]
    frames: PathBuf,
    /// Label image for frame 0 (0/255 masks are read as one object).
    #[arg(long)]
    init_mask: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Defaults to the config file's mode, then fomtrace.
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    grid_step: Option<usize>,
    /// Directory of precomputed flow_%05d.flo files.
    #[arg(long)]
    flow_dir: Option<PathBuf>,
    /// JSON session configuration; explicit flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(clap::Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Correction log (session log.json) supplying markers and seconds.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "sequence")]
    sequence: String,
    #[arg(long, default_value = "unknown")]
    mode: String,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Segment(args) => segment(args),
        Command::Eval(args) => eval(args),
        Command::Serve { port, data } => serve(port, data),
        Command::ImportSegtrack { root, sequence, out } => segtrack::import(&root, &sequence, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.downcast_ref::<BadInput>().is_some() { 2 } else { 3 })
        }
    }
}

fn segment_config(args: &SegmentArgs) -> Result<SessionConfig> {
    let mut config: SessionConfig = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| bad_input(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| bad_input(format!("{}: {e}", p.display())))?
        }
        None => SessionConfig::default(),
    };
    if let Some(m) = args.mode {
        config.mode = m;
    }
    if let Some(g) = args.gamma {
        config.gamma = g;
    }
    if let Some(w) = args.window {
        config.window = w;
    }
    if let Some(s) = args.grid_step {
        config.grid_step = s;
    }
    config.validate().map_err(|e| bad_input(e.to_string()))?;
    Ok(config)
}

fn is_input_error(e: &PipelineError) -> bool {
    matches!(
        e,
        PipelineError::EmptyInitialMask
            | PipelineError::TooFewFrames(_)
            | PipelineError::DimensionMismatch { .. }
            | PipelineError::InvalidConfig(_)
    )
}

fn segment(args: SegmentArgs) -> Result<()> {
    let config = segment_config(&args)?;
    let frames = load_frame_sequence::<f64>(&args.frames)
        .map_err(|e| bad_input(format!("{}: {e}", args.frames.display())))?;
    if frames.is_empty() {
        bail!(bad_input(format!("no frame_00000.png in {}", args.frames.display())));
    }
    let l0 = load_mask(&args.init_mask).map_err(|e| bad_input(format!("{}: {e}", args.init_mask.display())))?;
    let n = frames.len();
    log::info!("segmenting {n} frames in {} mode", config.mode.name());
    let mut session = Session::init(frames, l0, config)
        .map_err(|e| if is_input_error(&e) { bad_input(e.to_string()) } else { e.into() })?
        .with_flow_dir(args.flow_dir);
    let labels = session.run_uninterrupted().context("segmentation failed")?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    for (i, label) in labels.iter().enumerate() {
        let path = args.out.join(mask_file_name(i + 1));
        save_label(label, &path).with_context(|| format!("writing {}", path.display()))?;
    }
    println!("wrote {} masks to {}", labels.len(), args.out.display());
    Ok(())
}

/// Loads `mask_%05d.png` from the first index present (0 or 1) up to the
/// first gap.
fn load_masks(dir: &Path) -> Result<(usize, Vec<LabelMap>)> {
    let first = (0..2)
        .find(|&t| dir.join(mask_file_name(t)).is_file())
        .ok_or_else(|| bad_input(format!("no mask_00000.png or mask_00001.png in {}", dir.display())))?;
    let mut masks = Vec::new();
    loop {
        let path = dir.join(mask_file_name(first + masks.len()));
        if !path.is_file() {
            return Ok((first, masks));
        }
        masks.push(load_mask(&path).map_err(|e| bad_input(format!("{}: {e}", path.display())))?);
    }
}

fn eval(args: EvalArgs) -> Result<()> {
    let (pred_first, preds) = load_masks(&args.pred)?;
    let (gt_first, mut gts) = load_masks(&args.gt)?;
    // Ground truth usually includes the initial frame, which predictions lack.
    if gt_first < pred_first {
        gts.drain(..pred_first - gt_first);
    } else if gt_first > pred_first {
        bail!(bad_input(format!("ground truth starts at frame {gt_first}, predictions at {pred_first}")));
    }
    if preds.len() != gts.len() {
        bail!(bad_input(format!(
            "{} predicted masks but {} ground-truth masks from frame {pred_first}",
            preds.len(),
            gts.len()
        )));
    }
    let effort: Option<Vec<EffortEntry>> = match &args.log {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| bad_input(format!("{}: {e}", p.display())))?;
            Some(serde_json::from_str(&text).map_err(|e| bad_input(format!("{}: {e}", p.display())))?)
        }
        None => None,
    };
    let meta = ReportMeta {
        sequence: args.sequence,
        mode: args.mode,
        config: serde_json::Value::Null,
    };
    let report = sequence_report(meta, &preds, &gts, pred_first, effort.as_deref())
        .map_err(|e| bad_input(e.to_string()))?;
    report
        .save_json(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!("mean_iou={:.4}", report.mean_iou);
    Ok(())
}

fn serve(port: u16, data: PathBuf) -> Result<()> {
    std::fs::create_dir_all(&data).with_context(|| format!("creating {}", data.display()))?;
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(fomtrace_server::serve(port, data))?;
    Ok(())
}
