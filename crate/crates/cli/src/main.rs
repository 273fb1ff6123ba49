//! `doodle`: synthesize demonstrations, pretrain, fine-tune, roll out and
//! evaluate the drawing agent.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error or missing
//! input, 3 unreadable data or mismatched inputs, 4 training diverged.
//! `DOODLE_THREADS` caps the worker threads used for evaluation.

mod commands;
mod config;
mod exit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use doodle_core::MediaType;

use crate::commands::{PolicyKind, ReferenceSource};
use crate::config::{BankKind, RunConfig};
use crate::exit::Failure;

#[derive(Parser)]
#[command(name = "doodle", version, about = "Learn to reproduce doodles with pen actions")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Run directory for outputs and the config echo.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    media: Option<Media>,
    /// Canvas side in pixels (28 or 84).
    #[arg(long, global = true)]
    side: Option<usize>,
    /// QuickDraw NDJSON file with reference drawings.
    #[arg(long, global = true)]
    quickdraw: Option<PathBuf>,
    /// Comma-separated class labels to keep.
    #[arg(long, global = true, value_delimiter = ',')]
    classes: Option<Vec<String>>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Media {
    Sketch,
    ColorSketch,
    Watercolor,
}

impl From<Media> for MediaType {
    fn from(m: Media) -> Self {
        match m {
            Media::Sketch => MediaType::Sketch,
            Media::ColorSketch => MediaType::ColorSketch,
            Media::Watercolor => MediaType::Watercolor,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic demonstration episodes to a container file.
    Synth(SynthArgs),
    /// Supervised pretraining on a demonstration file.
    Pretrain(PretrainArgs),
    /// Double-DQN fine-tuning on QuickDraw references.
    Train(TrainArgs),
    /// Draw one reference with a checkpoint.
    Rollout(RolloutArgs),
    /// Mean rewards of a checkpoint per class.
    Eval(EvalArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long, value_enum)]
    bank: Option<Bank>,
    /// Output file (default: <out>/demos.sdqd).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Bank {
    Procedural,
    FixedStep,
    Quickdraw,
}

#[derive(Args)]
struct PretrainArgs {
    /// Demonstration file (default: <out>/demos.sdqd).
    #[arg(long)]
    demos: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    /// Checkpoint to initialize from, usually the pretrained network.
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long)]
    frames: Option<u64>,
    /// Ignore `--init` and start from random weights.
    #[arg(long)]
    no_pretrain: bool,
    /// Drop the local patch stream.
    #[arg(long)]
    no_local: bool,
    /// rare, naive or greedy.
    #[arg(long)]
    exploration: Option<String>,
    #[arg(long)]
    lr: Option<f64>,
}

#[derive(Args)]
struct RolloutArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Reference PNG.
    #[arg(long, conflicts_with = "class", required_unless_present = "class")]
    reference: Option<PathBuf>,
    /// Use the first QuickDraw drawing of this class as the reference.
    #[arg(long)]
    class: Option<String>,
    #[arg(long)]
    steps: Option<usize>,
    /// Also write every intermediate canvas.
    #[arg(long)]
    frames: bool,
    #[arg(long, value_enum, default_value = "greedy")]
    policy: PolicyArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Greedy,
    Stationary,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    steps: Option<usize>,
}

fn configure(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(v) = &cli.out {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(v) = cli.media {
        cfg.media = v.into();
    }
    if let Some(v) = cli.side {
        cfg.side = v;
    }
    if let Some(v) = &cli.quickdraw {
        cfg.data.quickdraw = Some(v.clone());
    }
    if let Some(v) = &cli.classes {
        let classes: Vec<String> = v.iter().map(|c| c.trim().to_string()).filter(|c| !c.is_empty()).collect();
        if classes.is_empty() {
            return Err(Failure::usage(anyhow::anyhow!("--classes names no class")));
        }
        cfg.data.classes = classes;
    }
    match &cli.command {
        Command::Synth(a) => {
            if let Some(v) = a.episodes {
                cfg.synth.episodes = v;
            }
            if let Some(v) = a.bank {
                cfg.synth.bank = match v {
                    Bank::Procedural => BankKind::Procedural,
                    Bank::FixedStep => BankKind::FixedStep,
                    Bank::Quickdraw => BankKind::Quickdraw,
                };
            }
            if let Some(v) = &a.output {
                cfg.data.demos = Some(v.clone());
            }
        }
        Command::Pretrain(a) => {
            if let Some(v) = &a.demos {
                cfg.data.demos = Some(v.clone());
            }
            if let Some(v) = a.epochs {
                cfg.pretrain.epochs = v;
            }
            if let Some(v) = a.batch {
                cfg.pretrain.batch = v;
            }
            if let Some(v) = a.lr {
                cfg.pretrain.adam.lr = v;
            }
        }
        Command::Train(a) => {
            if let Some(v) = a.frames {
                cfg.rl.total_frames = v;
            }
            if a.no_pretrain {
                cfg.rl.use_pretrained_init = false;
            }
            if a.no_local {
                cfg.rl.use_local_stream = false;
            }
            if let Some(v) = &a.exploration {
                cfg.rl.exploration = commands::exploration(v)?;
            }
            if let Some(v) = a.lr {
                cfg.rl.adam.lr = v;
            }
        }
        Command::Rollout(a) => {
            if let Some(v) = a.steps {
                cfg.rollout.steps = v;
            }
            if a.frames {
                cfg.rollout.frames = true;
            }
        }
        Command::Eval(a) => {
            if let Some(v) = a.steps {
                cfg.rollout.steps = v;
            }
        }
    }
    cfg.resolve()
}

fn init_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("DOODLE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::usage(anyhow::anyhow!("DOODLE_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(Failure::runtime)
}

fn run(cli: Cli) -> Result<(), Failure> {
    init_threads()?;
    let cfg = configure(&cli)?;
    cfg.echo()?;
    match cli.command {
        Command::Synth(_) => commands::synth(&cfg)?,
        Command::Pretrain(_) => commands::pretrain_cmd(&cfg)?,
        Command::Train(a) => commands::train(&cfg, a.init.as_deref())?,
        Command::Rollout(a) => {
            let source = match (a.reference, a.class) {
                (Some(p), _) => ReferenceSource::Png(p),
                (None, Some(c)) => ReferenceSource::Class(c),
                (None, None) => unreachable!("clap requires one of --reference and --class"),
            };
            let policy = match a.policy {
                PolicyArg::Greedy => PolicyKind::Greedy,
                PolicyArg::Stationary => PolicyKind::Stationary,
            };
            commands::rollout_cmd(&cfg, &a.checkpoint, &source, policy)?
        }
        Command::Eval(a) => commands::eval(&cfg, &a.checkpoint)?,
    };
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code() as u8)
        }
    }
}
