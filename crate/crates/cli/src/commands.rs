use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use doodle_core::agent::{
    evaluate_with_rewards, initial_network, pretrain, rollout_with_rewards, train_rl_with, Exploration, GreedyPolicy,
    RolloutResult, StationaryPolicy,
};
use doodle_core::data::{
    group_by_class, load_demo_set, load_quickdraw, normalize_drawing, rasterize_reference, save_demo_set,
    synthesize_demo_episode, DemoConfig, StrokeBank, VectorDrawing,
};
use doodle_core::nn::{load_checkpoint, save_checkpoint, QNetwork};
use doodle_core::{Canvas, MediaType, PenMode, RewardParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{BankKind, RunConfig};
use crate::exit::Failure;

pub const DEMOS_FILE: &str = "demos.sdqd";
pub const PRETRAINED_FILE: &str = "pretrained.sdqw";
pub const MODEL_FILE: &str = "model.sdqw";
pub const PRETRAIN_CSV: &str = "pretrain.csv";
pub const REWARD_CSV: &str = "rewards.csv";
pub const METRICS_FILE: &str = "metrics.json";

fn rng(cfg: &RunConfig) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed)
}

fn rewards(cfg: &RunConfig) -> RewardParams {
    cfg.rl.reward.unwrap_or_else(|| RewardParams::for_media(cfg.media))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn quickdraw_drawings(cfg: &RunConfig) -> Result<Vec<VectorDrawing>, Failure> {
    let path = cfg
        .data
        .quickdraw
        .as_ref()
        .ok_or_else(|| Failure::usage(anyhow::anyhow!("no QuickDraw file given (--quickdraw or data.quickdraw)")))?;
    let report = load_quickdraw(path)?;
    if report.skipped > 0 {
        eprintln!("skipped {} malformed lines in {}", report.skipped, path.display());
    }
    let keep = |d: &VectorDrawing| cfg.data.classes.is_empty() || cfg.data.classes.contains(&d.label);
    let per_class = if cfg.data.per_class == 0 { usize::MAX } else { cfg.data.per_class };
    let drawings: Vec<VectorDrawing> = group_by_class(&report.drawings, per_class)
        .into_values()
        .flatten()
        .filter(keep)
        .collect();
    if drawings.is_empty() {
        return Err(Failure::usage(anyhow::anyhow!(
            "no drawings in {} match the class filter {:?}",
            path.display(),
            cfg.data.classes
        )));
    }
    Ok(drawings)
}

/// Stroke colors cycled over a drawing's strokes.
fn palette(media: MediaType) -> &'static [PenMode] {
    if media.is_color() {
        &media.pen_modes()[1..]
    } else {
        &[PenMode::Down]
    }
}

/// Reference canvases grouped by class label.
fn references(cfg: &RunConfig) -> Result<BTreeMap<String, Vec<Arc<Canvas>>>, Failure> {
    let mut out: BTreeMap<String, Vec<Arc<Canvas>>> = BTreeMap::new();
    for d in quickdraw_drawings(cfg)? {
        let normalized = normalize_drawing(&d, cfg.side)?;
        let canvas = rasterize_reference(&normalized, cfg.side, cfg.media, palette(cfg.media))?;
        out.entry(d.label).or_default().push(Arc::new(canvas));
    }
    Ok(out)
}

fn check_network(net: &QNetwork, cfg: &RunConfig, what: &Path) -> Result<(), Failure> {
    let c = net.config();
    if c.media != cfg.media || c.side != cfg.side {
        return Err(Failure::format(anyhow::anyhow!(
            "{} holds a {} network for {}px canvases, but the run is {} at {}px",
            what.display(),
            c.media.name(),
            c.side,
            cfg.media.name(),
            cfg.side
        )));
    }
    Ok(())
}

pub fn synth(cfg: &RunConfig) -> Result<PathBuf, Failure> {
    let s = &cfg.synth;
    if s.episodes == 0 {
        return Err(Failure::usage(anyhow::anyhow!("--episodes must be at least 1")));
    }
    let mut rng = rng(cfg);
    let bank = match s.bank {
        BankKind::Procedural => StrokeBank::procedural(&mut rng, s.bank_size, s.max_extent)?,
        BankKind::FixedStep => StrokeBank::fixed_step(&mut rng, s.bank_size, doodle_core::env::MAX_OFFSET, s.max_edges)?,
        BankKind::Quickdraw => StrokeBank::from_drawings(&quickdraw_drawings(cfg)?, cfg.side)?,
    };
    let demo_cfg = DemoConfig {
        n_strokes: s.n_strokes,
        start_on_stroke: s.start_on_stroke,
        ..DemoConfig::new(cfg.side, cfg.media)
    };
    let episodes = (0..s.episodes)
        .map(|_| synthesize_demo_episode(&bank, &mut rng, &demo_cfg))
        .collect::<doodle_core::Result<Vec<_>>>()?;
    let path = cfg.data.demos.clone().unwrap_or_else(|| cfg.out_dir.join(DEMOS_FILE));
    save_demo_set(&path, &episodes)?;
    let samples: usize = episodes.iter().map(|e| e.actions.len()).sum();
    println!("{} episodes, {samples} samples -> {}", episodes.len(), path.display());
    Ok(path)
}

pub fn pretrain_cmd(cfg: &RunConfig) -> Result<PathBuf, Failure> {
    let demos_path = cfg.data.demos.clone().unwrap_or_else(|| cfg.out_dir.join(DEMOS_FILE));
    let episodes = load_demo_set(&demos_path)?;
    if let Some(e) = episodes
        .iter()
        .find(|e| e.reference.media() != cfg.media || e.reference.side() != cfg.side)
    {
        return Err(Failure::format(anyhow::anyhow!(
            "{} holds {} demos at {}px, but the run is {} at {}px",
            demos_path.display(),
            e.reference.media().name(),
            e.reference.side(),
            cfg.media.name(),
            cfg.side
        )));
    }
    let mut rng = rng(cfg);
    let net = QNetwork::new(cfg.net()?, &mut rng)?;
    let out = pretrain(net, &episodes, &cfg.pretrain, &mut rng)?;
    write_csv(&cfg.out_dir.join(PRETRAIN_CSV), &out.metrics)?;
    let path = cfg.out_dir.join(PRETRAINED_FILE);
    save_checkpoint(&path, &out.net)?;
    if let Some(m) = out.metrics.last() {
        let val = m.val_accuracy.map_or("n/a".to_string(), |v| format!("{v:.4}"));
        println!(
            "{} train / {} val samples, final train accuracy {:.4}, val accuracy {val} -> {}",
            out.train_samples,
            out.val_samples,
            m.train_accuracy,
            path.display()
        );
    }
    Ok(path)
}

pub fn train(cfg: &RunConfig, init: Option<&Path>) -> Result<PathBuf, Failure> {
    let pretrained = match init {
        Some(p) => {
            let net = load_checkpoint(p)?;
            check_network(&net, cfg, p)?;
            Some(net)
        }
        None => None,
    };
    let refs: Vec<Arc<Canvas>> = references(cfg)?.into_values().flatten().collect();
    let mut rng = rng(cfg);
    let start = initial_network(&cfg.net()?, pretrained.as_ref(), &cfg.rl, &mut rng)?;
    let out = train_rl_with(&start, &refs, &cfg.rl, &mut rng, |p| {
        eprintln!(
            "frame {:>8}  reward {:>10.2}  loss {:>10.4}  eps {:.3}  stuck {:.3}",
            p.frame, p.mean_reward, p.loss, p.epsilon, p.stuck_rate
        );
    })?;
    write_csv(&cfg.out_dir.join(REWARD_CSV), &out.curve)?;
    let path = cfg.out_dir.join(MODEL_FILE);
    save_checkpoint(&path, &out.net)?;
    println!(
        "{} frames, {} episodes, {} updates -> {}",
        cfg.rl.total_frames,
        out.episodes,
        out.updates,
        path.display()
    );
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Greedy,
    Stationary,
}

pub enum ReferenceSource {
    Png(PathBuf),
    Class(String),
}

#[derive(Serialize)]
struct LogLine {
    step: usize,
    action: usize,
    dx: i32,
    dy: i32,
    mode: PenMode,
    reward: f64,
}

/// Reference image followed by the canvas at every `every`-th step.
fn strip(reference: &Canvas, result: &RolloutResult, every: usize) -> image::RgbImage {
    let side = reference.side() as u32;
    let mut tiles = vec![reference];
    tiles.extend(result.frames.iter().skip(every - 1).step_by(every));
    let mut img = image::RgbImage::new(side * tiles.len() as u32, side);
    for (t, canvas) in tiles.iter().enumerate() {
        let c = canvas.channels();
        for (i, px) in canvas.pixels().chunks(c).enumerate() {
            let rgb = if c == 1 { [px[0]; 3] } else { [px[0], px[1], px[2]] };
            let (x, y) = ((i as u32) % side, (i as u32) / side);
            img.put_pixel(t as u32 * side + x, y, image::Rgb(rgb));
        }
    }
    img
}

pub fn rollout_cmd(
    cfg: &RunConfig,
    checkpoint: &Path,
    source: &ReferenceSource,
    policy: PolicyKind,
) -> Result<PathBuf, Failure> {
    let net = load_checkpoint(checkpoint)?;
    check_network(&net, cfg, checkpoint)?;
    let reference = match source {
        ReferenceSource::Png(p) => {
            let c = Canvas::load_png(p)?.with_media(cfg.media)?;
            if c.side() != cfg.side {
                return Err(Failure::format(anyhow::anyhow!(
                    "{} is {}px, the run expects {}px",
                    p.display(),
                    c.side(),
                    cfg.side
                )));
            }
            c
        }
        ReferenceSource::Class(name) => {
            let mut by_class = references(cfg)?;
            let refs = by_class
                .remove(name)
                .ok_or_else(|| Failure::usage(anyhow::anyhow!("no drawing of class `{name}`")))?;
            refs[0].as_ref().clone()
        }
    };
    let reference = Arc::new(reference);
    let params = rewards(cfg);
    let steps = cfg.rollout.steps;
    let result = match policy {
        PolicyKind::Greedy => {
            let mut p = GreedyPolicy::new(&net, cfg.seed);
            rollout_with_rewards(&mut p, Arc::clone(&reference), steps, &params)?
        }
        PolicyKind::Stationary => rollout_with_rewards(&mut StationaryPolicy, Arc::clone(&reference), steps, &params)?,
    };

    let dir = cfg.out_dir.join("rollout");
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let last = result.final_canvas().map_or_else(|| reference.blank_like(), Clone::clone);
    last.save_png(dir.join("final.png"))?;
    strip(&reference, &result, (steps / 10).max(1))
        .save(dir.join("strip.png"))
        .context("writing strip.png")?;
    if cfg.rollout.frames {
        let frames = dir.join("frames");
        std::fs::create_dir_all(&frames).with_context(|| format!("creating {}", frames.display()))?;
        for (i, f) in result.frames.iter().enumerate() {
            f.save_png(frames.join(format!("step_{:04}.png", i + 1)))?;
        }
    }
    let log_path = dir.join("actions.jsonl");
    let mut log = std::io::BufWriter::new(
        std::fs::File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?,
    );
    for (i, (a, r)) in result.actions.iter().zip(&result.rewards).enumerate() {
        let line = LogLine {
            step: i + 1,
            action: a.index(cfg.media)?,
            dx: a.dx,
            dy: a.dy,
            mode: a.mode,
            reward: r.total(),
        };
        serde_json::to_writer(&mut log, &line).context("writing action log")?;
        writeln!(log).context("writing action log")?;
    }
    log.flush().context("writing action log")?;
    println!(
        "accumulated reward {:.2} of max {:.2} -> {}",
        result.accumulated_reward,
        result.max_reward,
        dir.display()
    );
    Ok(dir)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub references: usize,
    pub mean_accumulated: f64,
    pub mean_max: f64,
    pub ratio: f64,
}

pub fn eval(cfg: &RunConfig, checkpoint: &Path) -> Result<PathBuf, Failure> {
    let net = load_checkpoint(checkpoint)?;
    check_network(&net, cfg, checkpoint)?;
    let params = rewards(cfg);
    let mut metrics = BTreeMap::new();
    for (class, refs) in references(cfg)? {
        let e = evaluate_with_rewards(&net, &refs, cfg.rollout.steps, cfg.seed, Some(&params))?;
        println!(
            "{class}: {} references, mean accumulated {:.2}, mean max {:.2}, ratio {:.4}",
            refs.len(),
            e.mean_accumulated,
            e.mean_max,
            e.ratio()
        );
        metrics.insert(
            class,
            ClassMetrics {
                references: refs.len(),
                mean_accumulated: e.mean_accumulated,
                mean_max: e.mean_max,
                ratio: e.ratio(),
            },
        );
    }
    let path = cfg.out_dir.join(METRICS_FILE);
    let json = serde_json::to_string_pretty(&metrics).context("encoding metrics")?;
    std::fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Parses `--exploration`.
pub fn exploration(name: &str) -> Result<Exploration, Failure> {
    match name {
        "rare" => Ok(Exploration::Rare),
        "naive" => Ok(Exploration::naive()),
        "greedy" => Ok(Exploration::Greedy),
        other => Err(Failure::usage(anyhow::anyhow!(
            "unknown exploration `{other}` (rare, naive or greedy)"
        ))),
    }
}
