//! Run configuration: one TOML file, overridden by command-line flags and
//! echoed into the run directory.

use std::path::{Path, PathBuf};

use anyhow::Context;
use doodle_core::agent::{PretrainConfig, RlConfig};
use doodle_core::nn::NetConfig;
use doodle_core::{MediaType, RewardParams};
use serde::{Deserialize, Serialize};

use crate::exit::Failure;

/// File name of the echoed config inside the run directory.
pub const ECHO_FILE: &str = "config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub media: MediaType,
    pub side: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub data: DataConfig,
    pub synth: SynthConfig,
    pub pretrain: PretrainConfig,
    pub rl: RlConfig,
    pub rollout: RolloutConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            media: MediaType::Sketch,
            side: 28,
            seed: 0,
            out_dir: PathBuf::from("run"),
            data: DataConfig::default(),
            synth: SynthConfig::default(),
            pretrain: PretrainConfig::default(),
            rl: RlConfig::default(),
            rollout: RolloutConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// QuickDraw NDJSON file with reference drawings.
    pub quickdraw: Option<PathBuf>,
    /// Demonstration container written by `synth`, read by `pretrain`.
    pub demos: Option<PathBuf>,
    /// Class labels to keep; empty keeps every class.
    pub classes: Vec<String>,
    /// Drawings kept per class; 0 keeps all.
    pub per_class: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BankKind {
    /// Lines, two-segment polylines and arcs.
    Procedural,
    /// Random walks whose edges are single maximal moves.
    FixedStep,
    /// Strokes of the QuickDraw drawings in `data.quickdraw`.
    Quickdraw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub episodes: usize,
    pub n_strokes: usize,
    pub bank: BankKind,
    /// Strokes generated for the procedural banks.
    pub bank_size: usize,
    /// Largest stroke extent of the procedural bank, in pixels.
    pub max_extent: i32,
    /// Most edges per fixed-step stroke.
    pub max_edges: usize,
    pub start_on_stroke: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            episodes: 500,
            n_strokes: 2,
            bank: BankKind::FixedStep,
            bank_size: 256,
            max_extent: 12,
            max_edges: 2,
            start_on_stroke: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RolloutConfig {
    pub steps: usize,
    /// Also write one PNG per step.
    pub frames: bool,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        RolloutConfig {
            steps: doodle_core::env::DEFAULT_MAX_STEPS,
            frames: false,
        }
    }
}

impl RunConfig {
    /// Reads `path`, or returns the defaults when no file is given.
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .map_err(Failure::usage)?;
        toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))
            .map_err(Failure::format)
    }

    /// Fills in derived values so the echo is complete, then checks that
    /// the pieces agree with each other.
    pub fn resolve(mut self) -> Result<Self, Failure> {
        if self.rl.reward.is_none() {
            self.rl.reward = Some(RewardParams::for_media(self.media));
        }
        self.net()?;
        self.rl.validate().map_err(Failure::from)?;
        Ok(self)
    }

    /// Network preset for the canvas side.
    pub fn net(&self) -> Result<NetConfig, Failure> {
        match self.side {
            28 => Ok(NetConfig::desk(self.media)),
            84 => Ok(NetConfig::standard(self.media)),
            other => Err(Failure::usage(anyhow::anyhow!(
                "no network preset for {other}px canvases (use 28 or 84)"
            ))),
        }
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Writes the effective config into the run directory.
    pub fn echo(&self) -> anyhow::Result<PathBuf> {
        std::fs::create_dir_all(&self.out_dir)
            .with_context(|| format!("creating run directory {}", self.out_dir.display()))?;
        let path = self.out_dir.join(ECHO_FILE);
        std::fs::write(&path, self.to_toml()?).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
