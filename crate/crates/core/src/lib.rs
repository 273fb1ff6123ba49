//! Stroke-level painting environment and a two-stage learner that draws
//! reference doodles with discrete pen actions.
//!
//! - [`canvas`]: rasterizing painting engine (sketch, color sketch, watercolor).
//! - [`env`]: observations, action codec, rewards and episodes.
//! - [`data`]: QuickDraw ingestion, demonstration synthesis, prioritized replay.
//! - [`nn`]: the two-stream convolutional Q-network with hand-written gradients.
//! - [`agent`]: supervised pretraining, Double-DQN fine-tuning, rollouts.

pub mod agent;
pub mod canvas;
pub mod container;
pub mod data;
pub mod env;
pub mod error;
pub mod nn;

pub use canvas::{BrushParams, Canvas, MediaType, PenMode, Point};
pub use env::{Action, ActionSpec, EpisodeState, Observation, Reward, RewardParams};
pub use error::{Error, Result};
