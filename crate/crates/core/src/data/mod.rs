//! Data pipeline: QuickDraw ingestion, demonstration synthesis, replay.

pub mod demo;
pub mod io;
pub mod quickdraw;
pub mod replay;

pub use demo::{chunk_path, synthesize_demo_episode, synthesize_demo_set, DemoConfig, DemoEpisode, DemoSample, StrokeBank};
pub use io::{load_demo_set, load_replay, save_demo_set, save_replay};
pub use quickdraw::{group_by_class, load_quickdraw, normalize_drawing, parse_quickdraw, rasterize_reference, ParseReport, VectorDrawing};
pub use replay::{PerConfig, PrioritizedReplay, Sample, SumTree, Transition};
