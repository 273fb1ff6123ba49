//! The drawing MDP: action codec, observations, rewards and episodes.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::canvas::{BrushParams, Canvas, MediaType, PenMode, Point};
use crate::error::{Error, Result};

/// Largest pen offset per step along each axis.
pub const MAX_OFFSET: i32 = 5;
/// Side of the movement grid, `2 * MAX_OFFSET + 1`.
pub const GRID: usize = 11;
pub const POSITIONS: usize = GRID * GRID;
/// Side of the local-stream patches; equals the movement range.
pub const PATCH_SIZE: usize = GRID;
pub const DEFAULT_MAX_STEPS: usize = 100;
/// History length inspected by [`is_stuck`].
const HISTORY: usize = 4;

/// Size of the discrete action space for a medium.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionSpec {
    media: MediaType,
}

impl ActionSpec {
    pub fn new(media: MediaType) -> Self {
        ActionSpec { media }
    }

    pub fn pen_modes(&self) -> usize {
        self.media.pen_modes().len()
    }

    /// 242 for grayscale, 484 for color.
    pub fn total(&self) -> usize {
        POSITIONS * self.pen_modes()
    }

    pub fn decode(&self, index: usize) -> Result<Action> {
        Action::from_index(index, self.media)
    }

    pub fn encode(&self, action: Action) -> Result<usize> {
        action.index(self.media)
    }
}

/// Pen move by `(dx, dy)` followed by the pen ending in `mode`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub dx: i32,
    pub dy: i32,
    pub mode: PenMode,
}

impl Action {
    /// Stay put with the pen lifted.
    pub const STAY: Action = Action {
        dx: 0,
        dy: 0,
        mode: PenMode::Up,
    };

    pub fn new(dx: i32, dy: i32, mode: PenMode) -> Result<Self> {
        if dx.abs() > MAX_OFFSET || dy.abs() > MAX_OFFSET {
            return Err(Error::invalid(format!(
                "offset ({dx}, {dy}) exceeds the ±{MAX_OFFSET} movement range"
            )));
        }
        Ok(Action { dx, dy, mode })
    }

    /// `mode_index * 121 + (dy + 5) * 11 + (dx + 5)`
    pub fn index(&self, media: MediaType) -> Result<usize> {
        if self.dx.abs() > MAX_OFFSET || self.dy.abs() > MAX_OFFSET {
            return Err(Error::invalid(format!("offset ({}, {}) out of range", self.dx, self.dy)));
        }
        let mode = self.mode.index(media)?;
        Ok(mode * POSITIONS + (self.dy + MAX_OFFSET) as usize * GRID + (self.dx + MAX_OFFSET) as usize)
    }

    pub fn from_index(index: usize, media: MediaType) -> Result<Self> {
        let spec = ActionSpec::new(media);
        if index >= spec.total() {
            return Err(Error::invalid(format!(
                "action index {index} out of range 0..{}",
                spec.total()
            )));
        }
        let mode = PenMode::from_index(index / POSITIONS, media)?;
        let pos = index % POSITIONS;
        Ok(Action {
            dx: (pos % GRID) as i32 - MAX_OFFSET,
            dy: (pos / GRID) as i32 - MAX_OFFSET,
            mode,
        })
    }
}

/// Normalized L2 distance map: `sqrt((x-x0)^2 + (y-y0)^2) / L`, row-major.
pub fn distance_map(pen: Point, side: usize) -> Result<Vec<f64>> {
    if pen.x < 0 || pen.y < 0 || pen.x as usize >= side || pen.y as usize >= side {
        return Err(Error::invalid(format!(
            "pen position ({}, {}) is off the {side}x{side} canvas",
            pen.x, pen.y
        )));
    }
    let l = side as f64;
    let mut out = Vec::with_capacity(side * side);
    for y in 0..side as i32 {
        for x in 0..side as i32 {
            let (dx, dy) = ((x - pen.x) as f64, (y - pen.y) as f64);
            out.push((dx * dx + dy * dy).sqrt() / l);
        }
    }
    Ok(out)
}

/// Spatially constant map holding the pen mode's index.
pub fn color_map(mode: PenMode, media: MediaType, side: usize) -> Result<Vec<f64>> {
    let value = mode.index(media)? as f64;
    Ok(vec![value; side * side])
}

fn check_same_shape(a: &Canvas, b: &Canvas) -> Result<()> {
    if a.side() != b.side() || a.channels() != b.channels() {
        return Err(Error::invalid(format!(
            "shape mismatch: {}x{}x{} vs {}x{}x{}",
            a.side(),
            a.side(),
            a.channels(),
            b.side(),
            b.side(),
            b.channels()
        )));
    }
    Ok(())
}

/// Sum of squared per-channel differences in 0..255 units.
pub fn squared_error(canvas: &Canvas, reference: &Canvas) -> Result<u64> {
    check_same_shape(canvas, reference)?;
    Ok(canvas
        .pixels()
        .iter()
        .zip(reference.pixels())
        .map(|(&a, &b)| {
            let d = a as i64 - b as i64;
            (d * d) as u64
        })
        .sum())
}

/// `s = Σ (P - P_ref)^2 / L^2`; channels are summed inside the numerator.
pub fn similarity(canvas: &Canvas, reference: &Canvas) -> Result<f64> {
    let side = canvas.side() as f64;
    Ok(squared_error(canvas, reference)? as f64 / (side * side))
}

/// Accumulated pixel reward of a perfect reproduction: `s_0` against a blank
/// canvas.
pub fn max_reward(reference: &Canvas) -> f64 {
    similarity(&reference.blank_like(), reference).expect("blank canvas has the reference's shape")
}

/// `true` when the last four positions are identical or alternate `A,B,A,B`.
pub fn is_stuck(history: &[Point]) -> bool {
    if history.len() < HISTORY {
        return false;
    }
    let h = &history[history.len() - HISTORY..];
    let stationary = h.iter().all(|&p| p == h[0]);
    let oscillating = h[0] != h[1] && h[0] == h[2] && h[1] == h[3];
    stationary || oscillating
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    /// Added when the pen draws a short segment or moves while lifted.
    pub step_penalty: f64,
    /// Added (scaled by `beta`) when the drawn color is absent under the stroke.
    pub color_penalty: f64,
    /// 0 for grayscale references, 1 for color.
    pub beta: f64,
    /// Drawing moves shorter than this (Chebyshev) are penalized.
    pub min_draw_step: i32,
}

impl RewardParams {
    pub fn for_media(media: MediaType) -> Self {
        RewardParams {
            step_penalty: -1.0,
            color_penalty: -5.0,
            beta: if media.is_color() { 1.0 } else { 0.0 },
            min_draw_step: 5,
        }
    }
}

/// Per-step reward split into its components.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Reward {
    pub pixel: f64,
    pub step_penalty: f64,
    pub color_penalty: f64,
}

impl Reward {
    pub fn total(&self) -> f64 {
        self.pixel + self.step_penalty + self.color_penalty
    }

    pub fn penalties(&self) -> f64 {
        self.step_penalty + self.color_penalty
    }
}

/// Index of the primary (red, green, blue) nearest to an RGB value.
fn color_class(px: &[u8]) -> usize {
    const PRIMARIES: [[i32; 3]; 3] = [[255, 0, 0], [0, 255, 0], [0, 0, 255]];
    let mut best = (0, i32::MAX);
    for (i, p) in PRIMARIES.iter().enumerate() {
        let d: i32 = p.iter().zip(px).map(|(&a, &b)| (a - b as i32).pow(2)).sum();
        if d < best.1 {
            best = (i, d);
        }
    }
    best.0
}

/// What the agent sees: canvas, reference and pen state. Tensors for the
/// network are materialized on demand so observations stay small in replay.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    canvas: Arc<Canvas>,
    reference: Arc<Canvas>,
    pen: Point,
    mode: PenMode,
}

impl Observation {
    pub fn new(canvas: Arc<Canvas>, reference: Arc<Canvas>, pen: Point, mode: PenMode) -> Result<Self> {
        check_same_shape(&canvas, &reference)?;
        if !canvas.contains(pen) {
            return Err(Error::invalid("pen position is off the canvas"));
        }
        mode.index(canvas.media())?;
        Ok(Observation {
            canvas,
            reference,
            pen,
            mode,
        })
    }

    pub fn canvas(&self) -> &Arc<Canvas> {
        &self.canvas
    }

    pub fn reference(&self) -> &Arc<Canvas> {
        &self.reference
    }

    pub fn pen(&self) -> Point {
        self.pen
    }

    /// Mode shown in the color map: the last executed action's mode.
    pub fn mode(&self) -> PenMode {
        self.mode
    }

    pub fn media(&self) -> MediaType {
        self.canvas.media()
    }

    pub fn side(&self) -> usize {
        self.canvas.side()
    }

    /// `[L, L, 2c + 2]`
    pub fn global_shape(&self) -> [usize; 3] {
        let c = self.canvas.channels();
        [self.side(), self.side(), 2 * c + 2]
    }

    /// `[11, 11, 2c]`
    pub fn local_shape(&self) -> [usize; 3] {
        [PATCH_SIZE, PATCH_SIZE, 2 * self.canvas.channels()]
    }

    /// Global stream in channel-major layout: canvas channels, reference
    /// channels, distance map, color map. Pixels become ink density in [0, 1],
    /// so the white background is 0.
    pub fn global_planes(&self) -> Vec<f64> {
        let side = self.side();
        let plane = side * side;
        let c = self.canvas.channels();
        let mut out = vec![0.0; plane * (2 * c + 2)];
        scatter_pixels(self.canvas.pixels(), c, &mut out[..plane * c]);
        scatter_pixels(self.reference.pixels(), c, &mut out[plane * c..2 * plane * c]);
        let dist = distance_map(self.pen, side).expect("pen is on canvas");
        out[2 * plane * c..(2 * c + 1) * plane].copy_from_slice(&dist);
        let color = self.mode.index(self.media()).expect("validated mode") as f64;
        out[(2 * c + 1) * plane..].fill(color);
        out
    }

    /// Local stream in channel-major layout: canvas patch then reference
    /// patch, both centered on the pen.
    pub fn local_planes(&self) -> Vec<f64> {
        let c = self.canvas.channels();
        let plane = PATCH_SIZE * PATCH_SIZE;
        let mut out = vec![0.0; plane * 2 * c];
        let cp = self.canvas.crop_patch(self.pen, PATCH_SIZE).expect("odd patch");
        let rp = self.reference.crop_patch(self.pen, PATCH_SIZE).expect("odd patch");
        scatter_pixels(&cp.data, c, &mut out[..plane * c]);
        scatter_pixels(&rp.data, c, &mut out[plane * c..]);
        out
    }
}

/// Interleaved u8 pixels to channel-major ink density `(255 − v) / 255`.
fn scatter_pixels(src: &[u8], channels: usize, dst: &mut [f64]) {
    let plane = src.len() / channels;
    for (i, px) in src.chunks_exact(channels).enumerate() {
        for (c, &v) in px.iter().enumerate() {
            dst[c * plane + i] = (255 - v) as f64 / 255.0;
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: Reward,
    pub terminal: bool,
}

/// One drawing episode against a fixed reference.
#[derive(Debug, Clone)]
pub struct EpisodeState {
    canvas: Canvas,
    reference: Arc<Canvas>,
    brush: BrushParams,
    pen: Point,
    mode: PenMode,
    step_index: usize,
    max_steps: usize,
    squared_error: u64,
    history: Vec<Point>,
}

impl EpisodeState {
    /// Blank canvas, pen lifted at `start` (canvas center when `None`).
    pub fn reset(reference: Arc<Canvas>, start: Option<Point>, max_steps: usize) -> Result<Self> {
        let brush = reference.media().default_brush();
        Self::reset_with_brush(reference, start, max_steps, brush)
    }

    pub fn reset_with_brush(
        reference: Arc<Canvas>,
        start: Option<Point>,
        max_steps: usize,
        brush: BrushParams,
    ) -> Result<Self> {
        brush.validate(reference.media())?;
        let canvas = reference.blank_like();
        let pen = start.unwrap_or_else(|| canvas.center());
        if !canvas.contains(pen) {
            return Err(Error::invalid(format!("start ({}, {}) is off the canvas", pen.x, pen.y)));
        }
        let squared_error = squared_error(&canvas, &reference)?;
        let mut history = Vec::with_capacity(HISTORY);
        history.push(pen);
        Ok(EpisodeState {
            canvas,
            reference,
            brush,
            pen,
            mode: PenMode::Up,
            step_index: 0,
            max_steps,
            squared_error,
            history,
        })
    }

    pub fn canvas(&self) -> &Canvas {
        &self.canvas
    }

    pub fn reference(&self) -> &Arc<Canvas> {
        &self.reference
    }

    pub fn media(&self) -> MediaType {
        self.canvas.media()
    }

    pub fn brush(&self) -> &BrushParams {
        &self.brush
    }

    pub fn pen(&self) -> Point {
        self.pen
    }

    pub fn mode(&self) -> PenMode {
        self.mode
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn max_steps(&self) -> usize {
        self.max_steps
    }

    pub fn is_terminal(&self) -> bool {
        self.step_index >= self.max_steps
    }

    /// Current `s_k`.
    pub fn similarity(&self) -> f64 {
        let side = self.canvas.side() as f64;
        self.squared_error as f64 / (side * side)
    }

    /// Up to the last four pen positions, oldest first.
    pub fn history(&self) -> &[Point] {
        &self.history
    }

    pub fn is_stuck(&self) -> bool {
        is_stuck(&self.history)
    }

    pub fn observe(&self) -> Observation {
        Observation {
            canvas: Arc::new(self.canvas.clone()),
            reference: Arc::clone(&self.reference),
            pen: self.pen,
            mode: self.mode,
        }
    }

    pub fn step_index_action(&mut self, index: usize, params: &RewardParams) -> Result<StepOutcome> {
        let action = Action::from_index(index, self.media())?;
        self.step(action, params)
    }

    pub fn step(&mut self, action: Action, params: &RewardParams) -> Result<StepOutcome> {
        if self.is_terminal() {
            return Err(Error::InvalidState(format!(
                "episode already finished after {} steps",
                self.step_index
            )));
        }
        action.index(self.media())?;
        let from = self.pen;
        let to = self.canvas.clamp(Point::new(from.x + action.dx, from.y + action.dy));

        let mut reward = Reward::default();
        if action.mode.is_down() {
            self.canvas.render_segment(from, to, action.mode, &self.brush)?;
            if from.chebyshev(to) < params.min_draw_step {
                reward.step_penalty = params.step_penalty;
            }
            if self.media().is_color() && self.color_is_wrong(from, to, action.mode)? {
                reward.color_penalty = params.beta * params.color_penalty;
            }
        } else if from != to {
            reward.step_penalty = params.step_penalty;
        }

        let before = self.squared_error;
        self.squared_error = squared_error(&self.canvas, &self.reference)?;
        let side = self.canvas.side() as f64;
        reward.pixel = (before as i64 - self.squared_error as i64) as f64 / (side * side);

        self.pen = to;
        self.mode = action.mode;
        self.step_index += 1;
        if self.history.len() == HISTORY {
            self.history.remove(0);
        }
        self.history.push(to);

        Ok(StepOutcome {
            observation: self.observe(),
            reward,
            terminal: self.is_terminal(),
        })
    }

    /// A drawn color is wrong when no non-background reference pixel under
    /// the segment's footprint has that color as its nearest primary.
    fn color_is_wrong(&self, from: Point, to: Point, mode: PenMode) -> Result<bool> {
        let wanted = match mode {
            PenMode::Red => 0,
            PenMode::Green => 1,
            PenMode::Blue => 2,
            _ => return Ok(false),
        };
        let footprint = self.reference.segment_footprint(from, to, &self.brush)?;
        Ok(!footprint
            .into_iter()
            .any(|p| !self.reference.is_background(p) && color_class(self.reference.pixel(p)) == wanted))
    }
}
