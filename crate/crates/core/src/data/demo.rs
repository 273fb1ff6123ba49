//! Demonstration synthesis for supervised pretraining.
//!
//! Strokes from a bank are dropped at random places on a blank canvas. The
//! pen then visits them in nearest-first order: lifted moves to the stroke's
//! nearer endpoint, pen-down moves along it. Every move is split greedily so
//! each action stays within the ±5 pixel range, and the reference is
//! rendered from those same split segments, so replaying the labeled actions
//! reproduces it exactly.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;

use crate::canvas::{Canvas, MediaType, PenMode, Point};
use crate::data::quickdraw::{normalize_drawing, VectorDrawing};
use crate::env::{Action, EpisodeState, Observation, RewardParams, MAX_OFFSET};
use crate::error::{Error, Result};

/// Polylines stored with their bounding box at the origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrokeBank {
    strokes: Vec<Vec<Point>>,
}

fn to_origin(stroke: &[Point]) -> Vec<Point> {
    let min_x = stroke.iter().map(|p| p.x).min().unwrap_or(0);
    let min_y = stroke.iter().map(|p| p.y).min().unwrap_or(0);
    stroke.iter().map(|p| Point::new(p.x - min_x, p.y - min_y)).collect()
}

fn extent(stroke: &[Point]) -> (i32, i32) {
    (
        stroke.iter().map(|p| p.x).max().unwrap_or(0),
        stroke.iter().map(|p| p.y).max().unwrap_or(0),
    )
}

impl StrokeBank {
    pub fn new(strokes: Vec<Vec<Point>>) -> Result<Self> {
        if strokes.is_empty() {
            return Err(Error::invalid("stroke bank is empty"));
        }
        if strokes.iter().any(|s| s.len() < 2) {
            return Err(Error::invalid("every bank stroke needs at least two points"));
        }
        Ok(StrokeBank {
            strokes: strokes.iter().map(|s| to_origin(s)).collect(),
        })
    }

    /// Strokes of `drawings` after normalizing each drawing onto a
    /// `side×side` canvas.
    pub fn from_drawings(drawings: &[VectorDrawing], side: usize) -> Result<Self> {
        let mut strokes = Vec::new();
        for d in drawings {
            strokes.extend(normalize_drawing(d, side)?.strokes);
        }
        StrokeBank::new(strokes)
    }

    /// Random straight lines, two-segment polylines and circular arcs whose
    /// bounding box fits in `max_extent`.
    pub fn procedural<R: Rng + ?Sized>(rng: &mut R, count: usize, max_extent: i32) -> Result<Self> {
        if max_extent < 2 {
            return Err(Error::invalid("procedural strokes need max_extent >= 2"));
        }
        let mut strokes = Vec::with_capacity(count);
        while strokes.len() < count {
            let kind = rng.random_range(0..3);
            let stroke: Vec<Point> = match kind {
                0 => {
                    let l = rng.random_range(max_extent as f64 * 0.4..=max_extent as f64);
                    let a = rng.random_range(0.0..2.0 * PI);
                    vec![
                        Point::new(0, 0),
                        Point::new((l * a.cos()).round() as i32, (l * a.sin()).round() as i32),
                    ]
                }
                1 => {
                    let mut pts = vec![Point::new(0, 0)];
                    let mut a = rng.random_range(0.0..2.0 * PI);
                    for _ in 0..2 {
                        let l = rng.random_range(max_extent as f64 * 0.3..=max_extent as f64 * 0.6);
                        let last = *pts.last().unwrap();
                        pts.push(Point::new(
                            last.x + (l * a.cos()).round() as i32,
                            last.y + (l * a.sin()).round() as i32,
                        ));
                        a += rng.random_range(PI / 4.0..=3.0 * PI / 4.0) * if rng.random() { 1.0 } else { -1.0 };
                    }
                    pts
                }
                _ => {
                    let r = rng.random_range(max_extent as f64 * 0.3..=max_extent as f64 * 0.5);
                    let start = rng.random_range(0.0..2.0 * PI);
                    let sweep = rng.random_range(PI / 2.0..=PI * 1.25);
                    let n = 4;
                    (0..=n)
                        .map(|i| {
                            let t = start + sweep * i as f64 / n as f64;
                            Point::new((r * t.cos()).round() as i32, (r * t.sin()).round() as i32)
                        })
                        .collect()
                }
            };
            let stroke = to_origin(&stroke);
            let (w, h) = extent(&stroke);
            if w <= max_extent && h <= max_extent && (w > 0 || h > 0) {
                strokes.push(stroke);
            }
        }
        StrokeBank::new(strokes)
    }

    /// Random walks of 1 to `max_edges` edges, each edge one maximal move
    /// (Chebyshev length `step`). Consecutive edges turn by at most 90°.
    pub fn fixed_step<R: Rng + ?Sized>(rng: &mut R, count: usize, step: i32, max_edges: usize) -> Result<Self> {
        if step < 1 || max_edges == 0 {
            return Err(Error::invalid("fixed-step strokes need step >= 1 and max_edges >= 1"));
        }
        let mut strokes = Vec::with_capacity(count);
        for _ in 0..count {
            let edges = rng.random_range(1..=max_edges);
            let mut angle = rng.random_range(0.0..2.0 * PI);
            let mut pts = vec![Point::new(0, 0)];
            for _ in 0..edges {
                let (c, s) = (angle.cos(), angle.sin());
                let k = step as f64 / c.abs().max(s.abs());
                let last = *pts.last().unwrap();
                pts.push(Point::new(last.x + (k * c).round() as i32, last.y + (k * s).round() as i32));
                angle += rng.random_range(-PI / 2.0..=PI / 2.0);
            }
            strokes.push(pts);
        }
        StrokeBank::new(strokes)
    }

    pub fn len(&self) -> usize {
        self.strokes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strokes.is_empty()
    }

    pub fn strokes(&self) -> &[Vec<Point>] {
        &self.strokes
    }
}

/// Waypoints from `from` to `to` taking the largest allowed step on each
/// axis every move. Excludes `from`, ends at `to`; empty when they coincide.
pub fn chunk_path(from: Point, to: Point) -> Vec<Point> {
    let mut out = Vec::new();
    let mut cur = from;
    while cur != to {
        let dx = (to.x - cur.x).clamp(-MAX_OFFSET, MAX_OFFSET);
        let dy = (to.y - cur.y).clamp(-MAX_OFFSET, MAX_OFFSET);
        cur = Point::new(cur.x + dx, cur.y + dy);
        out.push(cur);
    }
    out
}

/// Next lifted-pen position on the way from `from` to `to`: `to` itself
/// once it is in range, otherwise a full step along whichever of the eight
/// compass directions is closest to the true bearing.
pub fn travel_step(from: Point, to: Point) -> Point {
    let (dx, dy) = (to.x - from.x, to.y - from.y);
    if dx.abs() <= MAX_OFFSET && dy.abs() <= MAX_OFFSET {
        return to;
    }
    let octant = ((dy as f64).atan2(dx as f64) / (PI / 4.0)).round();
    let (ux, uy) = (octant * PI / 4.0).sin_cos();
    let (ux, uy) = (uy.round() as i32, ux.round() as i32);
    Point::new(from.x + MAX_OFFSET * ux, from.y + MAX_OFFSET * uy)
}

/// Polyline with every edge split into in-range moves.
fn densify(stroke: &[Point]) -> Vec<Point> {
    let mut out = vec![stroke[0]];
    for pair in stroke.windows(2) {
        out.extend(chunk_path(pair[0], pair[1]));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemoConfig {
    pub side: usize,
    pub media: MediaType,
    /// Strokes placed per episode.
    pub n_strokes: usize,
    /// Append a final stay-put action once every stroke is drawn.
    pub terminal_stay: bool,
    /// Start the pen on the first stroke drawn instead of at the canvas
    /// center, so pen-up travel only happens between strokes.
    pub start_on_stroke: bool,
    /// Placement attempts per stroke before it is skipped.
    pub placement_retries: usize,
}

impl DemoConfig {
    pub fn new(side: usize, media: MediaType) -> Self {
        DemoConfig {
            side,
            media,
            n_strokes: 2,
            terminal_stay: false,
            start_on_stroke: true,
            placement_retries: 16,
        }
    }
}

/// A demonstration episode stored compactly as its reference plus the
/// labeled action sequence; samples are regenerated by replay.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoEpisode {
    pub reference: Arc<Canvas>,
    pub start: Point,
    pub actions: Vec<Action>,
}

/// Supervised example: the observation before a step and the action taken.
#[derive(Debug, Clone)]
pub struct DemoSample {
    pub observation: Observation,
    pub action: Action,
}

impl DemoEpisode {
    fn replay_states(&self) -> Result<(Vec<DemoSample>, Canvas)> {
        let mut state = EpisodeState::reset(Arc::clone(&self.reference), Some(self.start), self.actions.len())?;
        let params = RewardParams::for_media(self.reference.media());
        let mut samples = Vec::with_capacity(self.actions.len());
        for &action in &self.actions {
            samples.push(DemoSample {
                observation: state.observe(),
                action,
            });
            state.step(action, &params)?;
        }
        Ok((samples, state.canvas().clone()))
    }

    /// One sample per labeled action.
    pub fn samples(&self) -> Result<Vec<DemoSample>> {
        Ok(self.replay_states()?.0)
    }

    /// Canvas after executing every labeled action from a blank start.
    pub fn replay(&self) -> Result<Canvas> {
        Ok(self.replay_states()?.1)
    }

    /// Pen positions from the start through every move.
    pub fn pen_path(&self) -> Vec<Point> {
        let mut pen = self.start;
        let mut out = Vec::with_capacity(self.actions.len() + 1);
        out.push(pen);
        for a in &self.actions {
            pen = Point::new(pen.x + a.dx, pen.y + a.dy);
            out.push(pen);
        }
        out
    }

    /// The episode mapped by one of the eight symmetries of the square.
    /// Bit 0 mirrors x, bit 1 mirrors y, bit 2 swaps the axes (applied
    /// last).
    pub fn transformed(&self, symmetry: u8) -> Result<DemoEpisode> {
        self.mapped(symmetry, (0, 0))
    }

    /// [`Self::transformed`] followed by a shift of the whole drawing. The
    /// reference is re-rendered from the mapped moves, so the result
    /// replays exactly; fails if the pen would leave the canvas.
    pub fn mapped(&self, symmetry: u8, shift: (i32, i32)) -> Result<DemoEpisode> {
        if symmetry >= 8 {
            return Err(Error::invalid(format!("symmetry {symmetry} is not in 0..8")));
        }
        let max = self.reference.side() as i32 - 1;
        // positions mirror about the canvas, displacements about zero
        let map = |x: i32, y: i32, position: bool| {
            let o = if position { max } else { 0 };
            let x = if symmetry & 1 != 0 { o - x } else { x };
            let y = if symmetry & 2 != 0 { o - y } else { y };
            if symmetry & 4 != 0 { (y, x) } else { (x, y) }
        };
        let (sx, sy) = map(self.start.x, self.start.y, true);
        let start = Point::new(sx + shift.0, sy + shift.1);
        let brush = self.reference.media().default_brush();
        let mut reference = Canvas::new(self.reference.side(), self.reference.media())?;
        let off = || Error::invalid(format!("shift {shift:?} moves the pen off the canvas"));
        if !reference.contains(start) {
            return Err(off());
        }
        let mut pen = start;
        let mut actions = Vec::with_capacity(self.actions.len());
        for a in &self.actions {
            let (dx, dy) = map(a.dx, a.dy, false);
            let next = Point::new(pen.x + dx, pen.y + dy);
            if !reference.contains(next) {
                return Err(off());
            }
            if a.mode != PenMode::Up {
                reference.render_segment(pen, next, a.mode, &brush)?;
            }
            actions.push(Action::new(dx, dy, a.mode)?);
            pen = next;
        }
        Ok(DemoEpisode {
            reference: Arc::new(reference),
            start,
            actions,
        })
    }

    /// A copy under a uniformly drawn symmetry and an in-bounds shift.
    /// Episodes whose moves were clamped at the border keep no shift.
    pub fn augmented<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DemoEpisode> {
        let base = self.transformed(rng.random_range(0..8))?;
        let path = base.pen_path();
        let max = base.reference.side() as i32 - 1;
        let lo = |f: fn(&Point) -> i32| path.iter().map(f).min().unwrap_or(0);
        let hi = |f: fn(&Point) -> i32| path.iter().map(f).max().unwrap_or(0);
        let (x0, x1, y0, y1) = (lo(|p| p.x), hi(|p| p.x), lo(|p| p.y), hi(|p| p.y));
        if x0 < 0 || y0 < 0 || x1 > max || y1 > max {
            return Ok(base);
        }
        let shift = (rng.random_range(-x0..=max - x1), rng.random_range(-y0..=max - y1));
        base.mapped(0, shift)
    }
}

/// Builds one demonstration episode.
pub fn synthesize_demo_episode<R: Rng + ?Sized>(bank: &StrokeBank, rng: &mut R, cfg: &DemoConfig) -> Result<DemoEpisode> {
    if bank.is_empty() {
        return Err(Error::invalid("stroke bank is empty"));
    }
    if cfg.n_strokes == 0 {
        return Err(Error::invalid("n_strokes must be at least 1"));
    }
    let mut reference = Canvas::new(cfg.side, cfg.media)?;
    let max = cfg.side as i32 - 1;

    let mut pending: Vec<(Vec<Point>, PenMode)> = Vec::new();
    for _ in 0..cfg.n_strokes {
        let stroke = &bank.strokes[rng.random_range(0..bank.len())];
        let (w, h) = extent(stroke);
        let mut placed = None;
        for _ in 0..cfg.placement_retries.max(1) {
            let ox = rng.random_range(-w..=max);
            let oy = rng.random_range(-h..=max);
            if ox >= 0 && oy >= 0 && ox + w <= max && oy + h <= max {
                placed = Some((ox, oy));
                break;
            }
        }
        let Some((ox, oy)) = placed else { continue };
        let moved: Vec<Point> = stroke.iter().map(|p| Point::new(p.x + ox, p.y + oy)).collect();
        let mode = if cfg.media.is_color() {
            cfg.media.pen_modes()[rng.random_range(1..cfg.media.pen_modes().len())]
        } else {
            PenMode::Down
        };
        pending.push((densify(&moved), mode));
    }

    let dist2 = |a: Point, b: Point| (a.x - b.x).pow(2) + (a.y - b.y).pow(2);
    // (stroke, reversed, squared distance) of the endpoint nearest `pen`;
    // ties go to the earlier stroke
    let nearest = |pending: &[(Vec<Point>, PenMode)], pen: Point| {
        let mut best = (0, false, i32::MAX);
        for (i, (s, _)) in pending.iter().enumerate() {
            let (d0, d1) = (dist2(pen, s[0]), dist2(pen, *s.last().unwrap()));
            if d0 < best.2 {
                best = (i, false, d0);
            }
            if d1 < best.2 {
                best = (i, true, d1);
            }
        }
        best
    };
    let mut start = reference.center();
    if cfg.start_on_stroke {
        // the endpoint nearest the center, which the search below picks first
        let center = start;
        if let Some(p) = pending
            .iter()
            .flat_map(|(s, _)| [s[0], *s.last().unwrap()])
            .min_by_key(|&p| dist2(center, p))
        {
            start = p;
        }
    }
    let mut pen = start;
    let mut actions = Vec::new();
    while !pending.is_empty() {
        // the target is re-picked after every lifted move, so each label
        // depends only on the pen position and what is left to draw
        let mut best = nearest(&pending, pen);
        while best.2 > 0 {
            let (s, _) = &pending[best.0];
            let target = if best.1 { *s.last().unwrap() } else { s[0] };
            let p = reference.clamp(travel_step(pen, target));
            actions.push(Action::new(p.x - pen.x, p.y - pen.y, PenMode::Up)?);
            pen = p;
            best = nearest(&pending, pen);
        }
        let (mut path, mode) = pending.remove(best.0);
        if best.1 {
            path.reverse();
        }
        let brush = cfg.media.default_brush();
        for &p in &path[1..] {
            reference.render_segment(pen, p, mode, &brush)?;
            actions.push(Action::new(p.x - pen.x, p.y - pen.y, mode)?);
            pen = p;
        }
        if path.len() == 1 {
            // zero-length stroke: a single dot
            reference.render_segment(pen, pen, mode, &brush)?;
            actions.push(Action::new(0, 0, mode)?);
        }
    }
    if cfg.terminal_stay {
        actions.push(Action::STAY);
    }
    Ok(DemoEpisode {
        reference: Arc::new(reference),
        start,
        actions,
    })
}

/// Synthesizes episodes until at least `min_samples` labeled steps exist.
pub fn synthesize_demo_set<R: Rng + ?Sized>(
    bank: &StrokeBank,
    rng: &mut R,
    cfg: &DemoConfig,
    min_samples: usize,
) -> Result<Vec<DemoEpisode>> {
    let mut episodes = Vec::new();
    let (mut total, mut empty_run) = (0, 0);
    while total < min_samples {
        let ep = synthesize_demo_episode(bank, rng, cfg)?;
        if ep.actions.is_empty() {
            empty_run += 1;
            if empty_run == 64 {
                return Err(Error::invalid("no bank stroke fits on the canvas"));
            }
            continue;
        }
        empty_run = 0;
        total += ep.actions.len();
        episodes.push(ep);
    }
    Ok(episodes)
}
