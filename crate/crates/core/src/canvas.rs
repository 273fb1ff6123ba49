//! Deterministic rasterizing painting engine.
//!
//! A [`Canvas`] is an `L×L` grid of 8-bit intensities with one channel for
//! sketches and three for the color media. Each environment step renders one
//! pen segment through [`Canvas::render_segment`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest canvas side accepted by [`Canvas::new`].
pub const MIN_SIDE: usize = 16;

/// Background intensity of a fresh canvas.
pub const BACKGROUND: u8 = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MediaType {
    Sketch,
    ColorSketch,
    Watercolor,
}

const GRAY_MODES: [PenMode; 2] = [PenMode::Up, PenMode::Down];
const COLOR_MODES: [PenMode; 4] = [PenMode::Up, PenMode::Red, PenMode::Green, PenMode::Blue];

impl MediaType {
    pub fn channels(self) -> usize {
        match self {
            MediaType::Sketch => 1,
            MediaType::ColorSketch | MediaType::Watercolor => 3,
        }
    }

    pub fn is_color(self) -> bool {
        self.channels() == 3
    }

    /// Pen modes valid for this medium, in action-encoding order.
    pub fn pen_modes(self) -> &'static [PenMode] {
        if self.is_color() {
            &COLOR_MODES
        } else {
            &GRAY_MODES
        }
    }

    pub fn default_brush(self) -> BrushParams {
        match self {
            MediaType::Sketch | MediaType::ColorSketch => BrushParams::hard(1),
            MediaType::Watercolor => BrushParams {
                width: 3,
                opacity: 0.5,
                softness: 1.5,
            },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MediaType::Sketch => "sketch",
            MediaType::ColorSketch => "color_sketch",
            MediaType::Watercolor => "watercolor",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            MediaType::Sketch => 0,
            MediaType::ColorSketch => 1,
            MediaType::Watercolor => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(MediaType::Sketch),
            1 => Ok(MediaType::ColorSketch),
            2 => Ok(MediaType::Watercolor),
            other => Err(Error::Format(format!("unknown media code {other}"))),
        }
    }
}

impl std::str::FromStr for MediaType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sketch" => Ok(MediaType::Sketch),
            "color_sketch" | "color-sketch" => Ok(MediaType::ColorSketch),
            "watercolor" => Ok(MediaType::Watercolor),
            other => Err(Error::invalid(format!("unknown media type `{other}`"))),
        }
    }
}

/// Pen state. `Down` is the black pen of the sketch medium; the color media
/// draw with one of the three primaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenMode {
    Up,
    Down,
    Red,
    Green,
    Blue,
}

impl PenMode {
    /// Position of this mode in `media.pen_modes()`. This is also the value
    /// written into the color-map channel.
    pub fn index(self, media: MediaType) -> Result<usize> {
        media
            .pen_modes()
            .iter()
            .position(|&m| m == self)
            .ok_or_else(|| Error::invalid(format!("pen mode {self:?} is not valid for {media:?}")))
    }

    pub fn from_index(index: usize, media: MediaType) -> Result<Self> {
        media
            .pen_modes()
            .get(index)
            .copied()
            .ok_or_else(|| Error::invalid(format!("pen mode index {index} out of range for {media:?}")))
    }

    pub fn is_down(self) -> bool {
        self != PenMode::Up
    }

    /// Ink color painted by this mode, or `None` when the pen is lifted.
    pub fn ink(self) -> Option<[u8; 3]> {
        match self {
            PenMode::Up => None,
            PenMode::Down => Some([0, 0, 0]),
            PenMode::Red => Some([255, 0, 0]),
            PenMode::Green => Some([0, 255, 0]),
            PenMode::Blue => Some([0, 0, 255]),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PenMode::Up => "up",
            PenMode::Down => "down",
            PenMode::Red => "red",
            PenMode::Green => "green",
            PenMode::Blue => "blue",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: i32,
    pub y: i32,
}

impl Point {
    pub const fn new(x: i32, y: i32) -> Self {
        Point { x, y }
    }

    /// max(|dx|, |dy|)
    pub fn chebyshev(self, other: Point) -> i32 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }
}

impl From<(i32, i32)> for Point {
    fn from((x, y): (i32, i32)) -> Self {
        Point { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrushParams {
    /// Stroke width in pixels, at least 1.
    pub width: u32,
    /// Peak stamp opacity in (0, 1]. Always 1 for the hard media.
    pub opacity: f64,
    /// Gaussian falloff radius in pixels. Only the watercolor medium uses it.
    pub softness: f64,
}

impl BrushParams {
    pub fn hard(width: u32) -> Self {
        BrushParams {
            width,
            opacity: 1.0,
            softness: 0.0,
        }
    }

    pub fn validate(&self, media: MediaType) -> Result<()> {
        if self.width < 1 {
            return Err(Error::invalid("brush width must be at least 1"));
        }
        if !(self.opacity > 0.0 && self.opacity <= 1.0) {
            return Err(Error::invalid(format!("brush opacity {} outside (0, 1]", self.opacity)));
        }
        if !(self.softness >= 0.0) || !self.softness.is_finite() {
            return Err(Error::invalid(format!("brush softness {} must be >= 0", self.softness)));
        }
        if media != MediaType::Watercolor && (self.opacity != 1.0 || self.softness != 0.0) {
            return Err(Error::invalid("hard media require opacity 1 and softness 0"));
        }
        Ok(())
    }
}

/// Pixels of the discrete line from `from` to `to`, both endpoints included.
///
/// Integer Bresenham walk; the sequence starts at `from` and ends at `to`.
pub fn line_points(from: Point, to: Point) -> Vec<Point> {
    let dx = (to.x - from.x).abs();
    let dy = -(to.y - from.y).abs();
    let sx = if from.x < to.x { 1 } else { -1 };
    let sy = if from.y < to.y { 1 } else { -1 };
    let mut err = dx + dy;
    let (mut x, mut y) = (from.x, from.y);
    let mut out = Vec::with_capacity((dx.max(-dy) + 1) as usize);
    loop {
        out.push(Point::new(x, y));
        if x == to.x && y == to.y {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
    out
}

/// Stamp offsets with their alpha for one brush placement.
fn stamp_kernel(brush: &BrushParams, media: MediaType) -> Vec<(i32, i32, f64)> {
    if media == MediaType::Watercolor {
        if brush.softness == 0.0 {
            return vec![(0, 0, brush.opacity)];
        }
        let radius = brush.width as f64 / 2.0 + 2.0 * brush.softness;
        let reach = radius.floor() as i32;
        let two_s2 = 2.0 * brush.softness * brush.softness;
        let mut kernel = Vec::new();
        for oy in -reach..=reach {
            for ox in -reach..=reach {
                let d2 = (ox * ox + oy * oy) as f64;
                if d2 <= radius * radius {
                    kernel.push((ox, oy, brush.opacity * (-d2 / two_s2).exp()));
                }
            }
        }
        kernel
    } else {
        let radius = (brush.width as f64 - 1.0) / 2.0;
        let reach = radius.floor() as i32;
        let mut kernel = Vec::new();
        for oy in -reach..=reach {
            for ox in -reach..=reach {
                if ((ox * ox + oy * oy) as f64) <= radius * radius {
                    kernel.push((ox, oy, 1.0));
                }
            }
        }
        kernel
    }
}

/// Square `size×size` window cut out of a canvas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Patch {
    pub size: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

impl Patch {
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.size + x) * self.channels + c]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Canvas {
    side: usize,
    media: MediaType,
    pixels: Vec<u8>,
}

impl Canvas {
    /// All-white canvas of `side×side` pixels.
    pub fn new(side: usize, media: MediaType) -> Result<Self> {
        if side < MIN_SIDE {
            return Err(Error::invalid(format!(
                "canvas side {side} is below the minimum of {MIN_SIDE}"
            )));
        }
        if side > u16::MAX as usize {
            return Err(Error::invalid(format!("canvas side {side} is too large")));
        }
        Ok(Canvas {
            side,
            media,
            pixels: vec![BACKGROUND; side * side * media.channels()],
        })
    }

    /// Wraps a raw interleaved pixel buffer.
    pub fn from_pixels(side: usize, media: MediaType, pixels: Vec<u8>) -> Result<Self> {
        let mut canvas = Canvas::new(side, media)?;
        if pixels.len() != canvas.pixels.len() {
            return Err(Error::invalid(format!(
                "expected {} pixel values for a {side}x{side} {:?} canvas, got {}",
                canvas.pixels.len(),
                media,
                pixels.len()
            )));
        }
        canvas.pixels = pixels;
        Ok(canvas)
    }

    pub fn blank_like(&self) -> Self {
        Canvas {
            side: self.side,
            media: self.media,
            pixels: vec![BACKGROUND; self.pixels.len()],
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn media(&self) -> MediaType {
        self.media
    }

    pub fn channels(&self) -> usize {
        self.media.channels()
    }

    /// Interleaved row-major pixel buffer (`y`, `x`, channel).
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= 0 && p.y >= 0 && (p.x as usize) < self.side && (p.y as usize) < self.side
    }

    /// Canvas center, which is also the default pen start.
    pub fn center(&self) -> Point {
        let c = (self.side / 2) as i32;
        Point::new(c, c)
    }

    /// Clamps a point onto the canvas.
    pub fn clamp(&self, p: Point) -> Point {
        let max = self.side as i32 - 1;
        Point::new(p.x.clamp(0, max), p.y.clamp(0, max))
    }

    pub fn pixel(&self, p: Point) -> &[u8] {
        let c = self.channels();
        let i = (p.y as usize * self.side + p.x as usize) * c;
        &self.pixels[i..i + c]
    }

    pub fn set_pixel(&mut self, p: Point, value: &[u8]) {
        let c = self.channels();
        let i = (p.y as usize * self.side + p.x as usize) * c;
        self.pixels[i..i + c].copy_from_slice(value);
    }

    /// `true` when every channel of `p` equals the background value.
    pub fn is_background(&self, p: Point) -> bool {
        self.pixel(p).iter().all(|&v| v == BACKGROUND)
    }

    fn check_on_canvas(&self, p: Point) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "point ({}, {}) is outside the {}x{} canvas",
                p.x, p.y, self.side, self.side
            )))
        }
    }

    /// On-canvas pixels touched by a segment rendered with `brush`, in
    /// rendering order. May contain repeats where stamps overlap.
    pub fn segment_footprint(&self, from: Point, to: Point, brush: &BrushParams) -> Result<Vec<Point>> {
        self.check_on_canvas(from)?;
        self.check_on_canvas(to)?;
        let kernel = stamp_kernel(brush, self.media);
        let mut out = Vec::new();
        for p in line_points(from, to) {
            for &(ox, oy, _) in &kernel {
                let q = Point::new(p.x + ox, p.y + oy);
                if self.contains(q) {
                    out.push(q);
                }
            }
        }
        Ok(out)
    }

    /// Renders one pen segment. A lifted pen leaves the canvas untouched.
    pub fn render_segment(&mut self, from: Point, to: Point, mode: PenMode, brush: &BrushParams) -> Result<()> {
        self.check_on_canvas(from)?;
        self.check_on_canvas(to)?;
        mode.index(self.media)?;
        let Some(ink) = mode.ink() else {
            return Ok(());
        };
        brush.validate(self.media)?;
        let kernel = stamp_kernel(brush, self.media);
        let channels = self.channels();
        for p in line_points(from, to) {
            for &(ox, oy, alpha) in &kernel {
                let q = Point::new(p.x + ox, p.y + oy);
                if !self.contains(q) {
                    continue;
                }
                let i = (q.y as usize * self.side + q.x as usize) * channels;
                let px = &mut self.pixels[i..i + channels];
                match self.media {
                    MediaType::Sketch => px[0] = ink[0],
                    MediaType::ColorSketch => px.copy_from_slice(&ink),
                    MediaType::Watercolor => {
                        for (v, &target) in px.iter_mut().zip(&ink) {
                            let mixed = *v as f64 * (1.0 - alpha) + target as f64 * alpha;
                            *v = mixed.round().clamp(0.0, 255.0) as u8;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// `size×size` window centered at `center`; off-canvas cells read as
    /// background.
    pub fn crop_patch(&self, center: Point, size: usize) -> Result<Patch> {
        if size % 2 == 0 {
            return Err(Error::invalid(format!("patch size {size} must be odd")));
        }
        let channels = self.channels();
        let half = (size / 2) as i32;
        let mut data = vec![BACKGROUND; size * size * channels];
        for py in 0..size {
            let y = center.y - half + py as i32;
            if y < 0 || y as usize >= self.side {
                continue;
            }
            for px in 0..size {
                let x = center.x - half + px as i32;
                if x < 0 || x as usize >= self.side {
                    continue;
                }
                let src = (y as usize * self.side + x as usize) * channels;
                let dst = (py * size + px) * channels;
                data[dst..dst + channels].copy_from_slice(&self.pixels[src..src + channels]);
            }
        }
        Ok(Patch { size, channels, data })
    }

    /// Writes the canvas as an 8-bit grayscale or RGB PNG.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let side = self.side as u32;
        let result = if self.channels() == 1 {
            image::GrayImage::from_raw(side, side, self.pixels.clone())
                .expect("buffer length matches dimensions")
                .save_with_format(path, image::ImageFormat::Png)
        } else {
            image::RgbImage::from_raw(side, side, self.pixels.clone())
                .expect("buffer length matches dimensions")
                .save_with_format(path, image::ImageFormat::Png)
        };
        result.map_err(|e| image_error(path, e))
    }

    /// Reads a square PNG. Single-channel images load as [`MediaType::Sketch`],
    /// everything else as [`MediaType::ColorSketch`]; see [`Canvas::with_media`].
    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|e| image_error(path, e))?;
        let (w, h) = (img.width(), img.height());
        if w != h {
            return Err(Error::Format(format!("{}: image is {w}x{h}, expected a square canvas", path.display())));
        }
        match img {
            image::DynamicImage::ImageLuma8(buf) => Canvas::from_pixels(w as usize, MediaType::Sketch, buf.into_raw()),
            other => Canvas::from_pixels(w as usize, MediaType::ColorSketch, other.into_rgb8().into_raw()),
        }
    }

    /// Relabels the medium; the channel count must agree.
    pub fn with_media(mut self, media: MediaType) -> Result<Self> {
        if media.channels() != self.channels() {
            return Err(Error::ConfigMismatch(format!(
                "canvas has {} channel(s) but {:?} needs {}",
                self.channels(),
                media,
                media.channels()
            )));
        }
        self.media = media;
        Ok(self)
    }
}

fn image_error(path: &Path, e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other}", path.display())),
    }
}
