//! QuickDraw simplified-drawing ingestion (newline-delimited JSON).
//!
//! Each record looks like
//! `{"word": "cat", "drawing": [[[x0, x1, ...], [y0, y1, ...]], ...], ...}`;
//! unknown fields are ignored.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use serde::Deserialize;

use crate::canvas::{Canvas, MediaType, PenMode, Point};
use crate::error::{Error, Result};

/// Margin kept free on every side by [`normalize_drawing`].
pub const NORMALIZE_MARGIN: i32 = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VectorDrawing {
    /// Polylines with at least two points each.
    pub strokes: Vec<Vec<Point>>,
    pub label: String,
}

impl VectorDrawing {
    /// `(min, max)` corners over all points, or `None` for an empty drawing.
    pub fn bounding_box(&self) -> Option<(Point, Point)> {
        let mut it = self.strokes.iter().flatten();
        let first = *it.next()?;
        Some(it.fold((first, first), |(lo, hi), p| {
            (
                Point::new(lo.x.min(p.x), lo.y.min(p.y)),
                Point::new(hi.x.max(p.x), hi.y.max(p.y)),
            )
        }))
    }
}

#[derive(Debug, Clone)]
pub struct ParseReport {
    pub drawings: Vec<VectorDrawing>,
    /// Lines that were not valid drawing records.
    pub skipped: usize,
}

#[derive(Deserialize)]
struct RawRecord {
    word: String,
    drawing: Vec<Vec<Vec<f64>>>,
}

fn convert(raw: RawRecord) -> Option<VectorDrawing> {
    let mut strokes = Vec::with_capacity(raw.drawing.len());
    for stroke in raw.drawing {
        // [xs, ys] or [xs, ys, ts]
        if stroke.len() < 2 || stroke[0].len() != stroke[1].len() || stroke[0].is_empty() {
            return None;
        }
        let mut pts = Vec::with_capacity(stroke[0].len());
        for (&x, &y) in stroke[0].iter().zip(&stroke[1]) {
            if !x.is_finite() || !y.is_finite() || x.abs() > 1e7 || y.abs() > 1e7 {
                return None;
            }
            pts.push(Point::new(x.round() as i32, y.round() as i32));
        }
        if pts.len() == 1 {
            // a dot: keep it as a zero-length segment
            pts.push(pts[0]);
        }
        strokes.push(pts);
    }
    if strokes.is_empty() {
        return None;
    }
    Some(VectorDrawing {
        strokes,
        label: raw.word,
    })
}

/// Parses every line of `reader`; malformed lines are counted and skipped.
pub fn parse_quickdraw<R: BufRead>(reader: R) -> Result<ParseReport> {
    let mut drawings = Vec::new();
    let mut skipped = 0;
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io("<quickdraw stream>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RawRecord>(&line).ok().and_then(convert) {
            Some(d) => drawings.push(d),
            None => skipped += 1,
        }
    }
    if drawings.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no parsable QuickDraw records ({skipped} skipped)"
        )));
    }
    Ok(ParseReport { drawings, skipped })
}

pub fn load_quickdraw(path: impl AsRef<Path>) -> Result<ParseReport> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_quickdraw(std::io::BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Uniformly scales and translates `d` so its bounding box sits centered in
/// `[margin, side-1-margin]²`, preserving aspect ratio. The longer side
/// always spans exactly `side - 1 - 2*margin` pixels. Integer offsets make
/// the transform idempotent.
pub fn normalize_drawing(d: &VectorDrawing, side: usize) -> Result<VectorDrawing> {
    let (lo, hi) = d
        .bounding_box()
        .ok_or_else(|| Error::invalid("cannot normalize an empty drawing"))?;
    let span = side as i32 - 1 - 2 * NORMALIZE_MARGIN;
    if span < 1 {
        return Err(Error::invalid(format!("canvas side {side} too small to normalize onto")));
    }
    let extent = (hi.x - lo.x).max(hi.y - lo.y);
    if extent == 0 {
        let c = (side / 2) as i32;
        let strokes = d
            .strokes
            .iter()
            .map(|s| s.iter().map(|_| Point::new(c, c)).collect())
            .collect();
        return Ok(VectorDrawing {
            strokes,
            label: d.label.clone(),
        });
    }
    let scale = span as f64 / extent as f64;
    let scaled: Vec<Vec<(i32, i32)>> = d
        .strokes
        .iter()
        .map(|s| {
            s.iter()
                .map(|p| {
                    (
                        ((p.x - lo.x) as f64 * scale).round() as i32,
                        ((p.y - lo.y) as f64 * scale).round() as i32,
                    )
                })
                .collect()
        })
        .collect();
    let w = scaled.iter().flatten().map(|p| p.0).max().unwrap_or(0);
    let h = scaled.iter().flatten().map(|p| p.1).max().unwrap_or(0);
    let ox = NORMALIZE_MARGIN + (span - w) / 2;
    let oy = NORMALIZE_MARGIN + (span - h) / 2;
    let strokes = scaled
        .into_iter()
        .map(|s| s.into_iter().map(|(x, y)| Point::new(x + ox, y + oy)).collect())
        .collect();
    Ok(VectorDrawing {
        strokes,
        label: d.label.clone(),
    })
}

/// Renders every polyline of a normalized drawing onto a blank canvas with
/// the medium's default brush. `colors` is cycled over the strokes.
pub fn rasterize_reference(d: &VectorDrawing, side: usize, media: MediaType, colors: &[PenMode]) -> Result<Canvas> {
    let mut canvas = Canvas::new(side, media)?;
    if d.strokes.is_empty() {
        return Ok(canvas);
    }
    if colors.is_empty() {
        return Err(Error::invalid("at least one stroke color is required"));
    }
    let brush = media.default_brush();
    for (i, stroke) in d.strokes.iter().enumerate() {
        let mode = colors[i % colors.len()];
        if !mode.is_down() {
            return Err(Error::invalid("reference strokes must be drawn with the pen down"));
        }
        for pair in stroke.windows(2) {
            canvas.render_segment(pair[0], pair[1], mode, &brush)?;
        }
    }
    Ok(canvas)
}

/// Groups drawings by label, keeping at most `per_class` of each in input
/// order.
pub fn group_by_class(drawings: &[VectorDrawing], per_class: usize) -> BTreeMap<String, Vec<VectorDrawing>> {
    let mut out: BTreeMap<String, Vec<VectorDrawing>> = BTreeMap::new();
    for d in drawings {
        let bucket = out.entry(d.label.clone()).or_default();
        if bucket.len() < per_class {
            bucket.push(d.clone());
        }
    }
    out
}
