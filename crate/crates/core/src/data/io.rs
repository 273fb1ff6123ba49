//! Demo datasets and replay snapshots in the `SDQD` container.
//!
//! The first record is a header whose leading byte names the payload kind.
//! Canvases are stored as `side: u16, media: u8, pixels`.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use crate::canvas::{Canvas, MediaType, PenMode, Point};
use crate::container::{read_file, read_records, ContainerWriter, Decoder, Encoder, DATA_MAGIC};
use crate::data::demo::DemoEpisode;
use crate::data::replay::{PerConfig, PrioritizedReplay, Transition};
use crate::env::{Action, Observation};
use crate::error::{Error, Result};

const KIND_DEMO: u8 = 1;
const KIND_REPLAY: u8 = 2;

fn put_canvas(e: &mut Encoder, c: &Canvas) {
    e.u16(c.side() as u16).u8(c.media().code()).bytes(c.pixels());
}

fn get_canvas(d: &mut Decoder) -> Result<Canvas> {
    let side = d.u16()? as usize;
    let media = MediaType::from_code(d.u8()?)?;
    let pixels = d.bytes()?.to_vec();
    Canvas::from_pixels(side, media, pixels).map_err(|e| Error::Format(e.to_string()))
}

fn put_point(e: &mut Encoder, p: Point) {
    e.u32(p.x as u32).u32(p.y as u32);
}

fn get_point(d: &mut Decoder) -> Result<Point> {
    Ok(Point::new(d.u32()? as i32, d.u32()? as i32))
}

fn header<'a>(records: &[&'a [u8]], kind: u8) -> Result<Decoder<'a>> {
    let first = records.first().ok_or_else(|| Error::Format("container has no header".into()))?;
    let mut d = Decoder::new(first);
    let found = d.u8()?;
    if found != kind {
        return Err(Error::Format(format!("expected payload kind {kind}, found {found}")));
    }
    Ok(d)
}

pub fn encode_demo_set(episodes: &[DemoEpisode]) -> Result<Vec<u8>> {
    let mut w = ContainerWriter::new(DATA_MAGIC);
    let mut e = Encoder::new();
    w.record(&e.u8(KIND_DEMO).u32(episodes.len() as u32).finish())?;
    for ep in episodes {
        put_canvas(&mut e, &ep.reference);
        put_point(&mut e, ep.start);
        e.u32(ep.actions.len() as u32);
        for a in &ep.actions {
            e.u16(a.index(ep.reference.media())? as u16);
        }
        w.record(&e.finish())?;
    }
    Ok(w.into_bytes())
}

pub fn decode_demo_set(bytes: &[u8]) -> Result<Vec<DemoEpisode>> {
    let records = read_records(bytes, DATA_MAGIC)?;
    let mut h = header(&records, KIND_DEMO)?;
    let count = h.u32()? as usize;
    h.finish()?;
    if records.len() != count + 1 {
        return Err(Error::Format(format!(
            "header announces {count} episodes, found {}",
            records.len() - 1
        )));
    }
    records[1..]
        .iter()
        .map(|rec| {
            let mut d = Decoder::new(rec);
            let reference = get_canvas(&mut d)?;
            let start = get_point(&mut d)?;
            let n = d.u32()? as usize;
            let actions = (0..n)
                .map(|_| Action::from_index(d.u16()? as usize, reference.media()).map_err(|e| Error::Format(e.to_string())))
                .collect::<Result<Vec<_>>>()?;
            d.finish()?;
            if !reference.contains(start) {
                return Err(Error::Format("episode start is off the canvas".into()));
            }
            Ok(DemoEpisode {
                reference: Arc::new(reference),
                start,
                actions,
            })
        })
        .collect()
}

pub fn save_demo_set(path: impl AsRef<Path>, episodes: &[DemoEpisode]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_demo_set(episodes)?).map_err(|e| Error::io(path, e))
}

pub fn load_demo_set(path: impl AsRef<Path>) -> Result<Vec<DemoEpisode>> {
    decode_demo_set(&read_file(path)?)
}

/// Canvases shared between observations are written once.
#[derive(Default)]
struct CanvasTable {
    ids: HashMap<*const Canvas, u32>,
    order: Vec<Arc<Canvas>>,
}

impl CanvasTable {
    fn id(&mut self, c: &Arc<Canvas>) -> u32 {
        let next = self.order.len() as u32;
        *self.ids.entry(Arc::as_ptr(c)).or_insert_with(|| {
            self.order.push(Arc::clone(c));
            next
        })
    }
}

fn put_obs(e: &mut Encoder, table: &mut CanvasTable, o: &Observation) -> Result<()> {
    e.u32(table.id(o.canvas())).u32(table.id(o.reference()));
    put_point(e, o.pen());
    e.u8(o.mode().index(o.media())? as u8);
    Ok(())
}

fn get_obs(d: &mut Decoder, canvases: &[Arc<Canvas>]) -> Result<Observation> {
    let mut canvas = || -> Result<Arc<Canvas>> {
        let id = d.u32()? as usize;
        canvases
            .get(id)
            .cloned()
            .ok_or_else(|| Error::Format(format!("canvas id {id} out of range")))
    };
    let (c, r) = (canvas()?, canvas()?);
    let pen = get_point(d)?;
    let mode = PenMode::from_index(d.u8()? as usize, c.media()).map_err(|e| Error::Format(e.to_string()))?;
    Observation::new(c, r, pen, mode).map_err(|e| Error::Format(e.to_string()))
}

/// Layout: header, one record per distinct canvas, one per transition.
pub fn encode_replay(replay: &PrioritizedReplay<Transition>) -> Result<Vec<u8>> {
    let mut table = CanvasTable::default();
    let mut bodies = Vec::with_capacity(replay.len());
    let mut e = Encoder::new();
    for (i, t) in replay.items().iter().enumerate() {
        put_obs(&mut e, &mut table, &t.obs)?;
        e.u32(t.action as u32).f64(t.reward);
        put_obs(&mut e, &mut table, &t.next_obs)?;
        e.u8(t.terminal as u8).f64(replay.tree().get(i));
        bodies.push(e.finish());
    }

    let cfg = replay.config();
    let mut w = ContainerWriter::new(DATA_MAGIC);
    e.u8(KIND_REPLAY)
        .u32(cfg.capacity as u32)
        .f64(cfg.alpha)
        .f64(cfg.epsilon)
        .f64(cfg.beta_start)
        .f64(cfg.beta_end)
        .u32(replay.cursor() as u32)
        .f64(replay.max_priority())
        .u32(table.order.len() as u32)
        .u32(bodies.len() as u32);
    w.record(&e.finish())?;
    for c in &table.order {
        put_canvas(&mut e, c);
        w.record(&e.finish())?;
    }
    for b in &bodies {
        w.record(b)?;
    }
    Ok(w.into_bytes())
}

pub fn decode_replay(bytes: &[u8]) -> Result<PrioritizedReplay<Transition>> {
    let records = read_records(bytes, DATA_MAGIC)?;
    let mut h = header(&records, KIND_REPLAY)?;
    let cfg = PerConfig {
        capacity: h.u32()? as usize,
        alpha: h.f64()?,
        epsilon: h.f64()?,
        beta_start: h.f64()?,
        beta_end: h.f64()?,
    };
    let cursor = h.u32()? as usize;
    let max_priority = h.f64()?;
    let n_canvas = h.u32()? as usize;
    let n_items = h.u32()? as usize;
    h.finish()?;
    if records.len() != 1 + n_canvas + n_items {
        return Err(Error::Format("replay snapshot record count mismatch".into()));
    }
    let canvases = records[1..1 + n_canvas]
        .iter()
        .map(|rec| {
            let mut d = Decoder::new(rec);
            let c = get_canvas(&mut d)?;
            d.finish()?;
            Ok(Arc::new(c))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut items = Vec::with_capacity(n_items);
    let mut leaves = Vec::with_capacity(n_items);
    for rec in &records[1 + n_canvas..] {
        let mut d = Decoder::new(rec);
        let obs = get_obs(&mut d, &canvases)?;
        let action = d.u32()? as usize;
        let reward = d.f64()?;
        let next_obs = get_obs(&mut d, &canvases)?;
        let terminal = d.u8()? != 0;
        leaves.push(d.f64()?);
        d.finish()?;
        items.push(Transition {
            obs,
            action,
            reward,
            next_obs,
            terminal,
        });
    }
    PrioritizedReplay::from_parts(cfg, items, &leaves, cursor, max_priority)
}

pub fn save_replay(path: impl AsRef<Path>, replay: &PrioritizedReplay<Transition>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_replay(replay)?).map_err(|e| Error::io(path, e))
}

pub fn load_replay(path: impl AsRef<Path>) -> Result<PrioritizedReplay<Transition>> {
    decode_replay(&read_file(path)?)
}
