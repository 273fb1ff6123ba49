//! Versioned binary container: 4 magic bytes, a little-endian `u16` format
//! version, then a sequence of `u32`-length-prefixed records.
//!
//! Demo datasets and replay snapshots use magic `SDQD`; network checkpoints
//! use `SDQW`.

use std::path::Path;

use crate::error::{Error, Result};

pub const DATA_MAGIC: &[u8; 4] = b"SDQD";
pub const WEIGHTS_MAGIC: &[u8; 4] = b"SDQW";
pub const FORMAT_VERSION: u16 = 1;

pub struct ContainerWriter {
    buf: Vec<u8>,
}

impl ContainerWriter {
    pub fn new(magic: &[u8; 4]) -> Self {
        let mut buf = Vec::with_capacity(1024);
        buf.extend_from_slice(magic);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        ContainerWriter { buf }
    }

    pub fn record(&mut self, payload: &[u8]) -> Result<()> {
        let len = u32::try_from(payload.len()).map_err(|_| Error::invalid("record larger than 4 GiB"))?;
        self.buf.extend_from_slice(&len.to_le_bytes());
        self.buf.extend_from_slice(payload);
        Ok(())
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn write_to(self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.buf).map_err(|e| Error::io(path, e))
    }
}

/// Splits a container into its records after checking magic and version.
pub fn read_records<'a>(bytes: &'a [u8], magic: &[u8; 4]) -> Result<Vec<&'a [u8]>> {
    if bytes.len() < 6 || &bytes[..4] != magic {
        return Err(Error::Format(format!(
            "bad magic: expected {:?}",
            String::from_utf8_lossy(magic)
        )));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    let mut records = Vec::new();
    let mut rest = &bytes[6..];
    while !rest.is_empty() {
        if rest.len() < 4 {
            return Err(Error::Format("truncated record header".into()));
        }
        let len = u32::from_le_bytes(rest[..4].try_into().unwrap()) as usize;
        rest = &rest[4..];
        if rest.len() < len {
            return Err(Error::Format("truncated record".into()));
        }
        records.push(&rest[..len]);
        rest = &rest[len..];
    }
    Ok(records)
}

pub fn read_file(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Little-endian record payload builder.
#[derive(Default)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u16(&mut self, v: u16) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn f64s(&mut self, v: &[f64]) -> &mut Self {
        for x in v {
            self.f64(*x);
        }
        self
    }

    /// `u32` length then the raw bytes.
    pub fn bytes(&mut self, v: &[u8]) -> &mut Self {
        self.u32(v.len() as u32);
        self.buf.extend_from_slice(v);
        self
    }

    pub fn str(&mut self, v: &str) -> &mut Self {
        self.bytes(v.as_bytes())
    }

    pub fn finish(&mut self) -> Vec<u8> {
        std::mem::take(&mut self.buf)
    }
}

pub struct Decoder<'a> {
    buf: &'a [u8],
}

impl<'a> Decoder<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Decoder { buf }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::Format("record ended early".into()));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("length overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    pub fn str(&mut self) -> Result<&'a str> {
        std::str::from_utf8(self.bytes()?).map_err(|_| Error::Format("invalid utf-8 string".into()))
    }

    pub fn finish(&self) -> Result<()> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(Error::Format(format!("{} trailing bytes in record", self.buf.len())))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_round_trip() {
        let mut w = ContainerWriter::new(DATA_MAGIC);
        w.record(b"abc").unwrap();
        w.record(&[]).unwrap();
        let mut e = Encoder::new();
        e.u8(7).u16(513).u32(70000).u64(1 << 40).f64(-0.5).str("hi");
        let payload = e.finish();
        w.record(&payload).unwrap();
        let bytes = w.into_bytes();
        assert_eq!(&bytes[..6], b"SDQD\x01\x00");

        let recs = read_records(&bytes, DATA_MAGIC).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[0], b"abc");
        assert!(recs[1].is_empty());
        let mut d = Decoder::new(recs[2]);
        assert_eq!(d.u8().unwrap(), 7);
        assert_eq!(d.u16().unwrap(), 513);
        assert_eq!(d.u32().unwrap(), 70000);
        assert_eq!(d.u64().unwrap(), 1 << 40);
        assert_eq!(d.f64().unwrap(), -0.5);
        assert_eq!(d.str().unwrap(), "hi");
        d.finish().unwrap();
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let mut w = ContainerWriter::new(DATA_MAGIC);
        w.record(b"abcdef").unwrap();
        let bytes = w.into_bytes();
        assert!(matches!(read_records(&bytes, WEIGHTS_MAGIC), Err(Error::Format(_))));
        assert!(matches!(read_records(&bytes[..bytes.len() - 1], DATA_MAGIC), Err(Error::Format(_))));
        let mut bad_version = bytes.clone();
        bad_version[4] = 9;
        assert!(matches!(read_records(&bad_version, DATA_MAGIC), Err(Error::Format(_))));
        assert!(Decoder::new(&[1, 2]).u32().is_err());
    }
}
