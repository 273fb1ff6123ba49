//! `SDQW` checkpoints: a header record with the network config as JSON,
//! then one record per tensor holding its name, shape and values.

use std::path::Path;

use crate::container::{read_file, read_records, ContainerWriter, Decoder, Encoder, WEIGHTS_MAGIC};
use crate::error::{Error, Result};
use crate::nn::network::{NetConfig, QNetwork};

pub fn encode_checkpoint(net: &QNetwork) -> Result<Vec<u8>> {
    let mut w = ContainerWriter::new(WEIGHTS_MAGIC);
    let mut e = Encoder::new();
    let config = serde_json::to_string(net.config()).map_err(|e| Error::Format(e.to_string()))?;
    w.record(&e.str(&config).u32(net.layout().len() as u32).finish())?;
    for info in net.layout() {
        e.str(&info.name).u8(info.shape.len() as u8);
        for &d in &info.shape {
            e.u32(d as u32);
        }
        e.f64s(&net.params()[info.range()]);
        w.record(&e.finish())?;
    }
    Ok(w.into_bytes())
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<QNetwork> {
    let records = read_records(bytes, WEIGHTS_MAGIC)?;
    let first = records.first().ok_or_else(|| Error::Format("checkpoint has no header".into()))?;
    let mut h = Decoder::new(first);
    let config: NetConfig =
        serde_json::from_str(h.str()?).map_err(|e| Error::Format(format!("bad network config: {e}")))?;
    let count = h.u32()? as usize;
    h.finish()?;
    let mut net = QNetwork::zeros(config).map_err(|e| Error::Format(e.to_string()))?;
    if count != net.layout().len() || records.len() != count + 1 {
        return Err(Error::Format(format!(
            "checkpoint holds {} tensors, config implies {}",
            records.len() - 1,
            net.layout().len()
        )));
    }
    for (rec, info) in records[1..].iter().zip(net.layout().to_vec()) {
        let mut d = Decoder::new(rec);
        let name = d.str()?;
        let rank = d.u8()? as usize;
        let shape = (0..rank).map(|_| Ok(d.u32()? as usize)).collect::<Result<Vec<_>>>()?;
        if name != info.name || shape != info.shape {
            return Err(Error::Format(format!(
                "tensor {name} {shape:?} does not match expected {} {:?}",
                info.name, info.shape
            )));
        }
        let values = d.f64s(info.len())?;
        d.finish()?;
        net.params_mut()[info.range()].copy_from_slice(&values);
    }
    Ok(net)
}

pub fn save_checkpoint(path: impl AsRef<Path>, net: &QNetwork) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_checkpoint(net)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<QNetwork> {
    decode_checkpoint(&read_file(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canvas::MediaType;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bit_exact_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = QNetwork::new(NetConfig::desk(MediaType::ColorSketch), &mut rng).unwrap();
        let bytes = encode_checkpoint(&net).unwrap();
        assert_eq!(&bytes[..4], b"SDQW");
        let back = decode_checkpoint(&bytes).unwrap();
        assert_eq!(back.config(), net.config());
        assert!(back.params().iter().zip(net.params()).all(|(a, b)| a.to_bits() == b.to_bits()));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.sdqw");
        save_checkpoint(&path, &net).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), net);
    }

    #[test]
    fn rejects_corruption() {
        let net = QNetwork::zeros(NetConfig::desk(MediaType::Sketch).without_local()).unwrap();
        let bytes = encode_checkpoint(&net).unwrap();
        let mut wrong_magic = bytes.clone();
        wrong_magic[3] = b'D';
        assert!(matches!(decode_checkpoint(&wrong_magic), Err(Error::Format(_))));
        assert!(matches!(decode_checkpoint(&bytes[..bytes.len() - 8]), Err(Error::Format(_))));
        assert!(matches!(load_checkpoint("/nonexistent/net.sdqw"), Err(Error::Io { .. })));
    }
}
