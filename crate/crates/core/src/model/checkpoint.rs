//! Binary checkpoint format, all integers and floats little-endian:
//!
//! ```text
//! magic "MTADVCKP" | version u32
//! input_dim u32 | hidden_dim u32 | num_layers u32
//! tensor_count u32 | per tensor: rank u32, dims u32 x rank, values f64 x len
//! gamma_count u32  | per entry: attribute u8, value f64
//! rng seed u64     | rng epoch u64
//! ```
//!
//! Tensors appear in [`ModelState::params`] order.

use std::collections::BTreeMap;
use std::path::Path;

use super::{EncoderConfig, ModelState, RngState};
use crate::attr::Attribute;
use crate::error::{Error, Result};
use crate::fsutil;
use crate::tensor::Tensor;

const MAGIC: &[u8; 8] = b"MTADVCKP";
const VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::State(format!("{v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

pub fn encode_checkpoint(state: &ModelState) -> Result<Vec<u8>> {
    state.validate(f64::INFINITY)?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    put_u32(&mut out, state.config.input_dim)?;
    put_u32(&mut out, state.config.hidden_dim)?;
    put_u32(&mut out, state.config.num_layers)?;
    let tensors: Vec<&Tensor> = state.params().collect();
    put_u32(&mut out, tensors.len())?;
    for t in tensors {
        put_u32(&mut out, t.shape().len())?;
        for &d in t.shape() {
            put_u32(&mut out, d)?;
        }
        for v in t.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    put_u32(&mut out, state.gamma.len())?;
    for (attr, g) in &state.gamma {
        out.push(attr.index() as u8);
        out.extend_from_slice(&g.to_le_bytes());
    }
    out.extend_from_slice(&state.rng.seed.to_le_bytes());
    out.extend_from_slice(&state.rng.epoch.to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Data("checkpoint truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ModelState> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Data("not a checkpoint file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(Error::Data(format!("unsupported checkpoint version {version}")));
    }
    let config = EncoderConfig {
        input_dim: r.u32()?,
        hidden_dim: r.u32()?,
        num_layers: r.u32()?,
    };
    config.validate().map_err(|e| Error::Data(e.to_string()))?;
    let mut state = ModelState::zeros(config).map_err(|e| Error::Data(e.to_string()))?;
    let count = r.u32()?;
    let expected = state.params().count();
    if count != expected {
        return Err(Error::Data(format!(
            "checkpoint has {count} tensors, configuration needs {expected}"
        )));
    }
    for slot in state.params_mut() {
        let rank = r.u32()?;
        let shape = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        if shape != slot.shape() {
            return Err(Error::Data(format!(
                "checkpoint tensor shape {shape:?}, expected {:?}",
                slot.shape()
            )));
        }
        for v in slot.values_mut() {
            *v = r.f64()?;
        }
    }
    let mut gamma = BTreeMap::new();
    for _ in 0..r.u32()? {
        let attr = Attribute::from_index(r.u8()? as usize)
            .ok_or_else(|| Error::Data("unknown attribute in checkpoint".into()))?;
        gamma.insert(attr, r.f64()?);
    }
    state.gamma = gamma;
    state.rng = RngState {
        seed: r.u64()?,
        epoch: r.u64()?,
    };
    if r.pos != bytes.len() {
        return Err(Error::Data("trailing bytes after checkpoint".into()));
    }
    state
        .validate(f64::INFINITY)
        .map_err(|e| Error::Data(e.to_string()))?;
    Ok(state)
}

pub fn write_checkpoint(path: &Path, state: &ModelState) -> Result<()> {
    fsutil::write_atomic(path, &encode_checkpoint(state)?)
}

pub fn read_checkpoint(path: &Path) -> Result<ModelState> {
    decode_checkpoint(&fsutil::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_byte_exact() {
        let mut gamma = BTreeMap::new();
        gamma.insert(Attribute::Gender, 0.1 + 0.2);
        gamma.insert(Attribute::Age, 7.0);
        let mut state = ModelState::init(EncoderConfig::default(), gamma, 77).unwrap();
        state.rng.epoch = 12;
        let bytes = encode_checkpoint(&state).unwrap();
        let back = decode_checkpoint(&bytes).unwrap();
        assert_eq!(back, state);
        assert_eq!(encode_checkpoint(&back).unwrap(), bytes);
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let state = ModelState::init(EncoderConfig::default(), BTreeMap::new(), 1).unwrap();
        let bytes = encode_checkpoint(&state).unwrap();
        assert!(decode_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_checkpoint(&extra).is_err());
        let mut bad = bytes;
        bad[0] = b'X';
        assert!(decode_checkpoint(&bad).is_err());
    }
}
