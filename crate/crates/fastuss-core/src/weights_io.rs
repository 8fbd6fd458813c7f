//! Weight container: a flat little-endian tensor archive with a trailing
//! checksum.
//!
//! Layout (all integers little-endian, no alignment padding):
//!   magic "FTSS" | u16 version | u64 config_hash | u64 seed | u32 count
//!   then per tensor:
//!     u16 name_len | name bytes | u8 dtype (0 = f32, 1 = f64) | u8 rank
//!     | u32 dims[rank] | raw payload
//!   then u64 FNV-1a checksum of every preceding byte.

use crate::error::{Error, Result};
use crate::model::WeightBundle;
use crate::real::{Dtype, Real};
use crate::rng::fnv1a64;
use crate::tensor::Tensor;
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"FTSS";
pub const VERSION: u16 = 1;

pub fn save_weights<T: Real>(path: &Path, bundle: &WeightBundle<T>) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&bundle.config_hash.to_le_bytes());
    out.extend_from_slice(&bundle.seed.to_le_bytes());
    out.extend_from_slice(&(bundle.len() as u32).to_le_bytes());
    for (name, tensor) in bundle.iter() {
        let name_bytes = name.as_bytes();
        if name_bytes.len() > u16::MAX as usize {
            return Err(Error::Format("tensor name too long".into()));
        }
        out.extend_from_slice(&(name_bytes.len() as u16).to_le_bytes());
        out.extend_from_slice(name_bytes);
        out.push(T::DTYPE.tag());
        out.push(tensor.shape().len() as u8);
        for &d in tensor.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in tensor.data() {
            out.extend_from_slice(&v.to_le_bytes_vec());
        }
    }
    let checksum = fnv1a64(&out);
    out.extend_from_slice(&checksum.to_le_bytes());
    std::fs::File::create(path)?.write_all(&out)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let slice = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| Error::Format("truncated weight file".into()))?;
        self.pos += n;
        Ok(slice)
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self) -> Result<u64> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes(b.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
}

/// Load a weight container. The trailing checksum is always verified; when
/// `expect_config_hash` is given a mismatch is an error under `strict` and a
/// warning otherwise.
pub fn load_weights<T: Real>(
    path: &Path,
    expect_config_hash: Option<u64>,
    strict: bool,
) -> Result<WeightBundle<T>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < MAGIC.len() + 2 + 8 + 8 + 4 + 8 {
        return Err(Error::Format("weight file too small".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().unwrap());
    let computed = fnv1a64(body);
    if stored != computed {
        return Err(Error::Format(format!(
            "checksum mismatch: stored {stored:#018x}, computed {computed:#018x}"
        )));
    }
    let mut cur = Cursor { bytes: body, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(Error::Format("bad magic; not a weight container".into()));
    }
    let version = cur.u16()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported container version {version}")));
    }
    let config_hash = cur.u64()?;
    let seed = cur.u64()?;
    if let Some(expect) = expect_config_hash {
        if expect != config_hash {
            let msg = format!(
                "weight file was built for a different configuration \
                 (hash {config_hash:#018x}, expected {expect:#018x})"
            );
            if strict {
                return Err(Error::Config(msg));
            }
            eprintln!("warning: {msg}");
        }
    }
    let count = cur.u32()? as usize;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = cur.u16()? as usize;
        let name = String::from_utf8(cur.take(name_len)?.to_vec())
            .map_err(|_| Error::Format("tensor name is not utf-8".into()))?;
        let dtype = Dtype::from_tag(cur.u8()?)
            .ok_or_else(|| Error::Format("unknown dtype tag".into()))?;
        if dtype != T::DTYPE {
            return Err(Error::Format(format!(
                "tensor '{name}' stored as {dtype:?}, requested {:?}",
                T::DTYPE
            )));
        }
        let rank = cur.u8()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(cur.u32()? as usize);
        }
        let n: usize = shape.iter().product();
        let payload = cur.take(n * dtype.size_bytes())?;
        let data: Vec<T> = payload
            .chunks_exact(dtype.size_bytes())
            .map(T::from_le_slice)
            .collect();
        entries.push((name, Tensor::new(shape, data)?));
    }
    if cur.pos != body.len() {
        return Err(Error::Format("trailing bytes after last tensor".into()));
    }
    WeightBundle::from_entries(config_hash, seed, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_weights, preset};

    fn tmp(name: &str) -> std::path::PathBuf {
        std::env::temp_dir().join(format!("fastuss-wio-{}-{name}", std::process::id()))
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let cfg = preset("TOY").unwrap();
        let bundle = init_weights::<f32>(&cfg, 77).unwrap();
        let path = tmp("roundtrip.ftss");
        save_weights(&path, &bundle).unwrap();
        let back: WeightBundle<f32> = load_weights(&path, Some(cfg.hash()), true).unwrap();
        assert_eq!(back.config_hash, bundle.config_hash);
        assert_eq!(back.seed, 77);
        assert_eq!(back.len(), bundle.len());
        for ((na, ta), (nb, tb)) in bundle.iter().zip(back.iter()) {
            assert_eq!(na, nb);
            assert_eq!(ta.shape(), tb.shape());
            let bits_a: Vec<u32> = ta.data().iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u32> = tb.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn corrupted_byte_fails_the_checksum() {
        let cfg = preset("TOY").unwrap();
        let bundle = init_weights::<f32>(&cfg, 5).unwrap();
        let path = tmp("corrupt.ftss");
        save_weights(&path, &bundle).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        std::fs::write(&path, &bytes).unwrap();
        let err = load_weights::<f32>(&path, None, false).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "got {err:?}");
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn wrong_preset_strict_load_fails_lenient_warns() {
        let toy = preset("TOY").unwrap();
        let bundle = init_weights::<f32>(&toy, 5).unwrap();
        let path = tmp("wrongcfg.ftss");
        save_weights(&path, &bundle).unwrap();
        let other = preset("TOY-CAUSAL").unwrap();
        assert!(load_weights::<f32>(&path, Some(other.hash()), true).is_err());
        assert!(load_weights::<f32>(&path, Some(other.hash()), false).is_ok());
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn f64_bundles_round_trip() {
        let cfg = preset("TOY").unwrap();
        let bundle = init_weights::<f64>(&cfg, 9).unwrap();
        let path = tmp("f64.ftss");
        save_weights(&path, &bundle).unwrap();
        let back: WeightBundle<f64> = load_weights(&path, None, false).unwrap();
        for ((_, ta), (_, tb)) in bundle.iter().zip(back.iter()) {
            let bits_a: Vec<u64> = ta.data().iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = tb.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
        // f32 view of an f64 file must be refused, not mangled
        assert!(load_weights::<f32>(&path, None, false).is_err());
        std::fs::remove_file(&path).ok();
    }
}
