//! Self-describing weight files shared by the autoencoder and predictors.
//!
//! Layout, little-endian: magic `OCVK`, u16 format version, u32 header
//! length, the header as canonical `key = value` text, u32 tensor count, then
//! per tensor: u16 name length, UTF-8 name, u8 rank, u32 per dimension, and
//! the values as f32.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kv::KvMap;
use crate::nn::{to_f64_vec, ParamStore};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"OCVK";
pub const CHECKPOINT_FORMAT_VERSION: u16 = 1;

/// A named tensor as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub struct StoredTensor {
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: KvMap,
    pub tensors: BTreeMap<String, StoredTensor>,
}

impl Checkpoint {
    /// Snapshot of every parameter in `store`.
    pub fn from_store(header: KvMap, store: &ParamStore) -> Result<Self> {
        let mut tensors = BTreeMap::new();
        for (name, var) in store.iter() {
            let values = to_f64_vec(var.as_tensor())?
                .into_iter()
                .map(|v| v as f32)
                .collect();
            tensors.insert(
                name.to_string(),
                StoredTensor {
                    shape: var.dims().to_vec(),
                    values,
                },
            );
        }
        Ok(Self { header, tensors })
    }

    /// Copies weights into `store`. The name sets must match exactly.
    pub fn load_into(&self, store: &ParamStore) -> Result<()> {
        let missing: Vec<&str> = store
            .iter()
            .map(|(n, _)| n)
            .filter(|n| !self.tensors.contains_key(*n))
            .collect();
        let extra: Vec<&String> = self
            .tensors
            .keys()
            .filter(|n| store.get(n).is_none())
            .collect();
        if !missing.is_empty() || !extra.is_empty() {
            return Err(Error::SchemaMismatch(format!(
                "checkpoint weights do not match model (missing: {missing:?}, unexpected: {extra:?})"
            )));
        }
        for (name, t) in &self.tensors {
            store.assign(name, &t.shape, &t.values)?;
        }
        Ok(())
    }

    pub fn kind(&self) -> Option<&str> {
        self.header.get("kind")
    }

    pub fn config_hash(&self) -> Option<&str> {
        self.header.get("config_hash")
    }

    /// Refuses a checkpoint built for another configuration unless `force`.
    pub fn check_hash(&self, expected: &str, force: bool) -> Result<()> {
        let found = self.config_hash().unwrap_or("");
        if found != expected && !force {
            return Err(Error::HashMismatch {
                expected: expected.to_string(),
                found: found.to_string(),
            });
        }
        Ok(())
    }

    pub fn encode(&self) -> Vec<u8> {
        let header = self.header.canonical();
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(t.shape.len() as u8);
            for &d in &t.shape {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in &t.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, path };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::format(path, "not a checkpoint (bad magic)"));
        }
        let version = r.u16()?;
        if version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::format(
                path,
                format!("unsupported checkpoint version {version}"),
            ));
        }
        let hlen = r.u32()? as usize;
        let text = std::str::from_utf8(r.take(hlen)?)
            .map_err(|_| Error::format(path, "header is not UTF-8"))?;
        let header = KvMap::parse(text).map_err(|e| Error::format(path, e))?;
        let n = r.u32()? as usize;
        let mut tensors = BTreeMap::new();
        for _ in 0..n {
            let nlen = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(nlen)?)
                .map_err(|_| Error::format(path, "tensor name is not UTF-8"))?
                .to_string();
            let rank = r.take(1)?[0] as usize;
            let shape = (0..rank)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let count: usize = shape.iter().product();
            let raw = r.take(count * 4)?;
            let values = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            tensors.insert(name, StoredTensor { shape, values });
        }
        if r.pos != bytes.len() {
            return Err(Error::format(path, "trailing bytes after last tensor"));
        }
        Ok(Self { header, tensors })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes, path)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::format(self.path, "truncated checkpoint"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::DType;

    fn store(seed: u64) -> ParamStore {
        let mut s = ParamStore::new(DType::F32, seed);
        s.uniform("a.weight", &[2, 3], 1.0).unwrap();
        s.uniform("b", &[4], 1.0).unwrap();
        s
    }

    #[test]
    fn round_trip_restores_weights() {
        let mut h = KvMap::new();
        h.insert("kind", "test");
        h.insert("config_hash", "abc");
        let ck = Checkpoint::from_store(h, &store(1)).unwrap();
        let bytes = ck.encode();
        let back = Checkpoint::decode(&bytes, Path::new("x")).unwrap();
        assert_eq!(back, ck);
        let target = store(2);
        back.load_into(&target).unwrap();
        assert_eq!(Checkpoint::from_store(back.header.clone(), &target).unwrap(), ck);
    }

    #[test]
    fn hash_mismatch_refused_unless_forced() {
        let mut h = KvMap::new();
        h.insert("config_hash", "abc");
        let ck = Checkpoint::from_store(h, &store(0)).unwrap();
        assert!(ck.check_hash("abc", false).is_ok());
        assert!(matches!(ck.check_hash("xyz", false), Err(Error::HashMismatch { .. })));
        assert!(ck.check_hash("xyz", true).is_ok());
    }

    #[test]
    fn truncation_and_name_mismatch_are_errors() {
        let ck = Checkpoint::from_store(KvMap::new(), &store(0)).unwrap();
        let bytes = ck.encode();
        assert!(Checkpoint::decode(&bytes[..bytes.len() - 1], Path::new("x")).is_err());
        let mut other = ParamStore::new(DType::F32, 0);
        other.uniform("a.weight", &[2, 3], 1.0).unwrap();
        assert!(matches!(ck.load_into(&other), Err(Error::SchemaMismatch(_))));
    }
}
