//! Named-tensor checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   "ADTCKPT\0"
//! version u32
//! n_meta  u32, then n_meta × (key: u32 len + utf8, value: u32 len + utf8)
//! n_tens  u32, then n_tens × (name: u32 len + utf8, rows u64, cols u64, rows·cols × f64)
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use super::params::ParamStore;
use super::tensor::Tensor2D;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"ADTCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub metadata: BTreeMap<String, String>,
    pub tensors: Vec<(String, Tensor2D)>,
}

impl Checkpoint {
    pub fn from_store(store: &ParamStore) -> Self {
        Self {
            metadata: BTreeMap::new(),
            tensors: store
                .named()
                .map(|(n, t)| (n.to_string(), t.clone()))
                .collect(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    pub fn meta(&self, key: &str) -> Result<&str> {
        self.metadata
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Format(format!("checkpoint is missing metadata key `{key}`")))
    }

    pub fn meta_parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.meta(key)?;
        raw.parse()
            .map_err(|_| Error::Format(format!("metadata `{key}` = `{raw}` does not parse")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let put_str = |out: &mut Vec<u8>, s: &str| {
            out.extend_from_slice(&(s.len() as u32).to_le_bytes());
            out.extend_from_slice(s.as_bytes());
        };
        out.extend_from_slice(&(self.metadata.len() as u32).to_le_bytes());
        for (k, v) in &self.metadata {
            put_str(&mut out, k);
            put_str(&mut out, v);
        }
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            put_str(&mut out, name);
            out.extend_from_slice(&(t.rows() as u64).to_le_bytes());
            out.extend_from_slice(&(t.cols() as u64).to_le_bytes());
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Format("not a checkpoint (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let mut metadata = BTreeMap::new();
        for _ in 0..r.u32()? {
            let k = r.string()?;
            let v = r.string()?;
            metadata.insert(k, v);
        }
        let n = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(n);
        for _ in 0..n {
            let name = r.string()?;
            let rows = r.u64()? as usize;
            let cols = r.u64()? as usize;
            let len = rows
                .checked_mul(cols)
                .ok_or_else(|| Error::Format("tensor size overflow".into()))?;
            let raw = r.take(len.checked_mul(8).ok_or_else(|| Error::Format("tensor size overflow".into()))?)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            tensors.push((name, Tensor2D::from_vec(rows, cols, data)?));
        }
        if r.pos != bytes.len() {
            return Err(Error::Format("trailing bytes after checkpoint".into()));
        }
        Ok(Self { metadata, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("truncated checkpoint".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Format("non-utf8 string in checkpoint".into()))
    }
}
