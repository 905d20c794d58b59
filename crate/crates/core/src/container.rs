//! Self-describing binary tensor container, used for model checkpoints and
//! for hidden-state embedding files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic     8 bytes  "RPRMTNSR"
//! version   u32
//! hdr_len   u32, followed by hdr_len bytes of UTF-8 JSON header
//! count     u32
//! count x { name_len u32, name bytes, ndim u32, ndim x u64 dims, f32 data }
//! ```

use std::path::Path;

use serde_json::Value;

use crate::artifact;
use crate::error::{CheckpointError, Error, Result};

pub const MAGIC: &[u8; 8] = b"RPRMTNSR";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl NamedTensor {
    pub fn from_f64(name: impl Into<String>, shape: &[usize], data: &[f64]) -> Self {
        Self {
            name: name.into(),
            shape: shape.to_vec(),
            data: data.iter().map(|&x| x as f32).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub header: Value,
    pub tensors: Vec<NamedTensor>,
}

impl Container {
    pub fn new(header: Value) -> Self {
        Self {
            header,
            tensors: Vec::new(),
        }
    }

    pub fn push(&mut self, t: NamedTensor) {
        self.tensors.push(t);
    }

    pub fn get(&self, name: &str) -> Option<&NamedTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header).expect("header serializes");
        let mut out = Vec::with_capacity(
            24 + header.len() + self.tensors.iter().map(|t| 16 + t.name.len() + 4 * t.data.len()).sum::<usize>(),
        );
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
            for &d in &t.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &x in &t.data {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8, "magic")? != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.u32("version")?;
        if version != FORMAT_VERSION {
            return Err(CheckpointError::Version {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let hlen = r.u32("header length")? as usize;
        let header: Value = serde_json::from_slice(r.take(hlen, "header")?)
            .map_err(|e| CheckpointError::Header(e.to_string()))?;
        let count = r.u32("tensor count")? as usize;
        let mut tensors = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let nlen = r.u32("tensor name length")? as usize;
            let name = String::from_utf8(r.take(nlen, "tensor name")?.to_vec())
                .map_err(|e| CheckpointError::Header(e.to_string()))?;
            let ndim = r.u32("tensor rank")? as usize;
            let mut shape = Vec::with_capacity(ndim.min(8));
            for _ in 0..ndim {
                shape.push(r.u64("tensor dims")? as usize);
            }
            let numel: usize = shape.iter().product();
            let raw = r.take(numel.checked_mul(4).ok_or(CheckpointError::Truncated("tensor data"))?, "tensor data")?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            tensors.push(NamedTensor { name, shape, data });
        }
        Ok(Self { header, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        artifact::write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = artifact::read_artifact(path)?;
        Container::from_bytes(&bytes).map_err(Error::from)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).ok_or(CheckpointError::Truncated(what))?;
        if end > self.bytes.len() {
            return Err(CheckpointError::Truncated(what));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, CheckpointError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64, CheckpointError> {
        let b = self.take(8, what)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(u64::from_le_bytes(a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Container {
        let mut c = Container::new(serde_json::json!({"kind": "test", "n": 2}));
        c.push(NamedTensor {
            name: "a".into(),
            shape: vec![2, 2],
            data: vec![1.0, -2.5, 3.25, f32::MIN_POSITIVE],
        });
        c.push(NamedTensor {
            name: "b".into(),
            shape: vec![3],
            data: vec![0.0, 1.0, 2.0],
        });
        c
    }

    #[test]
    fn round_trip() {
        let c = sample();
        assert_eq!(Container::from_bytes(&c.to_bytes()).unwrap(), c);
    }

    #[test]
    fn distinct_failures() {
        let bytes = sample().to_bytes();
        assert!(matches!(
            Container::from_bytes(&bytes[..bytes.len() - 3]),
            Err(CheckpointError::Truncated(_))
        ));
        let mut v = bytes.clone();
        v[8] = 9;
        assert!(matches!(
            Container::from_bytes(&v),
            Err(CheckpointError::Version { found: 9, .. })
        ));
        let mut m = bytes;
        m[0] = b'X';
        assert!(matches!(Container::from_bytes(&m), Err(CheckpointError::BadMagic)));
    }
}
