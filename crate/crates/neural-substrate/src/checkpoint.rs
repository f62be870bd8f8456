//! Versioned binary checkpoint container.
//!
//! Layout (all integers little-endian):
//! `"GLUC"` magic, `u32` version, `u32` meta length + UTF-8 meta text,
//! `u32` tensor count, then per tensor: `u32` name length + name, `u8`
//! dtype (0 = f32, 1 = f64), `u8` rank, `u32` dims, raw element bytes.
//! The file ends with the SHA-256 digest of everything before it.
//! Loading is bit-exact and verifies the digest, names, dtypes, shapes.

use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::ParamKind;
use crate::tensor::{Scalar, Tensor};

const MAGIC: &[u8; 4] = b"GLUC";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error("checkpoint corrupted: {0}")]
    Corrupt(String),
    #[error("checkpoint digest mismatch")]
    DigestMismatch,
    #[error("tensor {0} missing from checkpoint")]
    MissingTensor(String),
    #[error("tensor {name}: {problem}")]
    TensorMismatch { name: String, problem: String },
    #[error("checkpoint holds {0} tensors not expected by this model")]
    UnexpectedTensors(usize),
}

fn push_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_str(buf: &mut Vec<u8>, s: &str) {
    push_u32(buf, s.len() as u32);
    buf.extend_from_slice(s.as_bytes());
}

/// Serializes named tensors plus a free-form meta string.
pub fn save_params<F: Scalar>(
    path: &Path,
    meta: &str,
    tensors: Vec<(String, &mut Tensor<F>, ParamKind)>,
) -> Result<(), CheckpointError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    push_u32(&mut buf, VERSION);
    push_str(&mut buf, meta);
    push_u32(&mut buf, tensors.len() as u32);
    for (name, t, _) in &tensors {
        push_str(&mut buf, name);
        buf.push(F::DTYPE);
        let shape = t.shape();
        buf.push(shape.len() as u8);
        for &d in shape {
            push_u32(&mut buf, d as u32);
        }
        for v in t.data() {
            match F::DTYPE {
                0 => buf.extend_from_slice(&(v.to_f64() as f32).to_le_bytes()),
                _ => buf.extend_from_slice(&v.to_f64().to_le_bytes()),
            }
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    std::fs::write(path, &buf)?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.at + n > self.buf.len() {
            return Err(CheckpointError::Corrupt("truncated file".into()));
        }
        let s = &self.buf[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn string(&mut self) -> Result<String, CheckpointError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| CheckpointError::Corrupt("non-UTF-8 string".into()))
    }
}

/// Fills an existing parameter traversal from a checkpoint, bit-exactly.
/// Returns the stored meta string. Every expected tensor must be present
/// with matching dtype and shape, and no stored tensor may be left over.
pub fn load_params<F: Scalar>(
    path: &Path,
    tensors: Vec<(String, &mut Tensor<F>, ParamKind)>,
) -> Result<String, CheckpointError> {
    let raw = std::fs::read(path)?;
    if raw.len() < 32 + 4 {
        return Err(CheckpointError::Corrupt("file too short".into()));
    }
    let (body, digest) = raw.split_at(raw.len() - 32);
    let computed = Sha256::digest(body);
    if computed.as_slice() != digest {
        return Err(CheckpointError::DigestMismatch);
    }

    let mut r = Reader { buf: body, at: 0 };
    if r.take(4)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    let meta = r.string()?;
    let count = r.u32()? as usize;

    let mut stored: std::collections::BTreeMap<String, (u8, Vec<usize>, Vec<u8>)> =
        std::collections::BTreeMap::new();
    for _ in 0..count {
        let name = r.string()?;
        let dtype = r.u8()?;
        let rank = r.u8()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        let elem = match dtype {
            0 => 4,
            1 => 8,
            d => return Err(CheckpointError::Corrupt(format!("unknown dtype {}", d))),
        };
        let n: usize = shape.iter().product();
        let data = r.take(n * elem)?.to_vec();
        stored.insert(name, (dtype, shape, data));
    }
    if r.at != body.len() {
        return Err(CheckpointError::Corrupt("trailing bytes".into()));
    }

    for (name, t, _) in tensors {
        let (dtype, shape, data) = stored
            .remove(&name)
            .ok_or_else(|| CheckpointError::MissingTensor(name.clone()))?;
        if dtype != F::DTYPE {
            return Err(CheckpointError::TensorMismatch {
                name,
                problem: format!("dtype {} where {} expected", dtype, F::DTYPE),
            });
        }
        if shape != t.shape() {
            return Err(CheckpointError::TensorMismatch {
                name,
                problem: format!("shape {:?} where {:?} expected", shape, t.shape()),
            });
        }
        for (i, v) in t.data_mut().iter_mut().enumerate() {
            *v = match F::DTYPE {
                0 => F::from_f64(f32::from_le_bytes(data[i * 4..(i + 1) * 4].try_into().unwrap()) as f64),
                _ => F::from_f64(f64::from_le_bytes(data[i * 8..(i + 1) * 8].try_into().unwrap())),
            };
        }
    }
    if !stored.is_empty() {
        return Err(CheckpointError::UnexpectedTensors(stored.len()));
    }
    Ok(meta)
}

/// Reads only the meta string of a checkpoint (with digest verification).
pub fn read_meta(path: &Path) -> Result<String, CheckpointError> {
    let raw = std::fs::read(path)?;
    if raw.len() < 32 + 4 {
        return Err(CheckpointError::Corrupt("file too short".into()));
    }
    let (body, digest) = raw.split_at(raw.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(CheckpointError::DigestMismatch);
    }
    let mut r = Reader { buf: body, at: 0 };
    if r.take(4)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    r.string()
}

/// Convenience for flat `key=value` meta blocks: first value for `key`.
pub fn meta_get<'a>(meta: &'a str, key: &str) -> Option<&'a str> {
    meta.lines().find_map(|line| {
        let (k, v) = line.split_once('=')?;
        (k.trim() == key).then(|| v.trim())
    })
}
