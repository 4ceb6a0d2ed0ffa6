//! Flat binary weight container.
//!
//! Layout (little-endian): magic `MFW1`, version `u32`, parameter count
//! `u32`, then per parameter: name length `u16`, UTF-8 name, rank `u8`,
//! `rank` dims as `u32`, and the values as `f32`.

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::ParamVisitor;

pub const MAGIC: &[u8; 4] = b"MFW1";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a weight checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("checkpoint truncated")]
    Truncated,
    #[error("parameter name is not valid UTF-8")]
    BadName,
    #[error("parameter {0} missing from checkpoint")]
    Missing(String),
    #[error("checkpoint parameter {0} has no counterpart in the model")]
    Unexpected(String),
    #[error("parameter {name}: checkpoint shape {stored:?} != model shape {model:?}")]
    Shape {
        name: String,
        stored: Vec<usize>,
        model: Vec<usize>,
    },
    #[error("{0} too large for the container format")]
    Overflow(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One stored parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub name: String,
    pub dims: Vec<usize>,
    pub values: Vec<f32>,
}

/// Serializes every parameter of `model` in visit order.
pub fn encode<M: ParamVisitor + ?Sized>(model: &M) -> Result<Vec<u8>, CheckpointError> {
    let mut entries = Vec::new();
    model.visit(&mut |p| {
        entries.push(Entry {
            name: p.name.clone(),
            dims: p.value.shape().to_vec(),
            values: p.value.data().iter().map(|&v| v as f32).collect(),
        })
    });
    encode_entries(&entries)
}

pub fn encode_entries(entries: &[Entry]) -> Result<Vec<u8>, CheckpointError> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let count = u32::try_from(entries.len()).map_err(|_| CheckpointError::Overflow("count"))?;
    out.extend_from_slice(&count.to_le_bytes());
    for e in entries {
        let name = e.name.as_bytes();
        let len = u16::try_from(name.len()).map_err(|_| CheckpointError::Overflow("name"))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(name);
        let rank = u8::try_from(e.dims.len()).map_err(|_| CheckpointError::Overflow("rank"))?;
        out.push(rank);
        for &d in &e.dims {
            let d = u32::try_from(d).map_err(|_| CheckpointError::Overflow("dim"))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in &e.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).ok_or(CheckpointError::Truncated)?;
        let s = self.buf.get(self.pos..end).ok_or(CheckpointError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<Entry>, CheckpointError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4).map_err(|_| CheckpointError::BadMagic)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let count = r.u32()? as usize;
    let mut entries = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let len = u16::from_le_bytes(r.take(2)?.try_into().unwrap()) as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| CheckpointError::BadName)?
            .to_string();
        let rank = r.take(1)?[0] as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32()? as usize);
        }
        let n: usize = dims.iter().product();
        let raw = r.take(n.checked_mul(4).ok_or(CheckpointError::Truncated)?)?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        entries.push(Entry { name, dims, values });
    }
    if r.pos != bytes.len() {
        return Err(CheckpointError::Truncated);
    }
    Ok(entries)
}

/// Loads entries into `model` by name.
///
/// With `strict`, every model parameter must be present and every entry must
/// be used. Otherwise unmatched names on either side are skipped; the names
/// actually loaded are returned.
pub fn load_into<M: ParamVisitor + ?Sized>(
    model: &mut M,
    entries: &[Entry],
    strict: bool,
) -> Result<Vec<String>, CheckpointError> {
    let mut loaded = Vec::new();
    let mut failure = None;
    model.visit_mut(&mut |p| {
        if failure.is_some() {
            return;
        }
        match entries.iter().find(|e| e.name == p.name) {
            Some(e) if e.dims != p.value.shape() => {
                failure = Some(CheckpointError::Shape {
                    name: p.name.clone(),
                    stored: e.dims.clone(),
                    model: p.value.shape().to_vec(),
                })
            }
            Some(e) => {
                for (dst, &src) in p.value.data_mut().iter_mut().zip(&e.values) {
                    *dst = f64::from(src);
                }
                loaded.push(p.name.clone());
            }
            None if strict => failure = Some(CheckpointError::Missing(p.name.clone())),
            None => {}
        }
    });
    if let Some(err) = failure {
        return Err(err);
    }
    if strict {
        if let Some(extra) = entries.iter().find(|e| !loaded.contains(&e.name)) {
            return Err(CheckpointError::Unexpected(extra.name.clone()));
        }
    }
    Ok(loaded)
}

pub fn save<M: ParamVisitor + ?Sized>(model: &M, path: &Path) -> Result<(), CheckpointError> {
    fs::write(path, encode(model)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Vec<Entry>, CheckpointError> {
    decode(&fs::read(path)?)
}
