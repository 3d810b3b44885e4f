//! `.avck` checkpoint files.
//!
//! Layout: an 8-byte little-endian `u64` header length `n`, then `n` bytes
//! of UTF-8 JSON mapping each tensor name to `{"shape": [...], "offset": b}`,
//! then the raw little-endian `f32` data. `offset` is the byte offset of a
//! tensor's first value from the start of the data section.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::param::Params;
use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

pub const EXTENSION: &str = "avck";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct Entry {
    shape: Vec<usize>,
    offset: u64,
}

fn bad(path: &Path, detail: impl Into<String>) -> Error {
    Error::Checkpoint {
        path: path.to_path_buf(),
        detail: detail.into(),
    }
}

/// Serializes named tensors; values are stored as `f32`.
pub fn encode<T: Scalar>(tensors: &[(String, Tensor<T>)]) -> Result<Vec<u8>> {
    let mut header = BTreeMap::new();
    let mut data = Vec::new();
    for (name, t) in tensors {
        let entry = Entry {
            shape: t.shape().to_vec(),
            offset: data.len() as u64,
        };
        if header.insert(name.clone(), entry).is_some() {
            return Err(Error::Config(format!("duplicate tensor name `{name}`")));
        }
        for v in t.data() {
            data.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes());
        }
    }
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(8 + json.len() + data.len());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&data);
    Ok(out)
}

/// Parses checkpoint bytes into tensors ordered by data offset.
pub fn decode(path: &Path, bytes: &[u8]) -> Result<Vec<(String, Tensor<f32>)>> {
    let len_bytes: [u8; 8] = bytes
        .get(..8)
        .ok_or_else(|| bad(path, "file shorter than the length prefix"))?
        .try_into()
        .expect("8 bytes");
    let header_len = u64::from_le_bytes(len_bytes) as usize;
    let header_end = 8usize
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| bad(path, "truncated header"))?;
    let header: BTreeMap<String, Entry> = serde_json::from_slice(&bytes[8..header_end])
        .map_err(|e| bad(path, format!("header is not valid JSON: {e}")))?;
    let data = &bytes[header_end..];
    let mut entries: Vec<(String, Entry)> = header.into_iter().collect();
    entries.sort_by_key(|(_, e)| e.offset);
    let mut out = Vec::with_capacity(entries.len());
    for (name, entry) in entries {
        let count: usize = entry.shape.iter().product();
        let start = entry.offset as usize;
        let end = start + 4 * count;
        let raw = data
            .get(start..end)
            .ok_or_else(|| bad(path, format!("tensor `{name}` runs past end of file")))?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        out.push((name, Tensor::new(entry.shape, values)?));
    }
    Ok(out)
}

pub fn save<T: Scalar, M: Params<T> + ?Sized>(path: &Path, model: &M) -> Result<()> {
    let bytes = encode(&model.named_values())?;
    let mut file = fs::File::create(path)?;
    file.write_all(&bytes)?;
    file.sync_all()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Vec<(String, Tensor<f32>)>> {
    let bytes = fs::read(path)?;
    decode(path, &bytes)
}

/// Loads every parameter of `model` by name; shapes must match and no
/// parameter may be missing.
pub fn load_into<T: Scalar, M: Params<T> + ?Sized>(path: &Path, model: &mut M) -> Result<()> {
    let tensors: BTreeMap<String, Tensor<f32>> = load(path)?.into_iter().collect();
    let mut err = None;
    let mut used = 0;
    model.visit_params_mut(&mut |name, p| {
        if err.is_some() {
            return;
        }
        match tensors.get(name) {
            Some(t) if t.shape() == p.value.shape() => {
                p.value = t.cast();
                used += 1;
            }
            Some(t) => {
                err = Some(bad(
                    path,
                    format!(
                        "tensor `{name}` has shape {:?}, model expects {:?}",
                        t.shape(),
                        p.value.shape()
                    ),
                ))
            }
            None => err = Some(bad(path, format!("missing tensor `{name}`"))),
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    if used != tensors.len() {
        return Err(bad(
            path,
            format!("{} tensors in file, model uses {used}", tensors.len()),
        ));
    }
    Ok(())
}
