//! Atomic file writes and the versioned binary tensor container used by
//! model checkpoints.
//!
//! Checkpoint layout, in order:
//! 1. a magic line, e.g. `GPPv1\n`, identifying format and version,
//! 2. a little-endian `u64` with the byte length of the JSON manifest,
//! 3. the manifest: `{"meta": ..., "tensors": [{"name", "rows", "cols"}, ...]}`,
//! 4. the payload: each tensor's elements as row-major `f64`, little-endian,
//!    in manifest order.
//!
//! Loading verifies the magic, every declared shape, and that the payload
//! length matches exactly; any mismatch is a structured error, never a
//! panic. Writes go through a temp file in the target directory followed by
//! a rename, so a crashed run can leave stale temp files but never a
//! half-written artifact.

use crate::scalar::Scalar;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;
use thiserror::Error;

/// Writes `bytes` to `path` atomically: temp file in the same directory,
/// flushed, then renamed over the target.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(d) => tempfile::NamedTempFile::new_in(d)?,
        None => tempfile::NamedTempFile::new_in(".")?,
    };
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic in {path}: expected {expected:?}, found {found:?}")]
    BadMagic {
        path: String,
        expected: String,
        found: String,
    },
    #[error("corrupt manifest in {path}: {detail}")]
    CorruptManifest { path: String, detail: String },
    #[error(
        "payload length mismatch in {path}: manifest declares {expected} bytes, file has {found}"
    )]
    PayloadLength {
        path: String,
        expected: usize,
        found: usize,
    },
    #[error("tensor set mismatch in {path}: expected {expected:?}, found {found:?}")]
    TensorNames {
        path: String,
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("tensor {name} in {path} has shape {found_rows}x{found_cols}, expected {rows}x{cols}")]
    TensorShape {
        path: String,
        name: String,
        rows: usize,
        cols: usize,
        found_rows: usize,
        found_cols: usize,
    },
    #[error("meta field error in {path}: {detail}")]
    Meta { path: String, detail: String },
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
struct ManifestDoc {
    meta: serde_json::Value,
    tensors: Vec<TensorEntry>,
}

fn io_err(path: &Path, source: std::io::Error) -> CheckpointError {
    CheckpointError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Serializes named tensors (converted to `f64`) plus a JSON `meta` blob.
pub fn write_tensors<T: Scalar>(
    path: &Path,
    magic: &str,
    meta: &serde_json::Value,
    tensors: &[(&str, &Array2<T>)],
) -> Result<(), CheckpointError> {
    let manifest = ManifestDoc {
        meta: meta.clone(),
        tensors: tensors
            .iter()
            .map(|(name, t)| TensorEntry {
                name: (*name).to_string(),
                rows: t.nrows(),
                cols: t.ncols(),
            })
            .collect(),
    };
    let manifest_bytes = serde_json::to_vec(&manifest).expect("manifest serializes");

    let mut bytes = Vec::new();
    bytes.extend_from_slice(magic.as_bytes());
    bytes.push(b'\n');
    bytes.extend_from_slice(&(manifest_bytes.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&manifest_bytes);
    for (_, tensor) in tensors {
        for v in tensor.iter() {
            bytes.extend_from_slice(&v.as_f64().to_le_bytes());
        }
    }
    atomic_write(path, &bytes).map_err(|e| io_err(path, e))
}

/// Reads a tensor container written by [`write_tensors`], validating magic,
/// manifest, shapes, and payload length.
pub fn read_tensors<T: Scalar>(
    path: &Path,
    magic: &str,
) -> Result<(serde_json::Value, Vec<(String, Array2<T>)>), CheckpointError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    let path_s = path.display().to_string();

    let newline = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| {
        CheckpointError::BadMagic {
            path: path_s.clone(),
            expected: magic.to_string(),
            found: String::from_utf8_lossy(&bytes[..bytes.len().min(16)]).into_owned(),
        }
    })?;
    let found_magic = String::from_utf8_lossy(&bytes[..newline]).into_owned();
    if found_magic != magic {
        return Err(CheckpointError::BadMagic {
            path: path_s,
            expected: magic.to_string(),
            found: found_magic,
        });
    }

    let rest = &bytes[newline + 1..];
    if rest.len() < 8 {
        return Err(CheckpointError::CorruptManifest {
            path: path_s,
            detail: "file truncated before manifest length".to_string(),
        });
    }
    let manifest_len = u64::from_le_bytes(rest[..8].try_into().unwrap()) as usize;
    let rest = &rest[8..];
    if rest.len() < manifest_len {
        return Err(CheckpointError::CorruptManifest {
            path: path_s,
            detail: format!(
                "manifest declares {manifest_len} bytes but only {} remain",
                rest.len()
            ),
        });
    }
    let manifest: ManifestDoc =
        serde_json::from_slice(&rest[..manifest_len]).map_err(|e| CheckpointError::CorruptManifest {
            path: path_s.clone(),
            detail: e.to_string(),
        })?;

    let payload = &rest[manifest_len..];
    let expected_len: usize = manifest
        .tensors
        .iter()
        .map(|t| t.rows * t.cols * 8)
        .sum();
    if payload.len() != expected_len {
        return Err(CheckpointError::PayloadLength {
            path: path_s,
            expected: expected_len,
            found: payload.len(),
        });
    }

    let mut tensors = Vec::with_capacity(manifest.tensors.len());
    let mut offset = 0usize;
    for entry in &manifest.tensors {
        let count = entry.rows * entry.cols;
        let mut data = Vec::with_capacity(count);
        for i in 0..count {
            let start = offset + i * 8;
            let v = f64::from_le_bytes(payload[start..start + 8].try_into().unwrap());
            data.push(T::of(v));
        }
        offset += count * 8;
        let arr = Array2::from_shape_vec((entry.rows, entry.cols), data)
            .expect("shape matches element count");
        tensors.push((entry.name.clone(), arr));
    }
    Ok((manifest.meta, tensors))
}

/// Validates that loaded tensors match an expected `(name, rows, cols)`
/// schema, in order, and returns them in that order.
pub fn take_tensors<T: Scalar>(
    path: &Path,
    loaded: Vec<(String, Array2<T>)>,
    schema: &[(&str, usize, usize)],
) -> Result<Vec<Array2<T>>, CheckpointError> {
    let path_s = path.display().to_string();
    let found: Vec<String> = loaded.iter().map(|(n, _)| n.clone()).collect();
    let expected: Vec<String> = schema.iter().map(|(n, _, _)| (*n).to_string()).collect();
    if found != expected {
        return Err(CheckpointError::TensorNames {
            path: path_s,
            expected,
            found,
        });
    }
    let mut out = Vec::with_capacity(loaded.len());
    for ((name, tensor), &(_, rows, cols)) in loaded.into_iter().zip(schema) {
        if tensor.nrows() != rows || tensor.ncols() != cols {
            return Err(CheckpointError::TensorShape {
                path: path_s,
                name,
                rows,
                cols,
                found_rows: tensor.nrows(),
                found_cols: tensor.ncols(),
            });
        }
        out.push(tensor);
    }
    Ok(out)
}
