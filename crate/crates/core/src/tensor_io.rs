//! Manifest + little-endian `f32` payload used for checkpoints and factor files.
//!
//! The manifest is JSON: a format version, free-form metadata, and one entry per
//! tensor with its shape, byte offset into the payload and a SHA-256 checksum of
//! its bytes. The payload sits beside the manifest with the extension `.bin`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub const TENSOR_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorManifest {
    pub version: u32,
    pub kind: String,
    pub payload: String,
    pub meta: serde_json::Value,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl NamedTensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            shape,
            data,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub(crate) fn payload_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("bin")
}

pub(crate) fn f32_bytes(data: impl IntoIterator<Item = f64>) -> Vec<u8> {
    data.into_iter().flat_map(|v| (v as f32).to_le_bytes()).collect()
}

pub(crate) fn read_f32s(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

pub fn write_tensors(
    manifest_path: impl AsRef<Path>,
    kind: &str,
    meta: serde_json::Value,
    tensors: &[NamedTensor],
) -> Result<()> {
    let manifest_path = manifest_path.as_ref();
    let payload = payload_path(manifest_path);
    let mut bytes = Vec::new();
    let mut entries = Vec::with_capacity(tensors.len());
    for t in tensors {
        let expected: usize = t.shape.iter().product();
        if expected != t.data.len() {
            return Err(Error::Shape(format!(
                "tensor {} has shape {:?} but {} values",
                t.name,
                t.shape,
                t.data.len()
            )));
        }
        let chunk = f32_bytes(t.data.iter().copied());
        entries.push(TensorEntry {
            name: t.name.clone(),
            shape: t.shape.clone(),
            offset: bytes.len(),
            sha256: sha256_hex(&chunk),
        });
        bytes.extend_from_slice(&chunk);
    }
    let manifest = TensorManifest {
        version: TENSOR_FORMAT_VERSION,
        kind: kind.to_string(),
        payload: payload
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        meta,
        tensors: entries,
    };
    std::fs::write(&payload, &bytes).map_err(|e| Error::io(&payload, e))?;
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(manifest_path, text).map_err(|e| Error::io(manifest_path, e))
}

pub fn read_tensors(manifest_path: impl AsRef<Path>) -> Result<(TensorManifest, Vec<NamedTensor>)> {
    let manifest_path = manifest_path.as_ref();
    let text = std::fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: TensorManifest = serde_json::from_str(&text)?;
    if manifest.version != TENSOR_FORMAT_VERSION {
        return Err(Error::Version {
            found: manifest.version,
            expected: TENSOR_FORMAT_VERSION,
        });
    }
    let payload = manifest_path.with_file_name(&manifest.payload);
    let bytes = std::fs::read(&payload).map_err(|e| Error::io(&payload, e))?;
    let mut out = Vec::with_capacity(manifest.tensors.len());
    for entry in &manifest.tensors {
        let len = entry.shape.iter().product::<usize>() * 4;
        let chunk = bytes
            .get(entry.offset..entry.offset + len)
            .ok_or_else(|| Error::Format(format!("payload too short for tensor {}", entry.name)))?;
        if sha256_hex(chunk) != entry.sha256 {
            return Err(Error::Checksum(entry.name.clone()));
        }
        let data = read_f32s(chunk).into_iter().map(f64::from).collect();
        out.push(NamedTensor::new(entry.name.clone(), entry.shape.clone(), data));
    }
    Ok((manifest, out))
}
