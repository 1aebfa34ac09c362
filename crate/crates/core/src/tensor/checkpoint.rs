//! Checkpoint format: a JSON manifest (names, shapes, byte offsets) next to
//! a flat little-endian `f64` blob. Round trips are bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dense::Tensor;
use super::optim::ParamStore;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const BLOB_FILE: &str = "params.bin";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the blob.
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dtype: String,
    pub endianness: String,
    pub params: Vec<ManifestEntry>,
}

pub fn encode(store: &ParamStore) -> (Manifest, Vec<u8>) {
    let mut blob = Vec::with_capacity(store.num_scalars() * 8);
    let mut params = Vec::with_capacity(store.len());
    for (name, t) in store.iter() {
        params.push(ManifestEntry {
            name: name.to_string(),
            shape: t.shape().to_vec(),
            offset: blob.len(),
        });
        for v in t.data() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let manifest = Manifest {
        dtype: "f64".into(),
        endianness: "little".into(),
        params,
    };
    (manifest, blob)
}

pub fn decode(manifest: &Manifest, blob: &[u8]) -> Result<ParamStore> {
    if manifest.dtype != "f64" || manifest.endianness != "little" {
        return Err(Error::InvalidArgument(format!(
            "unsupported checkpoint encoding {}/{}",
            manifest.dtype, manifest.endianness
        )));
    }
    let mut store = ParamStore::new();
    for e in &manifest.params {
        let n: usize = e.shape.iter().product();
        let end = e.offset + 8 * n;
        if end > blob.len() {
            return Err(Error::LengthMismatch {
                op: "checkpoint blob",
                expected: end,
                actual: blob.len(),
            });
        }
        let data = blob[e.offset..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        store.insert(e.name.clone(), Tensor::new(e.shape.clone(), data)?);
    }
    Ok(store)
}

/// Writes `manifest.json` and `params.bin` into `dir`.
pub fn save(store: &ParamStore, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let (manifest, blob) = encode(store);
    fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_vec_pretty(&manifest)?,
    )?;
    fs::write(dir.join(BLOB_FILE), blob)?;
    Ok(())
}

pub fn load(dir: &Path) -> Result<ParamStore> {
    let manifest: Manifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE))?)?;
    let blob = fs::read(dir.join(BLOB_FILE))?;
    decode(&manifest, &blob)
}
