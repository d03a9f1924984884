//! Binary checkpoint: the magic `MCSTTM1`, a little-endian `u64` manifest
//! length, a UTF-8 JSON manifest listing every array's name, shape and byte
//! offset, then the arrays as little-endian `f64`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::NormStats;
use crate::error::{Error, Result};
use crate::graph::AdjacencyPair;
use crate::model::{Ablation, ModelConfig, ParamStore, StModel};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 7] = b"MCSTTM1";

const FIXED_FWD: &str = "fixed.fwd";
const FIXED_BWD: &str = "fixed.bwd";

/// A model plus what is needed to use it on raw data.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: StModel,
    pub norm: NormStats,
    /// Free-form string metadata, e.g. the resolved config hash.
    pub meta: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct ArrayEntry {
    name: String,
    shape: Vec<usize>,
    offset: u64,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    config: ModelConfig,
    ablation: Ablation,
    norm: NormStats,
    meta: BTreeMap<String, String>,
    arrays: Vec<ArrayEntry>,
}

pub fn checkpoint_bytes(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let model = &ckpt.model;
    let mut arrays: Vec<(&str, &Tensor)> = vec![(FIXED_FWD, &model.adjacency.fwd), (FIXED_BWD, &model.adjacency.bwd)];
    arrays.extend(model.params.iter().map(|(k, t)| (k.as_str(), t)));

    let mut entries = Vec::with_capacity(arrays.len());
    let mut offset = 0u64;
    for (name, t) in &arrays {
        entries.push(ArrayEntry {
            name: name.to_string(),
            shape: t.shape().to_vec(),
            offset,
        });
        offset += 8 * t.numel() as u64;
    }
    let manifest = Manifest {
        config: model.config.clone(),
        ablation: model.ablation,
        norm: ckpt.norm,
        meta: ckpt.meta.clone(),
        arrays: entries,
    };
    let json = serde_json::to_vec(&manifest).map_err(|e| Error::Checkpoint(e.to_string()))?;

    let mut out = Vec::with_capacity(MAGIC.len() + 8 + json.len() + offset as usize);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, t) in &arrays {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    let bad = |m: &str| Error::Checkpoint(m.to_string());
    let rest = bytes.strip_prefix(MAGIC.as_slice()).ok_or_else(|| bad("missing MCSTTM1 header"))?;
    if rest.len() < 8 {
        return Err(bad("truncated manifest length"));
    }
    let len = u64::from_le_bytes(rest[..8].try_into().expect("8 bytes")) as usize;
    let rest = &rest[8..];
    if rest.len() < len {
        return Err(bad("truncated manifest"));
    }
    let manifest: Manifest =
        serde_json::from_slice(&rest[..len]).map_err(|e| Error::Checkpoint(format!("bad manifest: {e}")))?;
    let data = &rest[len..];

    let mut tensors = BTreeMap::new();
    for entry in manifest.arrays {
        let n: usize = entry.shape.iter().product();
        let start = entry.offset as usize;
        let end = start
            .checked_add(8 * n)
            .filter(|&e| e <= data.len())
            .ok_or_else(|| Error::Checkpoint(format!("array '{}' runs past the end of the file", entry.name)))?;
        let values = data[start..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let t = Tensor::new(&entry.shape, values)
            .map_err(|e| Error::Checkpoint(format!("array '{}': {e}", entry.name)))?;
        if tensors.insert(entry.name.clone(), t).is_some() {
            return Err(Error::Checkpoint(format!("array '{}' listed twice", entry.name)));
        }
    }
    let mut take = |name: &str| {
        tensors
            .remove(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing array '{name}'")))
    };
    let adjacency = AdjacencyPair {
        fwd: take(FIXED_FWD)?,
        bwd: take(FIXED_BWD)?,
    };
    let mut params = ParamStore::new();
    for (name, t) in tensors {
        params.insert(name, t);
    }
    let model = StModel::from_parts(manifest.config, manifest.ablation, adjacency, params)?;
    Ok(Checkpoint {
        model,
        norm: manifest.norm,
        meta: manifest.meta,
    })
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, checkpoint_bytes(ckpt)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_bytes(&bytes)
}
