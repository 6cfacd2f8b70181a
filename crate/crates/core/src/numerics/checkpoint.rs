//! Checkpoint files: a JSON manifest (`<stem>.json`) naming every tensor with
//! its shape and byte offset, and one flat little-endian `f64` blob
//! (`<stem>.bin`). Loading reproduces the saved bits exactly.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::params::ParamStore;
use super::{NumericsError, Tensor};

pub const FORMAT: &str = "segtran-checkpoint-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: [usize; 2],
    pub offset: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub blob: String,
    pub tensors: Vec<TensorEntry>,
    #[serde(default)]
    pub meta: serde_json::Value,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    pub tensors: Vec<(String, Tensor)>,
    pub meta: serde_json::Value,
}

impl Checkpoint {
    pub fn new() -> Self {
        Checkpoint { tensors: Vec::new(), meta: serde_json::Value::Null }
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.tensors.push((name.into(), tensor));
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Adds every parameter value under its own name.
    pub fn push_params(&mut self, store: &ParamStore) {
        for (_, p) in store.iter() {
            self.push(p.name.clone(), p.value.clone());
        }
    }

    /// Overwrites every parameter value in `store` with the saved tensor of
    /// the same name.
    pub fn restore_params(&self, store: &mut ParamStore) -> Result<(), NumericsError> {
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let name = store.get(id).name.clone();
            let saved = self.get(&name).ok_or_else(|| NumericsError::Checkpoint(format!("missing tensor `{name}`")))?;
            let target = store.value_mut(id);
            if saved.shape() != target.shape() {
                return Err(NumericsError::Shape { op: "restore_params", left: target.shape(), right: saved.shape() });
            }
            *target = saved.clone();
        }
        Ok(())
    }

    /// Adds Adam moments as `<tag>.m/<param>` and `<tag>.v/<param>`; the step
    /// counter goes into `meta` by the caller.
    pub fn push_adam(&mut self, tag: &str, adam: &Adam, store: &ParamStore) {
        for slot in adam.slots() {
            let name = &store.get(slot.param).name;
            self.push(format!("{tag}.m/{name}"), slot.m.clone());
            self.push(format!("{tag}.v/{name}"), slot.v.clone());
        }
    }

    pub fn restore_adam(&self, tag: &str, adam: &mut Adam, store: &ParamStore, steps: u64) -> Result<(), NumericsError> {
        adam.restore(steps, |id| {
            let name = &store.get(id).name;
            let m = self.get(&format!("{tag}.m/{name}"))?.clone();
            let v = self.get(&format!("{tag}.v/{name}"))?.clone();
            Some((m, v))
        })
    }

    pub fn manifest_path(dir: &Path, stem: &str) -> PathBuf {
        dir.join(format!("{stem}.json"))
    }

    pub fn save(&self, dir: &Path, stem: &str) -> Result<(), NumericsError> {
        fs::create_dir_all(dir)?;
        let blob_name = format!("{stem}.bin");
        let mut blob = Vec::with_capacity(self.tensors.iter().map(|(_, t)| t.len() * 8).sum());
        let mut entries = Vec::with_capacity(self.tensors.len());
        for (name, t) in &self.tensors {
            entries.push(TensorEntry { name: name.clone(), shape: t.shape(), offset: blob.len() as u64 });
            for x in t.data() {
                blob.extend_from_slice(&x.to_le_bytes());
            }
        }
        let manifest = Manifest { format: FORMAT.into(), blob: blob_name.clone(), tensors: entries, meta: self.meta.clone() };
        fs::write(dir.join(&blob_name), &blob)?;
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| NumericsError::Checkpoint(e.to_string()))?;
        fs::write(Self::manifest_path(dir, stem), text)?;
        Ok(())
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self, NumericsError> {
        let text = fs::read_to_string(Self::manifest_path(dir, stem))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| NumericsError::Checkpoint(format!("manifest: {e}")))?;
        if manifest.format != FORMAT {
            return Err(NumericsError::Checkpoint(format!("unknown format `{}`", manifest.format)));
        }
        let blob = fs::read(dir.join(&manifest.blob))?;
        let mut tensors = Vec::with_capacity(manifest.tensors.len());
        for e in manifest.tensors {
            let len = e.shape[0] * e.shape[1];
            let start = e.offset as usize;
            let end = start + len * 8;
            if end > blob.len() {
                return Err(NumericsError::Checkpoint(format!("tensor `{}` runs past end of blob", e.name)));
            }
            let data = blob[start..end]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            tensors.push((e.name, Tensor::from_vec(e.shape[0], e.shape[1], data)?));
        }
        Ok(Checkpoint { tensors, meta: manifest.meta })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut ck = Checkpoint::new();
        ck.push("a.w", Tensor::from_rows(&[[0.1, -0.0, f64::MIN_POSITIVE], [1e300, -3.25, 7.0]]));
        ck.push("b.s", Tensor::scalar(std::f64::consts::PI));
        ck.push("c.empty", Tensor::zeros(0, 4));
        ck.meta = serde_json::json!({"epoch": 3});
        ck.save(dir.path(), "checkpoint").unwrap();
        let back = Checkpoint::load(dir.path(), "checkpoint").unwrap();
        assert_eq!(back.meta, ck.meta);
        for ((n1, t1), (n2, t2)) in ck.tensors.iter().zip(&back.tensors) {
            assert_eq!(n1, n2);
            assert_eq!(t1.shape(), t2.shape());
            let bits1: Vec<u64> = t1.data().iter().map(|x| x.to_bits()).collect();
            let bits2: Vec<u64> = t2.data().iter().map(|x| x.to_bits()).collect();
            assert_eq!(bits1, bits2);
        }
        let manifest: Manifest =
            serde_json::from_str(&fs::read_to_string(dir.path().join("checkpoint.json")).unwrap()).unwrap();
        assert_eq!(manifest.tensors[1].offset, 48);
    }

    #[test]
    fn truncated_blob_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut ck = Checkpoint::new();
        ck.push("a", Tensor::filled(2, 2, 1.0));
        ck.save(dir.path(), "ck").unwrap();
        fs::write(dir.path().join("ck.bin"), [0u8; 8]).unwrap();
        assert!(matches!(Checkpoint::load(dir.path(), "ck"), Err(NumericsError::Checkpoint(_))));
    }
}
