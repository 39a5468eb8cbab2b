//! Self-describing checkpoint container: an 8-byte magic, a little-endian
//! `u32` header length, a JSON header, then every tensor as little-endian
//! `f32` in header order.

use std::fs;
use std::io::Write;
use std::path::Path;

use fer_nn::{Model, ParamKind, ParamStore, Tensor};
use serde::{Deserialize, Serialize};

use crate::config::{ModelSpec, TrainConfig};
use crate::error::{Result, TrainError};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"FERCKPT1";

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    buffer: bool,
}

#[derive(Serialize, Deserialize)]
struct Header {
    toolkit_version: String,
    spec: ModelSpec,
    epoch: usize,
    val_accuracy: f64,
    config: TrainConfig,
    manifest_fingerprint: String,
    tensors: Vec<TensorEntry>,
}

/// Parameters of the best validation epoch plus what produced them.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub spec: ModelSpec,
    /// 1-based epoch the parameters come from.
    pub epoch: usize,
    pub val_accuracy: f64,
    pub config: TrainConfig,
    pub manifest_fingerprint: String,
    params: ParamStore,
}

impl Checkpoint {
    pub fn from_model(
        model: &Model,
        spec: ModelSpec,
        epoch: usize,
        val_accuracy: f64,
        config: TrainConfig,
        manifest_fingerprint: String,
    ) -> Self {
        Self {
            spec,
            epoch,
            val_accuracy,
            config,
            manifest_fingerprint,
            params: model.params().clone(),
        }
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    /// Rebuilds the model and loads the stored parameters by name.
    pub fn model(&self) -> Result<Model> {
        let mut model = Model::build(self.spec.arch, self.spec.num_classes, 0);
        if model.params().len() != self.params.len() {
            return Err(TrainError::Config(format!(
                "checkpoint has {} tensors, {} expects {}",
                self.params.len(),
                self.spec.arch,
                model.params().len()
            )));
        }
        for id in self.params.ids() {
            model
                .params_mut()
                .set(self.params.name(id), self.params.get(id).clone())?;
        }
        Ok(model)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            toolkit_version: env!("CARGO_PKG_VERSION").into(),
            spec: self.spec,
            epoch: self.epoch,
            val_accuracy: self.val_accuracy,
            config: self.config.clone(),
            manifest_fingerprint: self.manifest_fingerprint.clone(),
            tensors: self
                .params
                .ids()
                .map(|id| TensorEntry {
                    name: self.params.name(id).into(),
                    shape: self.params.get(id).shape().to_vec(),
                    buffer: self.params.kind(id) == ParamKind::Buffer,
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let floats: usize = self.params.ids().map(|id| self.params.get(id).len()).sum();
        let mut out = Vec::with_capacity(12 + json.len() + 4 * floats);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for id in self.params.ids() {
            for v in self.params.get(id).data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        if bytes.len() < 12 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err("not a checkpoint file".into());
        }
        let len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let json = bytes.get(12..12 + len).ok_or("truncated header")?;
        let header: Header = serde_json::from_slice(json).map_err(|e| format!("bad header: {e}"))?;
        let mut data = &bytes[12 + len..];
        let mut params = ParamStore::default();
        for t in header.tensors {
            let n: usize = t.shape.iter().product();
            if data.len() < 4 * n {
                return Err(format!("truncated tensor {}", t.name));
            }
            let values = data[..4 * n]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            data = &data[4 * n..];
            let kind = if t.buffer { ParamKind::Buffer } else { ParamKind::Weight };
            let tensor = Tensor::new(t.shape, values).map_err(|e| e.to_string())?;
            params.add(t.name, tensor, kind);
        }
        if !data.is_empty() {
            return Err(format!("{} trailing bytes", data.len()));
        }
        Ok(Self {
            spec: header.spec,
            epoch: header.epoch,
            val_accuracy: header.val_accuracy,
            config: header.config,
            manifest_fingerprint: header.manifest_fingerprint,
            params,
        })
    }

    /// Writes through a temporary file so a crash never leaves a partial
    /// checkpoint behind.
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| TrainError::io(dir, e))?;
        }
        let tmp = path.with_extension("partial");
        let mut f = fs::File::create(&tmp).map_err(|e| TrainError::io(&tmp, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| TrainError::io(&tmp, e))?;
        f.sync_all().map_err(|e| TrainError::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| TrainError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| TrainError::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|reason| TrainError::Checkpoint {
            path: path.to_path_buf(),
            reason,
        })
    }
}
