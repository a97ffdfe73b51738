//! Model files: a magic line, one JSON header line describing the model,
//! then every parameter as little-endian `f32` in header order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use urbanav_core::abstraction::Vocabulary;

use crate::autodiff::ParamStore;
use crate::model::{Architecture, Model, ModelConfig};

pub const MAGIC: &str = "URBANAV-MODEL 1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("not a model file (bad magic line)")]
    Magic,
    #[error("bad header: {0}")]
    Header(String),
    #[error("payload has {found} bytes, header needs {expected}")]
    Payload { expected: usize, found: usize },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TensorInfo {
    name: String,
    rows: usize,
    cols: usize,
    frozen: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    architecture: Architecture,
    vocabulary: Vec<String>,
    world_width: usize,
    slot_order: Vec<String>,
    tensors: Vec<TensorInfo>,
}

pub fn to_bytes(model: &Model<f32>) -> Vec<u8> {
    let header = Header {
        config: model.config.clone(),
        architecture: model.arch,
        vocabulary: model.vocab.tokens().to_vec(),
        world_width: model.world_width,
        slot_order: model.config.world.slot_order(),
        tensors: model
            .params
            .iter()
            .map(|(_, p)| TensorInfo {
                name: p.name.clone(),
                rows: p.rows,
                cols: p.cols,
                frozen: p.frozen,
            })
            .collect(),
    };
    let mut out = format!(
        "{MAGIC}\n{}\n",
        serde_json::to_string(&header).expect("header serializes")
    )
    .into_bytes();
    for (_, p) in model.params.iter() {
        for x in &p.value {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

fn split_line(bytes: &[u8]) -> Option<(&[u8], &[u8])> {
    let i = bytes.iter().position(|b| *b == b'\n')?;
    Some((&bytes[..i], &bytes[i + 1..]))
}

pub fn from_bytes(bytes: &[u8]) -> Result<Model<f32>, CheckpointError> {
    let (magic, rest) = split_line(bytes).ok_or(CheckpointError::Magic)?;
    if magic != MAGIC.as_bytes() {
        return Err(CheckpointError::Magic);
    }
    let (header, payload) = split_line(rest).ok_or_else(|| CheckpointError::Header("missing header line".into()))?;
    let header: Header = serde_json::from_slice(header).map_err(|e| CheckpointError::Header(e.to_string()))?;
    if header.world_width != header.config.world.width() {
        return Err(CheckpointError::Header("world width disagrees with config".into()));
    }
    let expected: usize = header.tensors.iter().map(|t| t.rows * t.cols * 4).sum();
    if payload.len() != expected {
        return Err(CheckpointError::Payload {
            expected,
            found: payload.len(),
        });
    }
    let mut store = ParamStore::new();
    let mut chunks = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
    for t in &header.tensors {
        let values: Vec<f32> = chunks.by_ref().take(t.rows * t.cols).collect();
        let id = store.add(&t.name, t.rows, t.cols, values);
        store.get_mut(id).frozen = t.frozen;
    }
    let vocab = Vocabulary::from_tokens(header.vocabulary);
    Model::from_params(header.config, header.architecture, vocab, store).map_err(CheckpointError::Header)
}

pub fn save(model: &Model<f32>, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
    let path = path.as_ref();
    fs::write(path, to_bytes(model)).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load(path: impl AsRef<Path>) -> Result<Model<f32>, CheckpointError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    from_bytes(&bytes)
}
