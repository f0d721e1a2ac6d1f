use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EpochRecord, ModelConfig, ModelState, TENSOR_NAMES};
use crate::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"KACK";

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    config: ModelConfig,
    input_rows: usize,
    input_cols: usize,
    tensors: Vec<(String, usize)>,
    history: Vec<EpochRecord>,
    best_epoch: Option<usize>,
}

/// Layout: magic, u64 header length, JSON header, then every tensor as
/// little-endian f64 in header order.
pub fn save_checkpoint(model: &ModelState, path: &Path) -> Result<()> {
    let header = Header {
        version: CHECKPOINT_VERSION,
        config: model.config.clone(),
        input_rows: model.input_rows,
        input_cols: model.input_cols,
        tensors: TENSOR_NAMES
            .iter()
            .zip(&model.tensors)
            .map(|(n, t)| (n.to_string(), t.len()))
            .collect(),
        history: model.history.clone(),
        best_epoch: model.best_epoch,
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut buf =
        Vec::with_capacity(12 + json.len() + 8 * model.tensors.iter().map(Vec::len).sum::<usize>());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    for t in &model.tensors {
        for v in t {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<ModelState> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(Error::parse(path, "not a model checkpoint"));
    }
    let len = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")) as usize;
    let json = bytes
        .get(12..12 + len)
        .ok_or_else(|| Error::parse(path, "truncated checkpoint header"))?;
    let header: Header = serde_json::from_slice(json).map_err(|e| Error::parse(path, e))?;
    if header.version != CHECKPOINT_VERSION {
        return Err(Error::parse(
            path,
            format!(
                "checkpoint version {} (expected {CHECKPOINT_VERSION})",
                header.version
            ),
        ));
    }
    let expected = header
        .config
        .tensor_sizes(header.input_rows, header.input_cols)
        .map_err(|e| Error::parse(path, e))?;
    let names: Vec<&str> = header.tensors.iter().map(|(n, _)| n.as_str()).collect();
    let sizes: Vec<usize> = header.tensors.iter().map(|(_, s)| *s).collect();
    if names != TENSOR_NAMES || sizes != expected {
        return Err(Error::parse(
            path,
            "tensor shapes do not match the embedded config",
        ));
    }
    let mut payload = &bytes[12 + len..];
    if payload.len() != 8 * sizes.iter().sum::<usize>() {
        return Err(Error::parse(path, "weight payload has the wrong length"));
    }
    let mut tensors = Vec::with_capacity(sizes.len());
    for n in sizes {
        let (head, rest) = payload.split_at(8 * n);
        tensors.push(
            head.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect(),
        );
        payload = rest;
    }
    Ok(ModelState {
        config: header.config,
        input_rows: header.input_rows,
        input_cols: header.input_cols,
        tensors,
        history: header.history,
        best_epoch: header.best_epoch,
    })
}

pub fn write_history_csv(model: &ModelState, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e))?;
    for r in &model.history {
        w.serialize(r).map_err(|e| Error::parse(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
