//! `BFDN1` checkpoint files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "BFDN1"
//! u32      metadata length
//! [u8]     metadata (UTF-8 JSON)
//! u64      parameter float count
//! [f32]    parameters, in declared layer order
//! u64      optimizer float count (0 when absent)
//! u64      optimizer step          } only when the count is non-zero
//! [f32]    first moments, then second moments
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Model, ModelConfig, ParamRole, Provenance, INPUT_SCALE};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::training::AdamState;

pub const CHECKPOINT_MAGIC: &[u8; 5] = b"BFDN1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Metadata {
    format: String,
    writer_version: String,
    config: ModelConfig,
    provenance: Provenance,
    optimizer_state: bool,
    rng_algorithm: String,
    rng_seed: u64,
    input_scale: f64,
    normalization_layers: String,
    layers: Vec<LayerMeta>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerMeta {
    name: String,
    params: Vec<ParamMeta>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamMeta {
    name: String,
    role: ParamRole,
    shape: Vec<usize>,
}

pub fn save_to_bytes(model: &Model, optimizer: Option<&AdamState>) -> Result<Vec<u8>> {
    let meta = Metadata {
        format: "BFDN1".into(),
        writer_version: env!("CARGO_PKG_VERSION").into(),
        config: model.config.clone(),
        provenance: model.provenance.clone(),
        optimizer_state: optimizer.is_some(),
        rng_algorithm: Rng::ALGORITHM.into(),
        rng_seed: model.config.seed,
        input_scale: INPUT_SCALE,
        normalization_layers: if model.config.norm_enabled {
            "intermediate (2..L-1)".into()
        } else {
            "none".into()
        },
        layers: model
            .layers
            .iter()
            .map(|l| LayerMeta {
                name: l.name.clone(),
                params: l
                    .param_indices()
                    .into_iter()
                    .map(|i| {
                        let p = &model.params[i];
                        ParamMeta {
                            name: p.name.clone(),
                            role: p.role,
                            shape: p.shape.clone(),
                        }
                    })
                    .collect(),
            })
            .collect(),
    };
    let meta = serde_json::to_vec(&meta)?;
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta);

    let floats: usize = model.params.iter().map(|p| p.len()).sum();
    out.extend_from_slice(&(floats as u64).to_le_bytes());
    for layer in &model.layers {
        for i in layer.param_indices() {
            for v in &model.params[i].data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }

    match optimizer {
        None => out.extend_from_slice(&0u64.to_le_bytes()),
        Some(state) => {
            let n: usize = state.first.iter().chain(&state.second).map(Vec::len).sum();
            out.extend_from_slice(&(n as u64).to_le_bytes());
            out.extend_from_slice(&state.step.to_le_bytes());
            for v in state.first.iter().chain(&state.second).flatten() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn save(model: &Model, optimizer: Option<&AdamState>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, save_to_bytes(model, optimizer)?)?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<(Model, Option<AdamState>)> {
    load_from_bytes(&std::fs::read(path)?)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Checkpoint(format!("truncated while reading {what}")));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        Ok(self
            .take(n * 4, what)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }
}

pub fn load_from_bytes(bytes: &[u8]) -> Result<(Model, Option<AdamState>)> {
    if bytes.len() < CHECKPOINT_MAGIC.len() || &bytes[..5] != CHECKPOINT_MAGIC {
        let found = String::from_utf8_lossy(&bytes[..bytes.len().min(5)]).into_owned();
        return Err(Error::CheckpointVersion(found));
    }
    let mut r = Reader { buf: bytes, pos: 5 };
    let meta_len = r.u32("metadata length")? as usize;
    let meta: Metadata = serde_json::from_slice(r.take(meta_len, "metadata")?)?;
    if meta.format != "BFDN1" {
        return Err(Error::CheckpointVersion(meta.format));
    }

    let mut model = Model::build(&meta.config, &mut Rng::new(meta.config.seed))?;
    let declared = r.u64("parameter count")? as usize;
    let expected: usize = model.params.iter().map(|p| p.len()).sum();
    let present = declared.min(r.remaining() / 4);

    // Walk the layers so a short payload is reported against the layer it
    // runs out in.
    let plan: Vec<(String, Vec<usize>)> = model
        .layers
        .iter()
        .map(|l| (l.name.clone(), l.param_indices()))
        .collect();
    let mut offset = 0usize;
    for (layer, indices) in plan {
        let layer_len: usize = indices.iter().map(|&i| model.params[i].len()).sum();
        if offset + layer_len > present {
            return Err(Error::CheckpointLength {
                layer,
                expected: layer_len,
                found: present - offset,
            });
        }
        for i in indices {
            let n = model.params[i].len();
            model.params[i].data = r.f32s(n, "parameters")?;
        }
        offset += layer_len;
    }
    if declared != expected {
        return Err(Error::CheckpointLength {
            layer: "<end of payload>".into(),
            expected,
            found: declared,
        });
    }

    let opt_floats = r.u64("optimizer count")? as usize;
    let optimizer = if opt_floats == 0 {
        None
    } else {
        let step = r.u64("optimizer step")?;
        let trainable: Vec<usize> = model
            .trainable_indices()
            .into_iter()
            .map(|i| model.params[i].len())
            .collect();
        let total: usize = trainable.iter().sum::<usize>() * 2;
        if opt_floats != total {
            return Err(Error::Checkpoint(format!(
                "optimizer state holds {opt_floats} floats, model needs {total}"
            )));
        }
        let mut read = |what: &str| -> Result<Vec<Vec<f32>>> {
            trainable.iter().map(|&n| r.f32s(n, what)).collect()
        };
        let first = read("first moments")?;
        let second = read("second moments")?;
        Some(AdamState {
            step,
            first,
            second,
        })
    };
    if meta.optimizer_state != optimizer.is_some() {
        return Err(Error::Checkpoint(
            "metadata and payload disagree about optimizer state".into(),
        ));
    }
    if r.remaining() != 0 {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after payload",
            r.remaining()
        )));
    }
    model.provenance = meta.provenance;
    Ok((model, optimizer))
}
