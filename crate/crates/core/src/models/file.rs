//! Binary model files.
//!
//! ```text
//! magic "NCDMODEL" | u32 version | u64 len, header (JSON) | u64 len, payload | sha256
//! ```
//!
//! Integers and floats are little-endian. The header carries the model kind,
//! role, vocabulary fingerprint and hyperparameters; the payload holds count
//! tables sorted by key or the flat parameter vector. The trailing digest
//! covers every preceding byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CountConfig, CountModel, Model, ModelError, NeuralConfig, Role, SequenceModel, TinyNeuralModel, TrainedModel};
use crate::corpus::TokenId;

const MAGIC: &[u8; 8] = b"NCDMODEL";
pub const FORMAT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Serialize, Deserialize)]
struct Header {
    kind: String,
    role: Role,
    vocab_hash: String,
    vocab_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    count: Option<CountConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    neural: Option<NeuralConfig>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    provenance: BTreeMap<String, String>,
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_f64s(buf: &mut Vec<u8>, vs: &[f64]) {
    put_u64(buf, vs.len() as u64);
    for v in vs {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

fn put_section(buf: &mut Vec<u8>, section: &[u8]) {
    put_u64(buf, section.len() as u64);
    buf.extend_from_slice(section);
}

/// Serializes `model` to bytes. Output is a pure function of the model.
pub fn write_model(model: &TrainedModel) -> Vec<u8> {
    let mut payload = Vec::new();
    let header = match &model.model {
        Model::Count(m) => {
            let entries = m.sorted_entries();
            put_u64(&mut payload, entries.len() as u64);
            for (key, _, counts) in entries {
                put_u32(&mut payload, key.len() as u32);
                for &k in key {
                    put_u32(&mut payload, k);
                }
                put_u32(&mut payload, counts.len() as u32);
                for (t, c) in counts {
                    put_u32(&mut payload, t);
                    put_u64(&mut payload, c);
                }
            }
            Header {
                kind: "count".into(),
                role: model.role,
                vocab_hash: model.vocab_hash.clone(),
                vocab_size: m.vocab_size(),
                count: Some(m.config().clone()),
                neural: None,
                provenance: model.provenance.clone(),
            }
        }
        Model::Neural(m) => {
            put_f64s(&mut payload, &m.params);
            Header {
                kind: "neural".into(),
                role: model.role,
                vocab_hash: model.vocab_hash.clone(),
                vocab_size: m.vocab_size(),
                count: None,
                neural: Some(m.config().clone()),
                provenance: model.provenance.clone(),
            }
        }
    };
    put_f64s(&mut payload, &model.loss_history);

    let mut out = Vec::with_capacity(payload.len() + 256);
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    put_section(&mut out, &serde_json::to_vec(&header).expect("header serializes"));
    put_section(&mut out, &payload);
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| ModelError::Corrupt("unexpected end of data".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn len(&mut self) -> Result<usize, ModelError> {
        let n = self.u64()?;
        usize::try_from(n)
            .ok()
            .filter(|&n| n <= self.buf.len() - self.pos)
            .ok_or_else(|| ModelError::Corrupt(format!("length {n} exceeds remaining data")))
    }

    fn f64s(&mut self) -> Result<Vec<f64>, ModelError> {
        let n = self.len()?;
        (0..n).map(|_| Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))).collect()
    }

    fn section(&mut self) -> Result<&'a [u8], ModelError> {
        let n = self.len()?;
        self.take(n)
    }
}

pub fn read_model(bytes: &[u8]) -> Result<TrainedModel, ModelError> {
    if bytes.len() < MAGIC.len() + 4 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(ModelError::Corrupt("not a model file".into()));
    }
    let version = u32::from_le_bytes(bytes[MAGIC.len()..MAGIC.len() + 4].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(ModelError::Version { found: version, expected: FORMAT_VERSION });
    }
    if bytes.len() < MAGIC.len() + 4 + DIGEST_LEN {
        return Err(ModelError::Corrupt("unexpected end of data".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(ModelError::Corrupt("checksum mismatch".into()));
    }

    let mut r = Reader { buf: body, pos: MAGIC.len() + 4 };
    let header: Header =
        serde_json::from_slice(r.section()?).map_err(|e| ModelError::Corrupt(format!("header: {e}")))?;
    let mut p = Reader { buf: r.section()?, pos: 0 };
    if r.pos != body.len() {
        return Err(ModelError::Corrupt("trailing data".into()));
    }

    let model = match (header.kind.as_str(), header.count, header.neural) {
        ("count", Some(cfg), None) => {
            let n = p.len()?;
            let mut entries = Vec::with_capacity(n.min(1 << 20));
            for _ in 0..n {
                let klen = p.u32()? as usize;
                let key = (0..klen).map(|_| p.u32()).collect::<Result<Vec<TokenId>, _>>()?;
                let clen = p.u32()? as usize;
                let counts = (0..clen)
                    .map(|_| Ok((p.u32()?, p.u64()?)))
                    .collect::<Result<Vec<_>, ModelError>>()?;
                entries.push((key, counts));
            }
            Model::Count(CountModel::from_entries(header.vocab_size, cfg, entries)?)
        }
        ("neural", None, Some(cfg)) => {
            let params = p.f64s()?;
            Model::Neural(TinyNeuralModel::from_params(header.vocab_size, cfg, params)?)
        }
        (kind, _, _) => return Err(ModelError::Corrupt(format!("unknown or inconsistent model kind {kind:?}"))),
    };
    let loss_history = p.f64s()?;
    if p.pos != p.buf.len() {
        return Err(ModelError::Corrupt("trailing payload data".into()));
    }
    Ok(TrainedModel {
        role: header.role,
        vocab_hash: header.vocab_hash,
        model,
        loss_history,
        provenance: header.provenance,
    })
}

pub fn save_model(model: &TrainedModel, path: impl AsRef<Path>) -> Result<(), ModelError> {
    fs::write(path, write_model(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel, ModelError> {
    read_model(&fs::read(path)?)
}
