//! Checkpoint container.
//!
//! Byte layout: the 8-byte magic `TDVARCKP`, a little-endian `u32` format
//! version, a little-endian `u64` payload length, then the payload encoded
//! with bincode 1.x (fixed-width little-endian integers, IEEE-754 floats).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tdvar_core::sampler::Chain;
use tdvar_core::var::PanelData;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const MAGIC: &[u8; 8] = b"TDVARCKP";
pub const FORMAT_VERSION: u32 = 1;
pub const FILE_NAME: &str = "checkpoint.bin";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub names: Vec<String>,
    pub data_digest: String,
    pub chains: Vec<Chain>,
}

impl Checkpoint {
    pub fn finished(&self) -> bool {
        self.chains.iter().all(|c| c.finished())
    }

    pub fn iteration(&self) -> usize {
        self.chains.iter().map(|c| c.iteration).min().unwrap_or(0)
    }
}

/// SHA-256 over the panel shape, the series names and the bit patterns of
/// every value.
pub fn data_digest(data: &PanelData) -> String {
    let mut h = Sha256::new();
    for d in [data.n(), data.t(), data.k()] {
        h.update((d as u64).to_le_bytes());
    }
    for name in &data.names {
        h.update((name.len() as u64).to_le_bytes());
        h.update(name.as_bytes());
    }
    for y in &data.subjects {
        for v in y.iter() {
            h.update(v.to_bits().to_le_bytes());
        }
    }
    format!("{:x}", h.finalize())
}

pub fn encode(ckpt: &Checkpoint) -> CliResult<Vec<u8>> {
    let payload = bincode::serialize(ckpt).map_err(|e| CliError::Checkpoint(format!("cannot encode checkpoint: {e}")))?;
    let mut out = Vec::with_capacity(20 + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> CliResult<Checkpoint> {
    let bad = |m: String| CliError::Checkpoint(m);
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(bad("not a checkpoint file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(bad(format!("checkpoint format version {version}, expected {FORMAT_VERSION}")));
    }
    let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
    if bytes.len() as u64 - 20 != len {
        return Err(bad(format!("payload is {} bytes, header says {len}", bytes.len() - 20)));
    }
    bincode::deserialize(&bytes[20..]).map_err(|e| bad(format!("corrupt checkpoint payload: {e}")))
}

pub fn save(path: &Path, ckpt: &Checkpoint) -> CliResult<()> {
    fs::write(path, encode(ckpt)?).map_err(|e| CliError::io(path, e))
}

pub fn load(path: &Path) -> CliResult<Checkpoint> {
    decode(&fs::read(path).map_err(|e| CliError::io(path, e))?)
}
