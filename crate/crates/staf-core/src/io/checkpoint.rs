//! Checkpoint persistence.
//!
//! Binary layout, all integers little-endian:
//!
//! ```text
//! magic   b"STAF"
//! version u32                      (currently 1)
//! config  u32 length + JSON bytes  (NetworkConfig)
//! layers  u32 count, then per layer:
//!         u32 rows, u32 cols, u8 pass_through,
//!         rows*cols f64 weights (row-major), rows f64 biases
//! groups  u32 count, then per group:
//!         u32 tau, tau f64 amplitudes, tau f64 frequencies, tau f64 phases
//! trailer u64 FNV-1a checksum of every preceding byte
//! ```
//!
//! The f64 payload is byte-exact, so a loaded network's forward pass is
//! bit-identical to the saved one's.

use std::path::Path;

use super::{fnv1a64, write_atomic, IoError};
use crate::mlp::{Layer, Network, NetworkConfig};
use crate::ActivationParams;
use crate::Matrix;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"STAF";

pub fn encode_checkpoint(net: &Network) -> Result<Vec<u8>, IoError> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let config = serde_json::to_vec(&net.config)
        .map_err(|e| IoError::Integrity(format!("config serialization: {e}")))?;
    out.extend_from_slice(&(config.len() as u32).to_le_bytes());
    out.extend_from_slice(&config);
    out.extend_from_slice(&(net.layers.len() as u32).to_le_bytes());
    for layer in &net.layers {
        out.extend_from_slice(&(layer.weight.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(layer.weight.cols() as u32).to_le_bytes());
        out.push(layer.pass_through as u8);
        for &v in layer.weight.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for &v in &layer.bias {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.extend_from_slice(&(net.activations.len() as u32).to_le_bytes());
    for p in &net.activations {
        out.extend_from_slice(&(p.tau() as u32).to_le_bytes());
        for &v in p.amplitudes.iter().chain(&p.frequencies).chain(&p.phases) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let checksum = fnv1a64(&out);
    out.extend_from_slice(&checksum.to_le_bytes());
    Ok(out)
}

pub fn save_checkpoint(net: &Network, path: &Path) -> Result<(), IoError> {
    write_atomic(path, &encode_checkpoint(net)?)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IoError> {
        let slice = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| IoError::Integrity(format!("truncated at byte {}", self.pos)))?;
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, IoError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u8(&mut self) -> Result<u8, IoError> {
        Ok(self.take(1)?[0])
    }

    fn f64_vec(&mut self, n: usize) -> Result<Vec<f64>, IoError> {
        let b = self.take(n * 8)?;
        Ok(b.chunks_exact(8)
            .map(|c| f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]]))
            .collect())
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Network, IoError> {
    if bytes.len() < 16 {
        return Err(IoError::Integrity("file too short for a checkpoint".into()));
    }
    let (payload, trailer) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(trailer.try_into().expect("8-byte trailer"));
    if fnv1a64(payload) != stored {
        return Err(IoError::Integrity("checksum mismatch: checkpoint is corrupted".into()));
    }
    let mut r = Reader { bytes: payload, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(IoError::Integrity("bad magic: not a checkpoint".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(IoError::VersionMismatch { found: version, supported: CHECKPOINT_VERSION });
    }
    let config_len = r.u32()? as usize;
    let config: NetworkConfig = serde_json::from_slice(r.take(config_len)?)
        .map_err(|e| IoError::Integrity(format!("config block: {e}")))?;
    let n_layers = r.u32()? as usize;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let pass_through = r.u8()? != 0;
        let weight = Matrix::from_vec(rows, cols, r.f64_vec(rows * cols)?)
            .map_err(|e| IoError::Integrity(e.to_string()))?;
        let bias = r.f64_vec(rows)?;
        layers.push(Layer { weight, bias, pass_through });
    }
    let n_groups = r.u32()? as usize;
    let mut activations = Vec::with_capacity(n_groups);
    for _ in 0..n_groups {
        let tau = r.u32()? as usize;
        let amplitudes = r.f64_vec(tau)?;
        let frequencies = r.f64_vec(tau)?;
        let phases = r.f64_vec(tau)?;
        activations.push(ActivationParams { amplitudes, frequencies, phases });
    }
    if r.pos != payload.len() {
        return Err(IoError::Integrity(format!("{} trailing bytes", payload.len() - r.pos)));
    }
    Ok(Network { config, layers, activations })
}

pub fn load_checkpoint(path: &Path) -> Result<Network, IoError> {
    decode_checkpoint(&std::fs::read(path)?)
}
