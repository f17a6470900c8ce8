//! Self-describing binary checkpoints.
//!
//! Layout: 8-byte magic, little-endian `u64` header length, JSON header
//! (format version, network spec, entropy temperature, tensor directory),
//! every tensor's data as little-endian `f64`, then the SHA-256 of all
//! preceding bytes.

use std::path::Path;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::nn::{Actor, Critic, NetworkSpec, ParamStore};
use crate::sac::{Sac, SacConfig};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"DPLXCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("truncated checkpoint: {0}")]
    Truncated(String),
    #[error("checksum mismatch")]
    Checksum,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("bad header: {0}")]
    Header(String),
    #[error("spec mismatch: {0}")]
    SpecMismatch(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorEntry {
    store: String,
    name: String,
    group: usize,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    version: u32,
    spec: NetworkSpec,
    sac: SacConfig,
    log_alpha: f64,
    tensors: Vec<TensorEntry>,
}

/// Parameters of a trained agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub spec: NetworkSpec,
    pub sac: SacConfig,
    pub log_alpha: f64,
    /// Named stores: `actor`, `critic0`, `critic1`, ...
    pub stores: Vec<(String, ParamStore)>,
}

impl Checkpoint {
    pub fn from_sac(sac: &Sac) -> Self {
        let mut stores = vec![("actor".to_string(), sac.actor.params.clone())];
        for (i, c) in sac.critics.iter().enumerate() {
            stores.push((format!("critic{i}"), c.params.clone()));
        }
        Checkpoint {
            spec: sac.actor.spec.clone(),
            sac: sac.config.clone(),
            log_alpha: sac.log_alpha,
            stores,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let tensors: Vec<TensorEntry> = self
            .stores
            .iter()
            .flat_map(|(store, p)| {
                (0..p.len()).map(move |i| TensorEntry {
                    store: store.clone(),
                    name: p.names[i].clone(),
                    group: p.groups[i],
                    rows: p.values[i].rows,
                    cols: p.values[i].cols,
                })
            })
            .collect();
        let header = serde_json::to_vec(&Header {
            version: VERSION,
            spec: self.spec.clone(),
            sac: self.sac.clone(),
            log_alpha: self.log_alpha,
            tensors,
        })
        .expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for (_, p) in &self.stores {
            for t in &p.values {
                for v in &t.data {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        if bytes.len() < MAGIC.len() {
            return Err(CheckpointError::Truncated("shorter than the magic".into()));
        }
        if &bytes[..8] != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        if bytes.len() < 16 + 32 {
            return Err(CheckpointError::Truncated("missing header length or checksum".into()));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        let hlen = u64::from_le_bytes(body[8..16].try_into().expect("8 bytes")) as usize;
        if body.len() < 16 + hlen {
            return Err(CheckpointError::Truncated("header cut short".into()));
        }
        let header: Header =
            serde_json::from_slice(&body[16..16 + hlen]).map_err(|e| CheckpointError::Header(e.to_string()))?;
        if header.version != VERSION {
            return Err(CheckpointError::Version(header.version));
        }
        let blob = &body[16 + hlen..];
        let expected: usize = header.tensors.iter().map(|t| t.rows * t.cols * 8).sum();
        if blob.len() != expected {
            return Err(CheckpointError::Truncated(format!(
                "parameter blob has {} bytes, header declares {expected}",
                blob.len()
            )));
        }
        if Sha256::digest(body).as_slice() != digest {
            return Err(CheckpointError::Checksum);
        }
        let mut stores: Vec<(String, ParamStore)> = Vec::new();
        let mut offset = 0;
        for entry in &header.tensors {
            let n = entry.rows * entry.cols;
            let data: Vec<f64> = blob[offset..offset + 8 * n]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            offset += 8 * n;
            if stores.last().is_none_or(|(s, _)| s != &entry.store) {
                stores.push((entry.store.clone(), ParamStore::new()));
            }
            let store = &mut stores.last_mut().expect("pushed").1;
            store.add(entry.name.clone(), Tensor::new(entry.rows, entry.cols, data), entry.group);
        }
        Ok(Checkpoint {
            spec: header.spec,
            sac: header.sac,
            log_alpha: header.log_alpha,
            stores,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CheckpointError> {
        Checkpoint::from_bytes(&std::fs::read(path)?)
    }

    fn store(&self, name: &str) -> Result<&ParamStore, CheckpointError> {
        self.stores
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s)
            .ok_or_else(|| CheckpointError::Header(format!("missing parameter store `{name}`")))
    }

    /// Copies saved values into a freshly built layout, checking names and shapes.
    fn fill(target: &mut ParamStore, saved: &ParamStore) -> Result<(), CheckpointError> {
        if target.len() != saved.len() {
            return Err(CheckpointError::SpecMismatch(format!(
                "{} tensors saved, layout has {}",
                saved.len(),
                target.len()
            )));
        }
        for i in 0..target.len() {
            let (t, s) = (&target.values[i], &saved.values[i]);
            if target.names[i] != saved.names[i] || t.shape() != s.shape() {
                return Err(CheckpointError::SpecMismatch(format!(
                    "tensor {i}: layout {} {:?}, saved {} {:?}",
                    target.names[i],
                    t.shape(),
                    saved.names[i],
                    s.shape()
                )));
            }
            target.values[i] = s.clone();
        }
        Ok(())
    }

    fn check_spec(&self, expected: Option<&NetworkSpec>) -> Result<(), CheckpointError> {
        match expected {
            Some(e) if e != &self.spec => Err(CheckpointError::SpecMismatch(format!(
                "checkpoint spec {:?} differs from requested {:?}",
                self.spec, e
            ))),
            _ => Ok(()),
        }
    }

    pub fn actor(&self, expected: Option<&NetworkSpec>) -> Result<Actor, CheckpointError> {
        self.check_spec(expected)?;
        let mut actor = Actor::new(self.spec.clone(), &mut ChaCha8Rng::seed_from_u64(0))
            .map_err(|e| CheckpointError::SpecMismatch(e.to_string()))?;
        Checkpoint::fill(&mut actor.params, self.store("actor")?)?;
        Ok(actor)
    }

    /// Rebuilds the agent. Optimizer moments start fresh.
    pub fn sac(&self, expected: Option<&NetworkSpec>) -> Result<Sac, CheckpointError> {
        let actor = self.actor(expected)?;
        let mut critics = Vec::new();
        for (name, saved) in self.stores.iter().filter(|(n, _)| n.starts_with("critic")) {
            let mut c = Critic::new(self.spec.clone(), &mut ChaCha8Rng::seed_from_u64(0))
                .map_err(|e| CheckpointError::SpecMismatch(e.to_string()))?;
            Checkpoint::fill(&mut c.params, saved)
                .map_err(|e| CheckpointError::SpecMismatch(format!("{name}: {e}")))?;
            critics.push(c);
        }
        if critics.is_empty() {
            return Err(CheckpointError::Header("no critic stores".into()));
        }
        let mut sac = Sac::from_parts(self.sac.clone(), actor, critics);
        sac.log_alpha = self.log_alpha;
        Ok(sac)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn spec() -> NetworkSpec {
        NetworkSpec {
            assets: 2,
            history: 5,
            conv_filters: vec![3],
            attention_heads: 1,
            attention_dim: 4,
            fc_widths: vec![6],
            ..Default::default()
        }
    }

    fn agent() -> Sac {
        Sac::new(spec(), SacConfig::default(), &mut rng::stream(9, rng::INIT)).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let sac = agent();
        let ck = Checkpoint::from_sac(&sac);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("agent.ckpt");
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        let restored = back.sac(Some(&spec())).unwrap();
        assert_eq!(restored.actor.params.values, sac.actor.params.values);
        assert_eq!(restored.critics[1].params.values, sac.critics[1].params.values);
        assert_eq!(restored.log_alpha, sac.log_alpha);
    }

    #[test]
    fn wrong_spec_is_rejected() {
        let ck = Checkpoint::from_sac(&agent());
        let other = NetworkSpec {
            fc_widths: vec![7],
            ..spec()
        };
        assert!(matches!(ck.actor(Some(&other)), Err(CheckpointError::SpecMismatch(_))));
    }

    #[test]
    fn corruption_is_an_error() {
        let bytes = Checkpoint::from_sac(&agent()).to_bytes();
        for cut in [0, 4, 12, 40, bytes.len() / 2, bytes.len() - 1] {
            assert!(Checkpoint::from_bytes(&bytes[..cut]).is_err(), "cut at {cut}");
        }
        let mut flipped = bytes.clone();
        let i = flipped.len() - 100;
        flipped[i] ^= 1;
        assert!(matches!(Checkpoint::from_bytes(&flipped), Err(CheckpointError::Checksum)));
        let mut bad = bytes;
        bad[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(CheckpointError::BadMagic)));
    }
}
