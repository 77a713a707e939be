//! Binary checkpoint files.
//!
//! All integers and floats are little-endian.
//!
//! | field | size |
//! |---|---|
//! | magic `ASIPPO\0\0` | 8 |
//! | format version (u32) | 4 |
//! | obs dim, act dim, hidden layer count (u32 each) | 12 |
//! | hidden layer widths (u32 each) | 4 per layer |
//! | training step (u64) | 8 |
//! | config hash (SHA-256) | 32 |
//! | parameter count (u64), parameters (f64) | 8 + 8n |
//! | normalizer count (u64), means, squared deviations (f64) | 8 + 16 obs dim |
//! | SHA-256 of everything above | 32 |

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::net::{NetShape, PolicyParams};

pub const MAGIC: [u8; 8] = *b"ASIPPO\0\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint I/O on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint format version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("checkpoint expects {found}-dim observations, environment produces {expected}")]
    ObsDim { found: usize, expected: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: PolicyParams,
    pub step: u64,
    pub config_hash: [u8; 32],
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let shape = self.params.shape();
        let mut b = Vec::with_capacity(128 + 8 * self.params.len());
        b.extend_from_slice(&MAGIC);
        b.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        for x in [shape.obs_dim, shape.act_dim, shape.hidden.len()] {
            b.extend_from_slice(&(x as u32).to_le_bytes());
        }
        for h in &shape.hidden {
            b.extend_from_slice(&(*h as u32).to_le_bytes());
        }
        b.extend_from_slice(&self.step.to_le_bytes());
        b.extend_from_slice(&self.config_hash);
        b.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for x in &self.params.theta {
            b.extend_from_slice(&x.to_le_bytes());
        }
        let norm = &self.params.normalizer;
        b.extend_from_slice(&norm.count.to_le_bytes());
        for x in norm.mean.iter().chain(&norm.m2) {
            b.extend_from_slice(&x.to_le_bytes());
        }
        let digest = Sha256::digest(&b);
        b.extend_from_slice(&digest);
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        if bytes.len() < MAGIC.len() + 4 + 32 {
            return Err(CheckpointError::Corrupt("file too short".into()));
        }
        if bytes[..8] != MAGIC {
            return Err(CheckpointError::Corrupt("bad magic".into()));
        }
        let mut r = Reader { b: bytes, at: 8 };
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(CheckpointError::Version {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(CheckpointError::Corrupt("checksum mismatch".into()));
        }
        let obs_dim = r.u32()? as usize;
        let act_dim = r.u32()? as usize;
        let layers = r.u32()? as usize;
        if layers > 64 {
            return Err(CheckpointError::Corrupt(format!("{layers} hidden layers")));
        }
        let hidden = (0..layers).map(|_| r.u32().map(|h| h as usize)).collect::<Result<Vec<_>, _>>()?;
        let step = r.u64()?;
        let mut config_hash = [0u8; 32];
        config_hash.copy_from_slice(r.take(32)?);
        let mut params = PolicyParams::zeros(NetShape::new(obs_dim, &hidden, act_dim));
        let n = r.u64()? as usize;
        if n != params.len() {
            return Err(CheckpointError::Corrupt(format!(
                "{n} parameters for a network of {}",
                params.len()
            )));
        }
        for x in params.theta.iter_mut() {
            *x = r.f64()?;
        }
        params.normalizer.count = r.u64()?;
        for i in 0..obs_dim {
            params.normalizer.mean[i] = r.f64()?;
        }
        for i in 0..obs_dim {
            params.normalizer.m2[i] = r.f64()?;
        }
        if r.at != body.len() {
            return Err(CheckpointError::Corrupt("trailing bytes".into()));
        }
        Ok(Checkpoint {
            params,
            step,
            config_hash,
        })
    }

    /// Rejects a checkpoint whose input width differs from `obs_dim`.
    pub fn check_compatible(&self, obs_dim: usize) -> Result<(), CheckpointError> {
        let found = self.params.shape().obs_dim;
        if found != obs_dim {
            return Err(CheckpointError::ObsDim {
                found,
                expected: obs_dim,
            });
        }
        Ok(())
    }
}

struct Reader<'a> {
    b: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.at.checked_add(n).filter(|e| *e <= self.b.len());
        match end {
            Some(e) => {
                let s = &self.b[self.at..e];
                self.at = e;
                Ok(s)
            }
            None => Err(CheckpointError::Corrupt("unexpected end of file".into())),
        }
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<(), CheckpointError> {
    let io = |source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(&ckpt.to_bytes()).map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let bytes = fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Checkpoint::from_bytes(&bytes)
}
