//! Versioned binary checkpoints.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic     8 bytes  "LSTCCKPT"
//! version   u32
//! config    u32 length + UTF-8 TOML text
//! arrays    u32 count, then per array:
//!           u32 name length + UTF-8 name, u64 value count, f64 values
//! ```
//!
//! Network arrays are named `<network>.<array>` as produced by
//! [`Mlp::export`](crate::nn::Mlp::export). The learner state adds
//! `lagrange` (`[lambda_long, lambda_short]`) and `progress`
//! (`[epoch, steps]`). All random streams derive from the seed in the config
//! and the epoch counter, so no generator state is stored.

use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::agent::Agent;
use crate::config::{ConfigError, RunConfig};
use crate::nn::{Mlp, NnError};
use crate::train::Trainer;

pub const MAGIC: &[u8; 8] = b"LSTCCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}: not a checkpoint file")]
    Magic(PathBuf),
    #[error("{path}: checkpoint format version {found}, this build reads version {expected}")]
    Version {
        path: PathBuf,
        found: u32,
        expected: u32,
    },
    #[error("{path}: malformed checkpoint: {message}")]
    Malformed { path: PathBuf, message: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Network { path: PathBuf, source: NnError },
}

/// Everything needed to continue or evaluate a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub trainer: Trainer,
}

const NETWORKS: [&str; 4] = ["policy", "value", "cost_value", "validation"];

impl Checkpoint {
    pub fn new(config: RunConfig, trainer: Trainer) -> Self {
        Self { config, trainer }
    }

    pub fn arrays(&self) -> Vec<(String, Vec<f64>)> {
        let mut out = Vec::new();
        for (name, net) in self.trainer.agent.networks() {
            for (array, values) in net.export() {
                out.push((format!("{name}.{array}"), values));
            }
        }
        let l = &self.trainer.lagrange;
        out.push(("lagrange".into(), vec![l.lambda_long, l.lambda_short]));
        out.push((
            "progress".into(),
            vec![self.trainer.epoch as f64, self.trainer.steps as f64],
        ));
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        let text = self.config.to_toml();
        buf.extend_from_slice(&(text.len() as u32).to_le_bytes());
        buf.extend_from_slice(text.as_bytes());
        let arrays = self.arrays();
        buf.extend_from_slice(&(arrays.len() as u32).to_le_bytes());
        for (name, values) in &arrays {
            buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
            buf.extend_from_slice(name.as_bytes());
            buf.extend_from_slice(&(values.len() as u64).to_le_bytes());
            for v in values {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self, CheckpointError> {
        let mut r = Reader { bytes, pos: 0, path };
        if r.take(8)? != MAGIC {
            return Err(CheckpointError::Magic(path.to_path_buf()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(CheckpointError::Version {
                path: path.to_path_buf(),
                found: version,
                expected: VERSION,
            });
        }
        let len = r.u32()? as usize;
        let text = std::str::from_utf8(r.take(len)?).map_err(|_| r.malformed("config text is not UTF-8"))?;
        let config = RunConfig::parse(text, &format!("{} (embedded config)", path.display()))?;
        let count = r.u32()? as usize;
        let mut arrays = Vec::with_capacity(count);
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| r.malformed("array name is not UTF-8"))?
                .to_string();
            let n = r.u64()? as usize;
            let raw = r.take(n.checked_mul(8).ok_or_else(|| r.malformed("array too long"))?)?;
            let values: Vec<f64> = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            arrays.push((name, values));
        }
        if r.pos != bytes.len() {
            return Err(r.malformed("trailing bytes"));
        }

        let net_err = |source| CheckpointError::Network {
            path: path.to_path_buf(),
            source,
        };
        let mut nets: Vec<Mlp> = Vec::with_capacity(4);
        for name in NETWORKS {
            let prefix = format!("{name}.");
            let own: Vec<(String, Vec<f64>)> = arrays
                .iter()
                .filter_map(|(n, v)| n.strip_prefix(&prefix).map(|s| (s.to_string(), v.clone())))
                .collect();
            nets.push(Mlp::import(&own).map_err(net_err)?);
        }
        let get = |name: &str, len: usize| -> Result<&Vec<f64>, CheckpointError> {
            arrays
                .iter()
                .find(|(n, v)| n == name && v.len() == len)
                .map(|(_, v)| v)
                .ok_or_else(|| CheckpointError::Malformed {
                    path: path.to_path_buf(),
                    message: format!("missing or misshaped array `{name}`"),
                })
        };
        let lagrange = get("lagrange", 2)?;
        let progress = get("progress", 2)?;

        let mut trainer = config.trainer();
        let mut nets = nets.into_iter();
        trainer.agent = Agent {
            policy: nets.next().expect("four networks"),
            value: nets.next().expect("four networks"),
            cost_value: nets.next().expect("four networks"),
            validation: nets.next().expect("four networks"),
        };
        trainer.lagrange.lambda_long = lagrange[0];
        trainer.lagrange.lambda_short = lagrange[1];
        trainer.epoch = progress[0] as u64;
        trainer.steps = progress[1] as u64;
        Ok(Self { config, trainer })
    }

    /// Writes to a sibling temporary file, then renames it over `path`.
    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        write_atomic(path, &self.to_bytes()).map_err(|source| CheckpointError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|source| CheckpointError::Io {
                path: path.to_path_buf(),
                source,
            })?;
        Self::from_bytes(&bytes, path)
    }
}

/// Atomic file replacement via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn malformed(&self, message: &str) -> CheckpointError {
        CheckpointError::Malformed {
            path: self.path.to_path_buf(),
            message: format!("{message} (at byte {})", self.pos),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.bytes.len() - self.pos < n {
            return Err(self.malformed("unexpected end of file"));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let mut config = RunConfig::default();
        config.run.seed = 42;
        let mut trainer = config.trainer();
        trainer.epoch = 3;
        trainer.steps = 60_000;
        trainer.lagrange.lambda_long = 0.123_456_789;
        trainer.agent.policy.adam.step = 17;
        trainer.agent.value.adam.m[0][5] = -1e-300;
        Checkpoint::new(config, trainer)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.bin");
        let ck = sample();
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes(), ck.to_bytes());
        assert!(!dir.path().join("ck.bin.tmp").exists());
    }

    #[test]
    fn version_mismatch_names_both_versions() {
        let mut bytes = sample().to_bytes();
        bytes[8..12].copy_from_slice(&9u32.to_le_bytes());
        let err = Checkpoint::from_bytes(&bytes, Path::new("x")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("version 9") && msg.contains("version 1"), "{msg}");
    }

    #[test]
    fn truncation_and_garbage_rejected() {
        let bytes = sample().to_bytes();
        assert!(matches!(
            Checkpoint::from_bytes(&bytes[..bytes.len() - 3], Path::new("x")),
            Err(CheckpointError::Malformed { .. })
        ));
        assert!(matches!(
            Checkpoint::from_bytes(b"not a checkpoint", Path::new("x")),
            Err(CheckpointError::Magic(_))
        ));
    }
}
