//! Versioned plain-text network checkpoints.
//!
//! ```text
//! eitnet-checkpoint 1
//! layers 2 26 26 26 10 1
//! epoch 2000
//! rng 1234
//! config <hex sha-256 of the run config>
//! params 1763
//! <one parameter per line, 17 significant digits>
//! checksum <hex sha-256 of every preceding line>
//! end
//! ```

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::diffnet::{param_count, DenseNet};
use crate::error::{CheckpointError, Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &str = "eitnet-checkpoint";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub net: DenseNet,
    pub epoch: usize,
    pub rng_state: u64,
    pub config_digest: String,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let mut body = format!("{MAGIC} {CHECKPOINT_VERSION}\nlayers");
        for n in self.net.layer_sizes() {
            body.push_str(&format!(" {n}"));
        }
        body.push_str(&format!(
            "\nepoch {}\nrng {}\nconfig {}\nparams {}\n",
            self.epoch,
            self.rng_state,
            self.config_digest,
            self.net.num_params()
        ));
        for p in self.net.params() {
            body.push_str(&format!("{p:.16e}\n"));
        }
        let sum = hex(&Sha256::digest(body.as_bytes()));
        body.push_str(&format!("checksum {sum}\nend\n"));
        body
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let err = |kind| Error::Checkpoint {
            path: path.to_path_buf(),
            kind,
        };
        let malformed = |line: usize, message: &str| {
            err(CheckpointError::Malformed {
                line,
                message: message.to_string(),
            })
        };
        let lines: Vec<&str> = text.lines().collect();
        let header = lines.first().ok_or_else(|| err(CheckpointError::Truncated("empty file".into())))?;
        match header.split_once(' ') {
            Some((MAGIC, v)) if v == CHECKPOINT_VERSION.to_string() => {}
            Some((MAGIC, v)) => return Err(err(CheckpointError::Version(v.to_string()))),
            _ => return Err(err(CheckpointError::Version(header.to_string()))),
        }
        let field = |i: usize, name: &str| -> Result<&str> {
            let line = lines
                .get(i)
                .ok_or_else(|| err(CheckpointError::Truncated(format!("missing `{name}` line"))))?;
            line.strip_prefix(name)
                .and_then(|r| r.strip_prefix(' '))
                .ok_or_else(|| malformed(i + 1, &format!("expected `{name}`")))
        };
        let layers: Vec<usize> = field(1, "layers")?
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| malformed(2, "bad layer size"))?;
        let epoch = field(2, "epoch")?.parse().map_err(|_| malformed(3, "bad epoch"))?;
        let rng_state = field(3, "rng")?.parse().map_err(|_| malformed(4, "bad rng state"))?;
        let config_digest = field(4, "config")?.to_string();
        let count: usize = field(5, "params")?.parse().map_err(|_| malformed(6, "bad count"))?;
        if count != param_count(&layers) {
            return Err(malformed(6, "parameter count does not match layers"));
        }
        let first = 6;
        if lines.len() < first + count + 2 || lines.last() != Some(&"end") {
            return Err(err(CheckpointError::Truncated(format!(
                "{} of {} lines",
                lines.len(),
                first + count + 2
            ))));
        }
        let mut params = Vec::with_capacity(count);
        for (i, line) in lines[first..first + count].iter().enumerate() {
            let v: f64 = line
                .parse()
                .map_err(|_| malformed(first + i + 1, "bad parameter"))?;
            params.push(v);
        }
        let found = field(first + count, "checksum")?;
        let body_len: usize = lines[..first + count].iter().map(|l| l.len() + 1).sum();
        let expected = hex(&Sha256::digest(&text.as_bytes()[..body_len.min(text.len())]));
        if found != expected {
            return Err(err(CheckpointError::DigestMismatch {
                expected,
                found: found.to_string(),
            }));
        }
        if lines.len() != first + count + 2 {
            return Err(malformed(first + count + 2, "trailing content"));
        }
        Ok(Self {
            net: DenseNet::from_params(&layers, params)?,
            epoch,
            rng_state,
            config_digest,
        })
    }
}

/// Writes via a temporary file and rename, so a crash never leaves a partial checkpoint.
pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, ckpt.to_text())
        .map_err(|e| Error::io(format!("writing {}", tmp.display()), e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::Checkpoint {
                path: path.to_path_buf(),
                kind: CheckpointError::Missing,
            }
        } else {
            Error::io(format!("reading {}", path.display()), e)
        }
    })?;
    Checkpoint::from_text(&text, path)
}

/// Loads a checkpoint and checks that it was written under `config_digest`.
pub fn load_checkpoint_for(path: &Path, config_digest: &str) -> Result<Checkpoint> {
    let ckpt = load_checkpoint(path)?;
    if ckpt.config_digest != config_digest {
        return Err(Error::Checkpoint {
            path: path.to_path_buf(),
            kind: CheckpointError::DigestMismatch {
                expected: config_digest.to_string(),
                found: ckpt.config_digest,
            },
        });
    }
    Ok(ckpt)
}
