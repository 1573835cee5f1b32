//! Parameter checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! b"ANLGCKPT"            magic
//! u32                    format version (1)
//! u32                    header length in bytes
//! [u8; header length]    JSON header: encoder config, label names, free-form info
//! u64                    number of parameters
//! [f64; n]               parameter values, little-endian IEEE-754
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EncoderConfig, Parameters};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"ANLGCKPT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub encoder: EncoderConfig,
    pub labels: Vec<String>,
    pub info: serde_json::Value,
    pub params: Parameters,
}

#[derive(Serialize, Deserialize)]
struct Header {
    encoder: EncoderConfig,
    labels: Vec<String>,
    #[serde(default)]
    info: serde_json::Value,
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    if ckpt.encoder.dims() != ckpt.params.dims() {
        return Err(Error::Checkpoint("encoder config does not match parameter shape".into()));
    }
    let header = serde_json::to_vec(&Header {
        encoder: ckpt.encoder.clone(),
        labels: ckpt.labels.clone(),
        info: ckpt.info.clone(),
    })?;
    let values = ckpt.params.values();
    let mut buf = Vec::with_capacity(24 + header.len() + values.len() * 8);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header);
    buf.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    let bad = |m: &str| Error::Checkpoint(format!("{}: {m}", path.display()));
    let mut at = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = buf.get(at..at + n).ok_or_else(|| bad("truncated"))?;
        at += n;
        Ok(s)
    };
    if take(8)? != MAGIC {
        return Err(bad("bad magic"));
    }
    let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let hlen = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
    let header: Header = serde_json::from_slice(take(hlen)?)?;
    let n = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
    let raw = take(n.checked_mul(8).ok_or_else(|| bad("length overflow"))?)?;
    let values = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if at != buf.len() {
        return Err(bad("trailing bytes"));
    }
    header.encoder.validate()?;
    let params = Parameters::from_values(header.encoder.dims(), values)?;
    Ok(Checkpoint {
        encoder: header.encoder,
        labels: header.labels,
        info: header.info,
        params,
    })
}
