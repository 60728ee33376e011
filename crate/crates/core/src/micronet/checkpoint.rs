//! Checkpoint layout: magic `DPW1`, the 32-byte architecture digest, `u64` LE
//! parameter count, then the parameters as `f64` LE.

use std::fs;
use std::path::Path;

use super::{Architecture, MicroNet};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"DPW1";
const HEADER_LEN: usize = 4 + 32 + 8;

pub fn encode_checkpoint(net: &MicroNet) -> Vec<u8> {
    let params = net.params();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * params.len());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&net.architecture().digest());
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8], arch: Architecture, origin: &Path) -> Result<MicroNet> {
    let bad = |message: String| Error::Checkpoint {
        path: origin.to_path_buf(),
        message,
    };
    if bytes.len() < HEADER_LEN || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(bad("not a DPW1 checkpoint".into()));
    }
    if bytes[4..36] != arch.digest() {
        return Err(bad("architecture digest does not match".into()));
    }
    let n = u64::from_le_bytes(bytes[36..44].try_into().unwrap()) as usize;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != n * 8 {
        return Err(bad(format!(
            "length mismatch: {n} parameters need {} bytes, found {}",
            n * 8,
            payload.len()
        )));
    }
    let params = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let mut net = MicroNet::zeros(arch)?;
    net.set_params(params)?;
    Ok(net)
}

pub fn store_checkpoint(net: &MicroNet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(net)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>, arch: Architecture) -> Result<MicroNet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, arch, path)
}
