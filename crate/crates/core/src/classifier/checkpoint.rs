use std::io::Write;
use std::path::Path;

use super::MlpParams;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"ACTSMLP\0";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Layout: magic, version, din, h1, h2, n (u32 LE), then w1, b1, w2, b2,
/// w3, b3 as row-major f32 LE.
pub fn write_checkpoint(params: &MlpParams) -> Vec<u8> {
    let [h1, h2] = params.hidden();
    let mut out = Vec::with_capacity(28 + 4 * params.num_params());
    out.extend_from_slice(MAGIC);
    for v in [CHECKPOINT_VERSION, params.din() as u32, h1 as u32, h2 as u32, params.num_classes() as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for t in params.tensors() {
        for x in t {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<MlpParams> {
    let bad = |m: String| Error::Checkpoint(m);
    if bytes.len() < 28 || &bytes[..8] != MAGIC {
        return Err(bad("not a classifier checkpoint".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().expect("4 bytes"));
    let version = word(0);
    if version != CHECKPOINT_VERSION {
        return Err(Error::CheckpointVersion(version));
    }
    let (din, h1, h2, n) = (word(1) as usize, word(2) as usize, word(3) as usize, word(4) as usize);
    if din == 0 || h1 == 0 || h2 == 0 || n == 0 {
        return Err(bad("zero-sized layer".into()));
    }
    let mut params = MlpParams::zeros(din, [h1, h2], n);
    let expected = 28 + 4 * params.num_params();
    if bytes.len() != expected {
        return Err(bad(format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let mut floats = bytes[28..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")));
    for t in params.tensors_mut() {
        for x in t.iter_mut() {
            *x = floats.next().expect("length checked");
        }
    }
    Ok(params)
}

pub fn save_checkpoint(params: &MlpParams, path: &Path) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(&write_checkpoint(params)).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<MlpParams> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&bytes)
}
