use std::io::Write;
use std::path::{Path, PathBuf};

use super::GenerationRequest;
use crate::error::{Error, Result};
use crate::prompt::TEMPLATE_VERSION;
use crate::util::{hash_fields, sha256_hex};

const HEADER: &str = "actsense-completion 1";

/// Content-addressed completion store laid out as
/// `{dir}/{first two hex digits}/{key}.txt`.
///
/// Entries carry a checksum line; an entry that fails to read or verify is
/// treated as a miss and overwritten. Writes go through a temporary file in
/// the shard directory followed by a rename, so readers never observe a
/// partial entry and concurrent writers of one key leave a single file.
#[derive(Debug, Clone)]
pub struct GenerationCache {
    dir: PathBuf,
}

impl GenerationCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key(req: &GenerationRequest) -> String {
        let seed = match req.seed {
            Some(s) => format!("some:{s}"),
            None => "none".to_owned(),
        };
        hex::encode(hash_fields([
            TEMPLATE_VERSION.as_bytes(),
            req.prompt.text.as_bytes(),
            &req.max_tokens.to_le_bytes(),
            &req.temperature.to_bits().to_le_bytes(),
            seed.as_bytes(),
        ]))
    }

    pub fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{key}.txt"))
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let path = self.entry_path(key);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return None,
            Err(e) => {
                log::warn!("ignoring unreadable cache entry {}: {e}", path.display());
                return None;
            }
        };
        let parsed = std::str::from_utf8(&bytes).ok().and_then(|s| {
            let (header, text) = s.split_once('\n')?;
            let checksum = header.strip_prefix(HEADER)?.trim();
            (checksum == sha256_hex(text.as_bytes())).then(|| text.to_owned())
        });
        if parsed.is_none() {
            log::warn!("ignoring corrupt cache entry {}", path.display());
        }
        parsed
    }

    pub fn put(&self, key: &str, text: &str) -> Result<()> {
        let path = self.entry_path(key);
        let shard = path.parent().expect("entry has a shard dir");
        std::fs::create_dir_all(shard).map_err(|e| Error::io(shard, e))?;
        let mut tmp = tempfile::Builder::new().prefix(".tmp-").tempfile_in(shard).map_err(|e| Error::io(shard, e))?;
        write!(tmp, "{HEADER} {}\n{text}", sha256_hex(text.as_bytes())).map_err(|e| Error::io(tmp.path(), e))?;
        tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
        tmp.persist(&path).map_err(|e| Error::io(&path, e.error))?;
        Ok(())
    }
}
