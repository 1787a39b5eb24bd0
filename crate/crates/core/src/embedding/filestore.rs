use std::collections::HashMap;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::EmbeddingBackend;
use crate::error::{Error, Result};

/// Precomputed vectors read from a binary record file. Image lookups use the
/// frame's `image_ref` as key; text lookups use the text itself.
///
/// Record layout, repeated to end of file:
/// `key_len: u32 LE | key: utf8 | dim: u32 LE | dim x f32 LE`.
#[derive(Debug, Clone)]
pub struct FileStore {
    dim: usize,
    vectors: HashMap<String, Vec<f32>>,
}

impl FileStore {
    pub fn load(path: impl AsRef<Path>, dim: usize) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_records(dim, read_records(&bytes)?))
    }

    pub fn from_records(dim: usize, records: impl IntoIterator<Item = (String, Vec<f32>)>) -> Self {
        Self { dim, vectors: records.into_iter().collect() }
    }

    pub fn get(&self, key: &str) -> Option<&[f32]> {
        self.vectors.get(key).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    fn lookup(&self, key: &str) -> Result<Vec<f32>> {
        self.get(key).map(<[f32]>::to_vec).ok_or_else(|| Error::MissingEmbedding(key.to_owned()))
    }
}

impl EmbeddingBackend for FileStore {
    fn id(&self) -> &str {
        "file"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_image_raw(&self, image_ref: &str) -> Result<Vec<f32>> {
        self.lookup(image_ref)
    }

    fn embed_text_raw(&self, text: &str) -> Result<Vec<f32>> {
        self.lookup(text)
    }
}

fn take<'a>(bytes: &mut &'a [u8], n: usize, what: &str) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(Error::parse(0, None, format!("truncated embedding record ({what})")));
    }
    let (head, tail) = bytes.split_at(n);
    *bytes = tail;
    Ok(head)
}

fn take_u32(bytes: &mut &[u8], what: &str) -> Result<usize> {
    let b = take(bytes, 4, what)?;
    Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
}

/// Decode every record; later duplicates of a key replace earlier ones.
pub fn read_records(mut bytes: &[u8]) -> Result<Vec<(String, Vec<f32>)>> {
    let mut out = Vec::new();
    while !bytes.is_empty() {
        let key_len = take_u32(&mut bytes, "key length")?;
        let key = std::str::from_utf8(take(&mut bytes, key_len, "key")?)
            .map_err(|e| Error::parse(0, None, format!("embedding key is not utf-8: {e}")))?
            .to_owned();
        let dim = take_u32(&mut bytes, "dim")?;
        let raw = take(&mut bytes, dim.checked_mul(4).ok_or_else(|| Error::parse(0, None, "dim overflow"))?, "vector")?;
        let vector = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        out.push((key, vector));
    }
    Ok(out)
}

pub fn write_records<'a, W, I>(writer: W, records: I) -> std::io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = (&'a str, &'a [f32])>,
{
    let mut w = BufWriter::new(writer);
    for (key, vector) in records {
        w.write_all(&(key.len() as u32).to_le_bytes())?;
        w.write_all(key.as_bytes())?;
        w.write_all(&(vector.len() as u32).to_le_bytes())?;
        for x in vector {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()
}
