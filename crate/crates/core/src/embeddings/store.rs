use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::EmbeddingError;

const MAGIC: &[u8; 8] = b"SQGEMB01";

/// Dimension of the knowledge-graph vectors.
pub const KG_DIM: usize = 200;
/// Dimension of the contextual token vectors.
pub const CONTEXT_DIM: usize = 768;

/// Keyed fixed-dimension vectors, shared by both store kinds.
#[derive(Debug, Clone, PartialEq)]
struct VectorTable {
    dim: usize,
    rows: HashMap<String, Vec<Vec<f32>>>,
}

impl VectorTable {
    fn new(dim: usize) -> Self {
        VectorTable { dim, rows: HashMap::new() }
    }

    fn insert(&mut self, key: String, vectors: Vec<Vec<f32>>) -> Result<(), EmbeddingError> {
        for v in &vectors {
            if v.len() != self.dim {
                return Err(EmbeddingError::DimensionMismatch { key, expected: self.dim, found: v.len() });
            }
        }
        self.rows.insert(key, vectors);
        Ok(())
    }

    // record: u32 key length, key bytes, u32 vector count, count * dim f32
    fn write(&self, path: &Path) -> Result<(), EmbeddingError> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.rows.len() as u64).to_le_bytes())?;
        let mut keys: Vec<&String> = self.rows.keys().collect();
        keys.sort();
        for key in keys {
            let vectors = &self.rows[key];
            w.write_all(&(key.len() as u32).to_le_bytes())?;
            w.write_all(key.as_bytes())?;
            w.write_all(&(vectors.len() as u32).to_le_bytes())?;
            for v in vectors {
                for x in v {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    fn read(path: &Path, expected_dim: usize) -> Result<Self, EmbeddingError> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(EmbeddingError::BadMagic);
        }
        let dim = read_u32(&mut r)? as usize;
        if dim != expected_dim {
            return Err(EmbeddingError::DimensionMismatch {
                key: "<header>".into(),
                expected: expected_dim,
                found: dim,
            });
        }
        let count = read_u64(&mut r)?;
        let mut table = VectorTable::new(dim);
        let mut buf = vec![0u8; dim * 4];
        for _ in 0..count {
            let klen = read_u32(&mut r)? as usize;
            let mut key = vec![0u8; klen];
            r.read_exact(&mut key)?;
            let key = String::from_utf8(key).map_err(|_| EmbeddingError::Corrupt("key is not UTF-8"))?;
            let n = read_u32(&mut r)? as usize;
            let mut vectors = Vec::with_capacity(n);
            for _ in 0..n {
                r.read_exact(&mut buf)?;
                vectors.push(
                    buf.chunks_exact(4)
                        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                        .collect(),
                );
            }
            table.rows.insert(key, vectors);
        }
        Ok(table)
    }
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Precomputed translational KG vectors keyed by IRI.
#[derive(Debug, Clone, PartialEq)]
pub struct KgEmbeddingStore {
    table: VectorTable,
}

impl Default for KgEmbeddingStore {
    fn default() -> Self {
        Self::new()
    }
}

impl KgEmbeddingStore {
    pub fn new() -> Self {
        KgEmbeddingStore { table: VectorTable::new(KG_DIM) }
    }

    pub fn dim(&self) -> usize {
        self.table.dim
    }

    pub fn len(&self) -> usize {
        self.table.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.rows.is_empty()
    }

    pub fn insert(&mut self, iri: impl Into<String>, vector: Vec<f32>) -> Result<(), EmbeddingError> {
        self.table.insert(iri.into(), vec![vector])
    }

    /// `None` is an explicit miss; absent IRIs are never zero-filled.
    pub fn get(&self, iri: &str) -> Option<&[f32]> {
        self.table.rows.get(iri).map(|v| v[0].as_slice())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EmbeddingError> {
        self.table.write(path.as_ref())
    }

    /// Reads the binary format, or `key<TAB>v1<TAB>...` when the file ends in `.tsv`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, EmbeddingError> {
        let path = path.as_ref();
        let store = if path.extension().is_some_and(|e| e == "tsv") {
            Self::from_tsv(BufReader::new(File::open(path)?))?
        } else {
            KgEmbeddingStore { table: VectorTable::read(path, KG_DIM)? }
        };
        log::info!("loaded {} KG vectors of dimension {} from {}", store.len(), store.dim(), path.display());
        Ok(store)
    }

    pub fn from_tsv(reader: impl BufRead) -> Result<Self, EmbeddingError> {
        let mut store = Self::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let key = fields.next().unwrap_or_default().to_string();
            let vector = fields
                .map(|f| f.trim().parse::<f32>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| EmbeddingError::Parse { line: i + 1 })?;
            if key.is_empty() {
                return Err(EmbeddingError::Parse { line: i + 1 });
            }
            store.insert(key, vector)?;
        }
        Ok(store)
    }
}

pub fn load_kg_embeddings(path: impl AsRef<Path>) -> Result<KgEmbeddingStore, EmbeddingError> {
    KgEmbeddingStore::load(path)
}

/// Per-text contextual token vectors, keyed by a hash of the text.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextualEmbeddingStore {
    table: VectorTable,
}

impl Default for ContextualEmbeddingStore {
    fn default() -> Self {
        Self::new()
    }
}

pub fn text_key(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl ContextualEmbeddingStore {
    pub fn new() -> Self {
        ContextualEmbeddingStore { table: VectorTable::new(CONTEXT_DIM) }
    }

    pub fn dim(&self) -> usize {
        self.table.dim
    }

    pub fn len(&self) -> usize {
        self.table.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.rows.is_empty()
    }

    /// Stores one vector per whitespace token of `text`.
    pub fn insert(&mut self, text: &str, vectors: Vec<Vec<f32>>) -> Result<(), EmbeddingError> {
        let n = text.split_whitespace().count();
        if vectors.len() != n {
            return Err(EmbeddingError::TokenCountMismatch { expected: n, found: vectors.len() });
        }
        self.table.insert(text_key(text), vectors)
    }

    pub fn get(&self, text: &str) -> Option<&[Vec<f32>]> {
        self.table.rows.get(&text_key(text)).map(Vec::as_slice)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EmbeddingError> {
        self.table.write(path.as_ref())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EmbeddingError> {
        Ok(ContextualEmbeddingStore { table: VectorTable::read(path.as_ref(), CONTEXT_DIM)? })
    }
}
