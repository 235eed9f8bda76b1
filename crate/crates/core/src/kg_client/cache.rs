use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// What the endpoint said about a query, in a cacheable form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "response", rename_all = "snake_case")]
pub enum CachedResponse {
    Ok(String),
    Rejected(String),
}

#[derive(Serialize, Deserialize)]
struct Record {
    hash: String,
    #[serde(flatten)]
    response: CachedResponse,
}

pub fn query_hash(query: &str) -> String {
    hex::encode(Sha256::digest(query.as_bytes()))
}

/// Append-only response cache keyed by the hash of the exact query string.
#[derive(Debug, Default)]
pub struct ResponseCache {
    entries: Mutex<HashMap<String, CachedResponse>>,
    file: Option<Mutex<File>>,
    in_flight: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads existing records and appends new ones to `path`. A truncated
    /// last line is ignored.
    pub fn open(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let path = path.as_ref();
        let mut entries = HashMap::new();
        if path.exists() {
            for line in BufReader::new(File::open(path)?).lines() {
                let line = line?;
                match serde_json::from_str::<Record>(&line) {
                    Ok(r) => {
                        entries.insert(r.hash, r.response);
                    }
                    Err(e) if !line.trim().is_empty() => log::warn!("skipping bad cache line: {e}"),
                    Err(_) => {}
                }
            }
        } else if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(ResponseCache { entries: Mutex::new(entries), file: Some(Mutex::new(file)), in_flight: Mutex::default() })
    }

    pub fn get(&self, query: &str) -> Option<CachedResponse> {
        self.entries.lock().unwrap().get(&query_hash(query)).cloned()
    }

    pub fn insert(&self, query: &str, response: CachedResponse) -> std::io::Result<()> {
        let hash = query_hash(query);
        if let Some(file) = &self.file {
            let line = serde_json::to_string(&Record { hash: hash.clone(), response: response.clone() })?;
            let mut f = file.lock().unwrap();
            writeln!(f, "{line}")?;
            f.flush()?;
        }
        self.entries.lock().unwrap().insert(hash, response);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Lock held while a query is being fetched so concurrent callers wait
    /// for the first result instead of issuing duplicates.
    pub(crate) fn key_lock(&self, query: &str) -> Arc<Mutex<()>> {
        self.in_flight.lock().unwrap().entry(query_hash(query)).or_default().clone()
    }
}
