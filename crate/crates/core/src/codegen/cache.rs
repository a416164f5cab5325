use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::jsonl::{read_jsonl, JsonlError};

/// Identity of one cached completion.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub model_id: String,
    pub prompt_hash: String,
    temperature_bits: u64,
    pub seed_index: usize,
}

impl CacheKey {
    pub fn new(model_id: &str, prompt_text: &str, temperature: f64, seed_index: usize) -> Self {
        CacheKey {
            model_id: model_id.to_string(),
            prompt_hash: prompt_hash(prompt_text),
            temperature_bits: temperature.to_bits(),
            seed_index,
        }
    }

    pub fn temperature(&self) -> f64 {
        f64::from_bits(self.temperature_bits)
    }
}

pub fn prompt_hash(prompt_text: &str) -> String {
    hex::encode(Sha256::digest(prompt_text.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub model_id: String,
    pub prompt_hash: String,
    pub temperature: f64,
    pub seed_index: usize,
    pub prompt_version: String,
    pub raw_output: String,
    pub created_at: DateTime<Utc>,
}

impl CacheRecord {
    pub fn key(&self) -> CacheKey {
        CacheKey {
            model_id: self.model_id.clone(),
            prompt_hash: self.prompt_hash.clone(),
            temperature_bits: self.temperature.to_bits(),
            seed_index: self.seed_index,
        }
    }
}

/// Completion cache backed by an append-only JSONL file.
///
/// Readers share the in-memory index; appends go through a single writer
/// lock. Later records for the same key shadow earlier ones.
#[derive(Debug, Default)]
pub struct VariantCache {
    entries: RwLock<HashMap<CacheKey, CacheRecord>>,
    writer: Option<Mutex<BufWriter<File>>>,
    path: Option<PathBuf>,
}

impl VariantCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (creating if needed) a cache file and indexes its records.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, JsonlError> {
        let path = path.as_ref();
        let mut entries = HashMap::new();
        if path.exists() {
            for record in read_jsonl::<CacheRecord>(path)? {
                entries.insert(record.key(), record);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(VariantCache {
            entries: RwLock::new(entries),
            writer: Some(Mutex::new(BufWriter::new(file))),
            path: Some(path.to_path_buf()),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, key: &CacheKey) -> Option<CacheRecord> {
        self.entries.read().expect("cache lock").get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn insert(&self, record: CacheRecord) -> Result<(), JsonlError> {
        if let Some(writer) = &self.writer {
            let mut w = writer.lock().expect("cache writer lock");
            serde_json::to_writer(&mut *w, &record)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        self.entries
            .write()
            .expect("cache lock")
            .insert(record.key(), record);
        Ok(())
    }
}

/// Rewrites a cache file keeping only the newest record per key, in
/// first-seen key order. Returns (records before, records after).
pub fn compact(path: impl AsRef<Path>) -> Result<(usize, usize), JsonlError> {
    let path = path.as_ref();
    let records: Vec<CacheRecord> = read_jsonl(path)?;
    let before = records.len();
    let mut order = Vec::new();
    let mut latest: HashMap<CacheKey, CacheRecord> = HashMap::new();
    for r in records {
        let key = r.key();
        if !latest.contains_key(&key) {
            order.push(key.clone());
        }
        latest.insert(key, r);
    }
    let tmp = path.with_extension("jsonl.compacting");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        for key in &order {
            serde_json::to_writer(&mut w, &latest[key])?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok((before, order.len()))
}
