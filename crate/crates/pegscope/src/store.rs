//! Append-only record store with canonical serialization.
//!
//! One log file per namespace; every write is a visible line of the form
//! `<key-serialization>\t<canonical JSON>`. An in-memory index is rebuilt on
//! open. Insertion timestamps live in a `.meta` sidecar so payload bytes are
//! replay-stable.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use chrono::NaiveDate;
use serde::Serialize;
use serde_json::Value;
use sha2::Digest;

use crate::canonical;
use crate::error::{Error, Result};
use crate::types::AssetId;

/// Record namespaces. `Outcome` and `Trace` hold pipeline results; the first
/// three hold ingested source data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Namespace {
    Market,
    Attestation,
    News,
    Outcome,
    Trace,
}

impl Namespace {
    pub fn as_str(self) -> &'static str {
        match self {
            Namespace::Market => "market",
            Namespace::Attestation => "attestation",
            Namespace::News => "news",
            Namespace::Outcome => "outcome",
            Namespace::Trace => "trace",
        }
    }

    pub fn all() -> [Namespace; 5] {
        [
            Namespace::Market,
            Namespace::Attestation,
            Namespace::News,
            Namespace::Outcome,
            Namespace::Trace,
        ]
    }

    fn from_str(s: &str) -> Option<Namespace> {
        Namespace::all().into_iter().find(|n| n.as_str() == s)
    }
}

/// Immutable record identifier: a namespace plus ordered key parts
/// (asset + ISO date for market rows, canonical URL for news, ...).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RecordKey {
    pub namespace: Namespace,
    pub key_parts: Vec<String>,
}

impl RecordKey {
    pub fn new(namespace: Namespace, key_parts: Vec<String>) -> Result<Self> {
        if key_parts.is_empty() {
            return Err(Error::domain("record key must have at least one part"));
        }
        Ok(RecordKey {
            namespace,
            key_parts,
        })
    }

    pub fn market(asset: &AssetId, date: NaiveDate) -> Self {
        RecordKey {
            namespace: Namespace::Market,
            key_parts: vec![asset.as_str().to_string(), date.to_string()],
        }
    }

    pub fn attestation(asset: &AssetId, date: NaiveDate) -> Self {
        RecordKey {
            namespace: Namespace::Attestation,
            key_parts: vec![asset.as_str().to_string(), date.to_string()],
        }
    }

    pub fn news(canonical_url: &str) -> Self {
        RecordKey {
            namespace: Namespace::News,
            key_parts: vec![canonical_url.to_string()],
        }
    }

    pub fn outcome(asset: &AssetId, date: NaiveDate) -> Self {
        RecordKey {
            namespace: Namespace::Outcome,
            key_parts: vec![asset.as_str().to_string(), date.to_string()],
        }
    }

    pub fn trace(asset: &AssetId, date: NaiveDate) -> Self {
        RecordKey {
            namespace: Namespace::Trace,
            key_parts: vec![asset.as_str().to_string(), date.to_string()],
        }
    }

    /// Injective key serialization: parts are percent-encoded (so `/`, `%`,
    /// tab and newline cannot appear raw) and joined with `/`.
    pub fn serialize(&self) -> String {
        let parts: Vec<String> = self.key_parts.iter().map(|p| encode_part(p)).collect();
        format!("{}:{}", self.namespace.as_str(), parts.join("/"))
    }
}

fn encode_part(part: &str) -> String {
    let mut out = String::with_capacity(part.len());
    for b in part.bytes() {
        match b {
            b'a'..=b'z' | b'A'..=b'Z' | b'0'..=b'9' | b'.' | b'_' | b'-' | b':' => {
                out.push(b as char)
            }
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out
}

struct Inner {
    // serialized key -> canonical payload text
    records: HashMap<String, String>,
}

/// Deterministic append-only store.
pub struct Store {
    data_dir: PathBuf,
    index: RwLock<Inner>,
    // writes serialized through a single lock; one write call per record line
    writer: Mutex<HashMap<Namespace, File>>,
}

impl Store {
    /// Open (or create) a store rooted at `data_dir`, rebuilding the index
    /// from the namespace logs.
    pub fn open(data_dir: impl AsRef<Path>) -> Result<Self> {
        let data_dir = data_dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&data_dir)?;
        let mut records = HashMap::new();
        for ns in Namespace::all() {
            let path = Self::log_path(&data_dir, ns);
            if !path.exists() {
                continue;
            }
            let reader = BufReader::new(File::open(&path)?);
            for (lineno, line) in reader.lines().enumerate() {
                let line = line?;
                if line.is_empty() {
                    continue;
                }
                let (key, payload) = line.split_once('\t').ok_or_else(|| {
                    Error::parse(
                        format!("{}:{}", path.display(), lineno + 1),
                        "missing tab separator",
                    )
                })?;
                let ns_name = key.split_once(':').map(|(n, _)| n).unwrap_or("");
                if Namespace::from_str(ns_name) != Some(ns) {
                    return Err(Error::parse(
                        format!("{}:{}", path.display(), lineno + 1),
                        format!("key namespace `{ns_name}` does not match log file"),
                    ));
                }
                records.insert(key.to_string(), payload.to_string());
            }
        }
        Ok(Store {
            data_dir,
            index: RwLock::new(Inner { records }),
            writer: Mutex::new(HashMap::new()),
        })
    }

    fn log_path(data_dir: &Path, ns: Namespace) -> PathBuf {
        data_dir.join(format!("{}.log", ns.as_str()))
    }

    /// Insert a record. Idempotent for identical payloads; re-inserting a
    /// different payload under the same key is an integrity error.
    pub fn put<T: Serialize>(&self, key: &RecordKey, payload: &T) -> Result<()> {
        let canon = canonical::to_canonical_string(payload)?;
        let key_ser = key.serialize();
        {
            let index = self.index.read().unwrap();
            if let Some(existing) = index.records.get(&key_ser) {
                if *existing == canon {
                    return Ok(());
                }
                return Err(Error::Integrity {
                    key: key_ser,
                    existing: hex::encode(sha2::Sha256::digest(existing.as_bytes())),
                    incoming: hex::encode(sha2::Sha256::digest(canon.as_bytes())),
                });
            }
        }

        let mut writers = self.writer.lock().unwrap();
        // re-check under the write lock
        {
            let index = self.index.read().unwrap();
            if let Some(existing) = index.records.get(&key_ser) {
                if *existing == canon {
                    return Ok(());
                }
                return Err(Error::Integrity {
                    key: key_ser,
                    existing: hex::encode(sha2::Sha256::digest(existing.as_bytes())),
                    incoming: hex::encode(sha2::Sha256::digest(canon.as_bytes())),
                });
            }
        }
        let file = match writers.get_mut(&key.namespace) {
            Some(f) => f,
            None => {
                let f = OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(Self::log_path(&self.data_dir, key.namespace))?;
                writers.entry(key.namespace).or_insert(f)
            }
        };
        let line = format!("{key_ser}\t{canon}\n");
        file.write_all(line.as_bytes())?;
        file.flush()?;

        // inserted_at is metadata only, kept out of the payload log
        let meta_path = self
            .data_dir
            .join(format!("{}.meta", key.namespace.as_str()));
        let mut meta = OpenOptions::new().create(true).append(true).open(meta_path)?;
        writeln!(meta, "{key_ser}\t{}", chrono::Utc::now().to_rfc3339())?;

        self.index
            .write()
            .unwrap()
            .records
            .insert(key_ser, canon);
        Ok(())
    }

    /// Canonical payload text for a key.
    pub fn get_raw(&self, key: &RecordKey) -> Result<String> {
        let key_ser = key.serialize();
        self.index
            .read()
            .unwrap()
            .records
            .get(&key_ser)
            .cloned()
            .ok_or(Error::NotFound(key_ser))
    }

    /// Structured value for a key.
    pub fn get(&self, key: &RecordKey) -> Result<Value> {
        Ok(serde_json::from_str(&self.get_raw(key)?)?)
    }

    pub fn contains(&self, key: &RecordKey) -> bool {
        self.index
            .read()
            .unwrap()
            .records
            .contains_key(&key.serialize())
    }

    pub fn count(&self, ns: Namespace) -> usize {
        let prefix = format!("{}:", ns.as_str());
        self.index
            .read()
            .unwrap()
            .records
            .keys()
            .filter(|k| k.starts_with(&prefix))
            .count()
    }

    /// All records in a namespace as (serialized key, value), sorted by key.
    pub fn scan(&self, ns: Namespace) -> Result<Vec<(String, Value)>> {
        let prefix = format!("{}:", ns.as_str());
        let index = self.index.read().unwrap();
        let mut out: Vec<(String, Value)> = index
            .records
            .iter()
            .filter(|(k, _)| k.starts_with(&prefix))
            .map(|(k, v)| Ok((k.clone(), serde_json::from_str(v)?)))
            .collect::<Result<_>>()?;
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(out)
    }

    /// Date-range query, ascending by date. For `market` and `attestation`
    /// the asset filters on the record's `asset` field; for `news` it filters
    /// on membership in `asset_tags` against `published_date`.
    pub fn range(
        &self,
        ns: Namespace,
        asset: &AssetId,
        start: NaiveDate,
        end: NaiveDate,
    ) -> Result<Vec<Value>> {
        if start > end {
            return Err(Error::domain(format!(
                "invalid range: start {start} is after end {end}"
            )));
        }
        let mut hits: Vec<(NaiveDate, String, Value)> = Vec::new();
        for (key, value) in self.scan(ns)? {
            let (date_field, matches_asset) = match ns {
                Namespace::News => {
                    let tags = value
                        .get("asset_tags")
                        .and_then(|t| t.as_array())
                        .map(|a| {
                            a.iter()
                                .filter_map(|v| v.as_str())
                                .any(|s| s == asset.as_str())
                        })
                        .unwrap_or(false);
                    ("published_date", tags)
                }
                Namespace::Attestation => (
                    "report_date",
                    value.get("asset").and_then(|a| a.as_str()) == Some(asset.as_str()),
                ),
                _ => (
                    "date",
                    value.get("asset").and_then(|a| a.as_str()) == Some(asset.as_str()),
                ),
            };
            if !matches_asset {
                continue;
            }
            let Some(date_str) = value.get(date_field).and_then(|d| d.as_str()) else {
                continue;
            };
            let date = crate::types::parse_date(date_str)?;
            if date >= start && date <= end {
                hits.push((date, key, value));
            }
        }
        hits.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
        Ok(hits.into_iter().map(|(_, _, v)| v).collect())
    }
}
