//! Content-addressed execution cache.
//!
//! One directory per machine-schema version holds append-only shard files of
//! line-delimited records. A record stores its key fields (program and input
//! hashes plus budgets), the run outcome, the output bits in byte-packed
//! form, an optional resumable snapshot, and a checksum. Records are sharded
//! by the leading byte of the key hash in the file name.
//!
//! Appends are single `write` calls of one full line, so concurrent writers
//! interleave at line granularity and duplicate work is harmless: re-inserting
//! an identical record is a no-op, while a key collision with a different
//! value is reported as corruption, never silently reused.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::vm::{RunResult, RunStatus};

/// Bump when the machine semantics or the record layout change.
pub const CACHE_SCHEMA_VERSION: &str = "v1";

/// Snapshot payloads larger than this are dropped so that a record stays
/// within one atomic append.
const MAX_SNAPSHOT_HEX: usize = 3500;

pub fn to_hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

pub fn from_hex(s: &str) -> Result<Vec<u8>> {
    if !s.len().is_multiple_of(2) {
        return Err(Error::CacheCorruption("odd hex length".into()));
    }
    (0..s.len() / 2)
        .map(|i| {
            u8::from_str_radix(&s[2 * i..2 * i + 2], 16)
                .map_err(|_| Error::CacheCorruption(format!("bad hex {s:?}")))
        })
        .collect()
}

fn digest16(data: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(data);
    to_hex(&hasher.finalize()[..8])
}

fn bits_digest(bits: &BitString) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bits.packed_bytes());
    hasher.update((bits.len() as u64).to_be_bytes());
    to_hex(&hasher.finalize()[..8])
}

/// Cache key: hashes of the program code and the input string, plus budgets.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub program_hash: String,
    pub input_hash: String,
    pub fuel: u64,
    pub max_out: u64,
}

impl CacheKey {
    pub fn new(program: &BitString, input: &BitString, fuel: u64, max_out: u64) -> Self {
        CacheKey {
            program_hash: bits_digest(program),
            input_hash: bits_digest(input),
            fuel,
            max_out,
        }
    }

    /// Hash used for sharding and record addressing.
    pub fn key_hash(&self) -> String {
        digest16(
            format!(
                "{}|{}|{}|{}",
                self.program_hash, self.input_hash, self.fuel, self.max_out
            )
            .as_bytes(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheRecord {
    pub key: CacheKey,
    pub status: RunStatus,
    pub steps_used: u64,
    pub output: BitString,
    pub snapshot: Option<String>,
}

impl CacheRecord {
    pub fn new(key: CacheKey, result: &RunResult, snapshot: Option<String>) -> Self {
        let snapshot = snapshot.filter(|s| s.len() * 2 <= MAX_SNAPSHOT_HEX);
        CacheRecord {
            key,
            status: result.status,
            steps_used: result.steps_used,
            output: result.output.clone(),
            snapshot,
        }
    }

    pub fn to_run_result(&self) -> RunResult {
        RunResult {
            status: self.status,
            output: self.output.clone(),
            steps_used: self.steps_used,
        }
    }

    fn body(&self) -> String {
        let snap = match &self.snapshot {
            Some(s) => to_hex(s.as_bytes()),
            None => "-".into(),
        };
        format!(
            "k={} p={} i={} f={} m={} s={} st={} o={}:{} snap={}",
            self.key.key_hash(),
            self.key.program_hash,
            self.key.input_hash,
            self.key.fuel,
            self.key.max_out,
            self.status,
            self.steps_used,
            to_hex(self.output.packed_bytes()),
            self.output.len(),
            snap,
        )
    }

    pub fn to_line(&self) -> String {
        let body = self.body();
        let checksum = digest16(body.as_bytes());
        format!("{body} c={checksum}")
    }

    pub fn from_line(line: &str) -> Result<CacheRecord> {
        let mut fields = std::collections::HashMap::new();
        for tok in line.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::CacheCorruption(format!("bad token {tok:?}")))?;
            fields.insert(k, v);
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::CacheCorruption(format!("missing field {k}")))
        };
        let body_end = line
            .rfind(" c=")
            .ok_or_else(|| Error::CacheCorruption("missing checksum".into()))?;
        let expect = digest16(&line.as_bytes()[..body_end]);
        if get("c")? != expect {
            return Err(Error::CacheCorruption("checksum mismatch".into()));
        }
        let parse_u64 = |k: &str| -> Result<u64> {
            get(k)?
                .parse()
                .map_err(|_| Error::CacheCorruption(format!("bad number in field {k}")))
        };
        let key = CacheKey {
            program_hash: get("p")?.to_string(),
            input_hash: get("i")?.to_string(),
            fuel: parse_u64("f")?,
            max_out: parse_u64("m")?,
        };
        if get("k")? != key.key_hash() {
            return Err(Error::CacheCorruption("key hash mismatch".into()));
        }
        let (out_hex, out_len) = get("o")?
            .split_once(':')
            .ok_or_else(|| Error::CacheCorruption("bad output field".into()))?;
        let out_len: usize = out_len
            .parse()
            .map_err(|_| Error::CacheCorruption("bad output length".into()))?;
        let output = BitString::from_packed(from_hex(out_hex)?, out_len)?;
        let snapshot = match get("snap")? {
            "-" => None,
            s => Some(
                String::from_utf8(from_hex(s)?)
                    .map_err(|_| Error::CacheCorruption("bad snapshot encoding".into()))?,
            ),
        };
        Ok(CacheRecord {
            key,
            status: RunStatus::parse(get("s")?)?,
            steps_used: parse_u64("st")?,
            output,
            snapshot,
        })
    }
}

#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct CacheStats {
    pub shards: u64,
    pub records: u64,
    pub bytes: u64,
    pub corrupt_lines: u64,
}

/// Append-only sharded record store under `<dir>/<schema-version>/`.
#[derive(Debug, Clone)]
pub struct DiskCache {
    version_dir: PathBuf,
}

impl DiskCache {
    pub fn open(dir: &Path) -> Result<DiskCache> {
        let version_dir = dir.join(CACHE_SCHEMA_VERSION);
        fs::create_dir_all(&version_dir)?;
        Ok(DiskCache { version_dir })
    }

    pub fn dir(&self) -> &Path {
        &self.version_dir
    }

    fn shard_path(&self, key_hash: &str) -> PathBuf {
        self.version_dir.join(format!("{}.records", &key_hash[..2]))
    }

    /// Exact stored record for the key, or nothing. Conflicting duplicates
    /// are corruption, never a silent pick.
    pub fn get(&self, key: &CacheKey) -> Result<Option<CacheRecord>> {
        let key_hash = key.key_hash();
        let path = self.shard_path(&key_hash);
        if !path.exists() {
            return Ok(None);
        }
        let reader = BufReader::new(File::open(&path)?);
        let mut found: Option<CacheRecord> = None;
        for line in reader.lines() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            if !line.starts_with(&format!("k={key_hash} ")) {
                continue;
            }
            let record = CacheRecord::from_line(&line)?;
            if record.key != *key {
                continue; // 64-bit shard-hash collision of distinct keys
            }
            match &found {
                None => found = Some(record),
                Some(prev) => {
                    if prev.status != record.status
                        || prev.steps_used != record.steps_used
                        || prev.output != record.output
                    {
                        return Err(Error::CacheCorruption(format!(
                            "conflicting records for key {key_hash}"
                        )));
                    }
                }
            }
        }
        Ok(found)
    }

    /// Idempotent append. Re-inserting the identical record is a no-op;
    /// inserting a different value under an existing key is corruption.
    pub fn put(&self, record: &CacheRecord) -> Result<()> {
        if let Some(existing) = self.get(&record.key)? {
            if existing.status != record.status
                || existing.steps_used != record.steps_used
                || existing.output != record.output
            {
                return Err(Error::CacheCorruption(format!(
                    "refusing to overwrite key {} with a different value",
                    record.key.key_hash()
                )));
            }
            return Ok(());
        }
        let path = self.shard_path(&record.key.key_hash());
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        let line = format!("{}\n", record.to_line());
        file.write_all(line.as_bytes())?;
        Ok(())
    }

    pub fn stats(&self) -> Result<CacheStats> {
        self.scan(false)
    }

    /// Full checksum and duplicate-consistency verification.
    pub fn verify(&self) -> Result<CacheStats> {
        self.scan(true)
    }

    fn scan(&self, strict: bool) -> Result<CacheStats> {
        let mut stats = CacheStats::default();
        let mut entries: Vec<PathBuf> = Vec::new();
        for e in fs::read_dir(&self.version_dir)? {
            let path = e?.path();
            if path.extension().is_some_and(|x| x == "records") {
                entries.push(path);
            }
        }
        entries.sort();
        for path in entries {
            stats.shards += 1;
            stats.bytes += fs::metadata(&path)?.len();
            let reader = BufReader::new(File::open(&path)?);
            let mut by_key: std::collections::HashMap<String, CacheRecord> =
                std::collections::HashMap::new();
            for line in reader.lines() {
                let line = line?;
                if line.is_empty() {
                    continue;
                }
                match CacheRecord::from_line(&line) {
                    Ok(record) => {
                        stats.records += 1;
                        if strict {
                            let kh = record.key.key_hash();
                            if let Some(prev) = by_key.get(&kh) {
                                if prev != &record {
                                    return Err(Error::CacheCorruption(format!(
                                        "conflicting records for key {kh} in {}",
                                        path.display()
                                    )));
                                }
                            } else {
                                by_key.insert(kh, record);
                            }
                        }
                    }
                    Err(e) => {
                        if strict {
                            return Err(e);
                        }
                        stats.corrupt_lines += 1;
                    }
                }
            }
        }
        Ok(stats)
    }
}
