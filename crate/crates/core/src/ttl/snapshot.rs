//! Snapshot discovery. A snapshot is one TTL file named
//! `snapshot_<epochsecs>.ttl`; its timestamp comes from the file name.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use super::parser::{parse_ttl, ParseError};
use super::term::Quad;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SnapshotFile {
    pub path: PathBuf,
    pub timestamp: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScanResult {
    /// Sorted ascending by timestamp.
    pub files: Vec<SnapshotFile>,
    /// Files whose names did not match the convention.
    pub ignored: usize,
}

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("cannot read snapshot directory {path}: {source}")]
    Unreadable { path: PathBuf, source: io::Error },
    #[error("duplicate snapshot timestamp {timestamp}: {first} and {second}")]
    DuplicateTimestamp {
        timestamp: i64,
        first: PathBuf,
        second: PathBuf,
    },
}

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{source}")]
    Parse { path: PathBuf, source: ParseError },
}

pub fn snapshot_file_name(timestamp: i64) -> String {
    format!("snapshot_{timestamp}.ttl")
}

fn timestamp_of(name: &str) -> Option<i64> {
    let digits = name.strip_prefix("snapshot_")?.strip_suffix(".ttl")?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Lists snapshot files under `dir` (recursively), sorted by timestamp.
pub fn scan_snapshot_dir(dir: &Path) -> Result<ScanResult, ScanError> {
    let mut by_t: BTreeMap<i64, PathBuf> = BTreeMap::new();
    let mut ignored = 0;
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let unreadable = |source| ScanError::Unreadable {
            path: d.clone(),
            source,
        };
        let mut entries: Vec<_> = fs::read_dir(&d)
            .map_err(unreadable)?
            .collect::<Result<_, _>>()
            .map_err(unreadable)?;
        entries.sort_by_key(|e| e.file_name());
        for entry in entries {
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let name = entry.file_name();
            match name.to_str().and_then(timestamp_of) {
                Some(t) => {
                    if let Some(first) = by_t.get(&t) {
                        return Err(ScanError::DuplicateTimestamp {
                            timestamp: t,
                            first: first.clone(),
                            second: path,
                        });
                    }
                    by_t.insert(t, path);
                }
                None => ignored += 1,
            }
        }
    }
    if ignored > 0 {
        log::warn!("{ignored} file(s) in {} do not match snapshot_<t>.ttl", dir.display());
    }
    Ok(ScanResult {
        files: by_t
            .into_iter()
            .map(|(timestamp, path)| SnapshotFile { path, timestamp })
            .collect(),
        ignored,
    })
}

pub fn parse_snapshot(file: &SnapshotFile) -> Result<Vec<Quad>, SnapshotError> {
    let text = fs::read_to_string(&file.path).map_err(|source| SnapshotError::Io {
        path: file.path.clone(),
        source,
    })?;
    parse_ttl(&text, file.timestamp).map_err(|source| SnapshotError::Parse {
        path: file.path.clone(),
        source,
    })
}

/// Parses snapshots on the current rayon pool; output keeps file order.
pub fn parse_snapshots(files: &[SnapshotFile]) -> Result<Vec<Quad>, SnapshotError> {
    let parts: Vec<Vec<Quad>> = files
        .par_iter()
        .map(parse_snapshot)
        .collect::<Result<_, _>>()?;
    Ok(parts.into_iter().flatten().collect())
}
