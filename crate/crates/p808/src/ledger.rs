//! File-backed idempotency ledger and mock platform transport.
//!
//! Both files are JSON Lines: one record per line, appended and flushed
//! before the next action runs.

use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use p808_core::platform::{Ledger, LedgerEntry, LedgerStatus, PlatformAction, Transport};

fn append_line(path: &Path, line: &str) -> std::io::Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(f, "{line}")?;
    f.sync_data()
}

pub struct JsonlLedger {
    path: PathBuf,
    completed: BTreeSet<String>,
}

impl JsonlLedger {
    /// Opens or creates the ledger. A torn last line (from a crash mid-write)
    /// is ignored; any other bad line is an error.
    pub fn open(path: impl Into<PathBuf>) -> Result<JsonlLedger> {
        let path = path.into();
        let mut completed = BTreeSet::new();
        if path.exists() {
            let lines: Vec<String> = BufReader::new(File::open(&path)?).lines().collect::<Result<_, _>>()?;
            for (i, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let entry: LedgerEntry = match serde_json::from_str(line) {
                    Ok(e) => e,
                    Err(_) if i + 1 == lines.len() => break,
                    Err(e) => return Err(e).with_context(|| format!("{}:{}", path.display(), i + 1)),
                };
                if entry.status == LedgerStatus::Ok {
                    completed.insert(entry.idempotency_key);
                }
            }
        }
        Ok(JsonlLedger { path, completed })
    }
}

impl Ledger for JsonlLedger {
    fn completed(&self, key: &str) -> bool {
        self.completed.contains(key)
    }

    fn append(&mut self, entry: LedgerEntry) -> Result<(), String> {
        let line = serde_json::to_string(&entry).map_err(|e| e.to_string())?;
        append_line(&self.path, &line).map_err(|e| format!("{}: {e}", self.path.display()))?;
        if entry.status == LedgerStatus::Ok {
            self.completed.insert(entry.idempotency_key);
        }
        Ok(())
    }
}

/// Stands in for the platform: every performed action is appended to a
/// file. Keys in `fail_keys` are refused, for fault injection.
pub struct FileTransport {
    pub path: PathBuf,
    pub fail_keys: BTreeSet<String>,
}

impl FileTransport {
    pub fn new(path: impl Into<PathBuf>) -> FileTransport {
        FileTransport {
            path: path.into(),
            fail_keys: BTreeSet::new(),
        }
    }
}

impl Transport for FileTransport {
    fn perform(&mut self, action: &PlatformAction) -> Result<(), String> {
        if self.fail_keys.contains(&action.idempotency_key) {
            return Err(format!("mock transport refused {}", action.target()));
        }
        let line = serde_json::to_string(action).map_err(|e| e.to_string())?;
        append_line(&self.path, &line).map_err(|e| e.to_string())
    }
}
