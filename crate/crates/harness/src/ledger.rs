//! Append-only run record (`ledger.json`).
//!
//! Every stage appends a `started` entry before it runs and a `completed`
//! entry after its artifacts are on disk. A stage is skipped when the latest
//! `completed` entry for it carries the current stage hash and all of its
//! artifacts still exist.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

pub const LEDGER_FILE: &str = "ledger.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Started,
    Completed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub stage: String,
    pub status: StageStatus,
    pub config_hash: String,
    /// Paths relative to the run directory.
    #[serde(default)]
    pub artifacts: Vec<String>,
    #[serde(default)]
    pub wall_clock_s: f64,
    #[serde(default)]
    pub parameter_counts: BTreeMap<String, usize>,
    /// Stage-specific scalar results (e.g. held-out reconstruction PSNR).
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLedger {
    pub entries: Vec<LedgerEntry>,
}

impl RunLedger {
    /// Loads the ledger of a run directory; a missing file is an empty ledger.
    pub fn load(dir: &Path) -> anyhow::Result<Self> {
        let path = dir.join(LEDGER_FILE);
        match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).with_context(|| format!("{}: malformed ledger", path.display())),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(e).with_context(|| format!("{}", path.display())),
        }
    }

    /// Appends and immediately persists the entry (write to a temporary
    /// file, then rename, so a killed run never leaves a torn ledger).
    pub fn append(&mut self, dir: &Path, entry: LedgerEntry) -> anyhow::Result<()> {
        self.entries.push(entry);
        let path = dir.join(LEDGER_FILE);
        let tmp = dir.join(format!("{LEDGER_FILE}.tmp"));
        let text = serde_json::to_string_pretty(self)?;
        fs::write(&tmp, text + "\n").with_context(|| format!("{}", tmp.display()))?;
        fs::rename(&tmp, &path).with_context(|| format!("{}", path.display()))?;
        Ok(())
    }

    /// The latest completed entry of `stage` with `hash` whose artifacts all
    /// exist under `dir`.
    pub fn completed(&self, dir: &Path, stage: &str, hash: &str) -> Option<&LedgerEntry> {
        self.entries
            .iter()
            .rev()
            .find(|e| e.stage == stage && e.status == StageStatus::Completed)
            .filter(|e| e.config_hash == hash && e.artifacts.iter().all(|a| dir.join(a).exists()))
    }

    pub fn artifact_paths(entry: &LedgerEntry, dir: &Path) -> Vec<PathBuf> {
        entry.artifacts.iter().map(|a| dir.join(a)).collect()
    }
}
