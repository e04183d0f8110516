//! Canonical `key = value` text used by manifests, checkpoints and configs.
//!
//! Keys are dotted paths. The canonical rendering sorts keys and trims
//! whitespace, so two documents that differ only in ordering, spacing or
//! comments render (and hash) identically.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use sha2::{Digest, Sha256};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KvMap {
    entries: BTreeMap<String, String>,
}

impl KvMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses `key = value` lines. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(format!("line {}: expected `key = value`", lineno + 1));
            };
            let key = k.trim();
            if key.is_empty() {
                return Err(format!("line {}: empty key", lineno + 1));
            }
            if entries.insert(key.to_string(), v.trim().to_string()).is_some() {
                return Err(format!("line {}: duplicate key `{key}`", lineno + 1));
            }
        }
        Ok(Self { entries })
    }

    pub fn insert(&mut self, key: impl Into<String>, value: impl Display) {
        self.entries.insert(key.into(), value.to_string().trim().to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Merges `other` into `self`, overwriting existing keys.
    pub fn extend(&mut self, other: &KvMap) {
        for (k, v) in other.iter() {
            self.entries.insert(k.to_string(), v.to_string());
        }
    }

    /// Entries whose key starts with `prefix`, with the prefix stripped.
    pub fn section(&self, prefix: &str) -> KvMap {
        let entries = self
            .entries
            .iter()
            .filter_map(|(k, v)| k.strip_prefix(prefix).map(|s| (s.to_string(), v.clone())))
            .collect();
        KvMap { entries }
    }

    pub fn with_prefix(&self, prefix: &str) -> KvMap {
        let entries = self
            .entries
            .iter()
            .map(|(k, v)| (format!("{prefix}{k}"), v.clone()))
            .collect();
        KvMap { entries }
    }

    /// Typed lookup; a missing or unparsable key is reported as a message.
    pub fn parse_value<T: FromStr>(&self, key: &str) -> Result<T, String> {
        let raw = self.get(key).ok_or_else(|| format!("missing key `{key}`"))?;
        raw.parse::<T>()
            .map_err(|_| format!("key `{key}`: cannot parse `{raw}`"))
    }

    pub fn parse_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, String> {
        let raw = self.get(key).ok_or_else(|| format!("missing key `{key}`"))?;
        parse_list(raw).map_err(|e| format!("key `{key}`: {e}"))
    }

    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.canonical().as_bytes())
    }
}

pub fn parse_list<T: FromStr>(raw: &str) -> Result<Vec<T>, String> {
    if raw.trim().is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<T>().map_err(|_| format!("cannot parse list item `{s}`"))
        })
        .collect()
}

pub fn format_list<T: Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
