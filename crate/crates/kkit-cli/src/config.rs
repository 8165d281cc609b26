//! Flat `key = value` configuration with `[section]` headers.

use std::collections::BTreeMap;
use std::fmt;

use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.col, self.msg)
    }
}

impl std::error::Error for ParseError {}

/// Resolved run configuration, keyed by `section.key`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

pub fn parse_config(text: &str) -> Result<RunConfig, ParseError> {
    let mut cfg = RunConfig::default();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let indent = raw.len() - raw.trim_start().len();
        let body = raw.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let err = |col: usize, msg: &str| ParseError { line, col, msg: msg.into() };
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| err(indent + body.len(), "expected ']'"))?.trim();
            if !valid_name(name) {
                return Err(err(indent + 2, "bad section name"));
            }
            section = name.to_string();
            continue;
        }
        let eq = body.find('=').ok_or_else(|| err(indent + 1, "expected 'key = value'"))?;
        let key = body[..eq].trim();
        if !valid_name(key) {
            return Err(err(indent + 1, "bad key"));
        }
        let value = body[eq + 1..].trim();
        if value.is_empty() {
            return Err(err(indent + eq + 2, "missing value"));
        }
        let full = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
        if cfg.values.insert(full.clone(), value.to_string()).is_some() {
            return Err(err(indent + 1, &format!("duplicate key '{full}'")));
        }
    }
    Ok(cfg)
}

impl RunConfig {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(key.to_string(), value.into());
    }

    /// Sets the key only when a value is given.
    pub fn set_opt<T: ToString>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.set(key, v.to_string());
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (&String, &String)> {
        self.values.iter()
    }

    /// Canonical text: top-level keys first, then one block per section.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut current: Option<&str> = None;
        let (top, nested): (Vec<_>, Vec<_>) = self.values.iter().partition(|(k, _)| !k.contains('.'));
        for (k, v) in top {
            out.push_str(&format!("{k} = {v}\n"));
        }
        for (k, v) in nested {
            let (sec, key) = k.split_once('.').unwrap();
            if current != Some(sec) {
                out.push_str(&format!("[{sec}]\n"));
                current = Some(sec);
            }
            out.push_str(&format!("{key} = {v}\n"));
        }
        out
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
