//! CSV and JSON emission with the resolved configuration attached.

use std::io::Write;
use std::path::PathBuf;

use serde::Serialize;

use crate::config::RunConfig;

pub struct Sink {
    pub path: Option<PathBuf>,
}

impl Sink {
    fn write(&self, text: &str) -> anyhow::Result<()> {
        match &self.path {
            Some(p) => std::fs::write(p, text)?,
            None => std::io::stdout().lock().write_all(text.as_bytes())?,
        }
        Ok(())
    }

    /// Header row, data rows, then a `#` comment block with the config and its hash.
    pub fn csv(&self, command: &str, cfg: &RunConfig, header: &[&str], rows: &[Vec<String>], notes: &[(String, String)]) -> anyhow::Result<()> {
        let mut out = header.join(",");
        out.push('\n');
        for r in rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out.push_str(&format!("# command: {command}\n# config-sha256: {}\n", cfg.hash()));
        for (k, v) in cfg.entries() {
            out.push_str(&format!("# config: {k} = {v}\n"));
        }
        for (k, v) in notes {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        self.write(&out)
    }

    pub fn json<T: Serialize>(&self, command: &str, cfg: &RunConfig, result: &T) -> anyhow::Result<()> {
        #[derive(Serialize)]
        struct Envelope<'a, T> {
            command: &'a str,
            config: std::collections::BTreeMap<&'a String, &'a String>,
            config_sha256: String,
            result: &'a T,
        }
        let env = Envelope { command, config: cfg.entries().collect(), config_sha256: cfg.hash(), result };
        let mut text = serde_json::to_string_pretty(&env)?;
        text.push('\n');
        self.write(&text)
    }
}

/// Shortest round-tripping decimal form.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}
