//! Artifact writing: CSV tables, JSON summaries and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// Collects the files of one run and writes the manifest last.
pub struct RunOutput {
    dir: PathBuf,
    command: String,
    config_json: String,
    files: Vec<(String, String)>,
}

impl RunOutput {
    pub fn create(dir: &Path, command: &str, config: &impl Serialize) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.into(),
            config_json: serde_json::to_string_pretty(config)?,
            files: Vec::new(),
        })
    }

    /// Writes a CSV with a header row; `doc` describes the columns.
    pub fn csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>], doc: &str) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        self.files.push((name.into(), format!("{doc}\n    columns: {}", header.join(", "))));
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize, doc: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, serde_json::to_string_pretty(value)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        self.files.push((name.into(), doc.into()));
        Ok(())
    }

    pub fn finish(self) -> Result<PathBuf> {
        let mut text = String::new();
        writeln!(text, "meanfield {}", env!("CARGO_PKG_VERSION"))?;
        writeln!(text, "command: {}", self.command)?;
        writeln!(text, "files:")?;
        for (name, doc) in &self.files {
            writeln!(text, "  {name}: {doc}")?;
        }
        writeln!(text, "config:")?;
        for line in self.config_json.lines() {
            writeln!(text, "  {line}")?;
        }
        let path = self.dir.join("manifest.txt");
        fs::write(&path, text)?;
        Ok(self.dir)
    }
}

/// Shortest round-trip representation, so reruns are byte-identical.
pub fn num(x: f64) -> String {
    format!("{x}")
}
