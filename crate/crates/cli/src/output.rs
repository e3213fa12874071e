//! Output directory bookkeeping: config header lines and the run manifest.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Map, Value};

pub struct Run {
    dir: PathBuf,
    config: Value,
    header: String,
    seed: Option<u64>,
    outputs: Vec<String>,
    notes: Map<String, Value>,
}

impl Run {
    pub fn new(dir: &Path, config: &impl Serialize, seed: Option<u64>) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let config = serde_json::to_value(config)?;
        let header = format!("config={}", serde_json::to_string(&config)?);
        Ok(Self {
            dir: dir.to_path_buf(),
            config,
            header,
            seed,
            outputs: Vec::new(),
            notes: Map::new(),
        })
    }

    /// Single-line configuration written at the top of every CSV.
    pub fn header(&self) -> &str {
        &self.header
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        self.notes
            .insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    /// A file without the configuration line.
    pub fn raw(&mut self, name: &str, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        body(&mut w)?;
        w.flush()?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    /// A CSV file whose first line is `# config=...`.
    pub fn csv(&mut self, name: &str, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        let header = self.header.clone();
        self.raw(name, |w| {
            writeln!(w, "# {header}")?;
            body(w)
        })
    }

    /// A JSON object with the configuration stored under `config`.
    pub fn json(&mut self, name: &str, doc: &Value) -> Result<()> {
        let mut doc = doc.clone();
        if let Value::Object(map) = &mut doc {
            map.insert("config".to_string(), self.config.clone());
        }
        let text = serde_json::to_string_pretty(&doc)?;
        self.raw(name, |w| {
            w.write_all(text.as_bytes())?;
            writeln!(w)?;
            Ok(())
        })
    }

    /// Writes `manifest.json`.
    pub fn finish(self) -> Result<()> {
        let manifest = json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "config": self.config,
            "seed": self.seed,
            "outputs": self.outputs,
            "results": self.notes,
        });
        let path = self.dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}
