pub mod args;
mod commands;

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

pub use commands::run;

/// Accumulates what a run did; serialized as the run log.
#[derive(Debug, Serialize)]
pub struct Run {
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub args: Vec<String>,
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
    pub errors: Vec<String>,
    pub summary: Map<String, Value>,
    pub status: &'static str,
}

impl Run {
    pub fn new(seed: u64, args: Vec<String>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            seed,
            args,
            outputs: Vec::new(),
            warnings: Vec::new(),
            errors: Vec::new(),
            summary: Map::new(),
            status: "ok",
        }
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn warn(&mut self, message: String) {
        eprintln!("warning: {message}");
        self.warnings.push(message);
    }

    /// Records a per-item failure; the run still finishes but exits 1.
    pub fn fail(&mut self, message: String) {
        eprintln!("error: {message}");
        self.errors.push(message);
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.summary.insert(key.to_string(), v);
    }

    pub fn write(&self, target: Option<&PathBuf>) {
        let written = match target {
            Some(path) => serde_json::to_string_pretty(self)
                .map_err(std::io::Error::from)
                .and_then(|s| std::fs::write(path, s + "\n")),
            None => serde_json::to_string(self)
                .map(|s| eprintln!("{s}"))
                .map_err(std::io::Error::from),
        };
        if let Err(e) = written {
            eprintln!("error: could not write run log: {e}");
        }
    }
}
