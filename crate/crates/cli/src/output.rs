//! Artifact writing: every file carries the config hash.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use kcmlab_core::io::CsvTable;
use kcmlab_core::{KcmError, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;

pub struct Artifacts {
    dir: PathBuf,
    hash: String,
    task: String,
    files: Vec<String>,
    timings: Vec<(String, f64)>,
    started: Instant,
}

fn io_err(path: &Path, e: std::io::Error) -> KcmError {
    KcmError::Domain(format!("cannot write {}: {e}", path.display()))
}

impl Artifacts {
    pub fn new(task: &str, cfg: &RunConfig) -> Result<Self> {
        let dir = cfg.out_dir();
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        Ok(Artifacts {
            dir,
            hash: cfg.hash(),
            task: task.to_string(),
            files: Vec::new(),
            timings: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn time<T>(&mut self, label: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f()?;
        self.timings.push((label.to_string(), t.elapsed().as_secs_f64()));
        Ok(out)
    }

    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn csv(&mut self, name: &str, table: &CsvTable) -> Result<()> {
        let text = table.render(&[format!("config_hash: {}", self.hash)]);
        self.write(name, &text)
    }

    /// Objects get a `config_hash` field; anything else is wrapped.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let v = serde_json::to_value(value).map_err(|e| KcmError::Domain(e.to_string()))?;
        let v = match v {
            Value::Object(mut m) => {
                m.insert("config_hash".into(), Value::String(self.hash.clone()));
                Value::Object(m)
            }
            other => json!({ "config_hash": self.hash, "data": other }),
        };
        let text = serde_json::to_string_pretty(&v).map_err(|e| KcmError::Domain(e.to_string()))?;
        self.write(name, &(text + "\n"))
    }

    pub fn provenance(mut self, cfg: &RunConfig) -> Result<Vec<String>> {
        let total = self.started.elapsed().as_secs_f64();
        let timings: serde_json::Map<String, Value> =
            self.timings.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        let record = json!({
            "task": self.task,
            "config": cfg.values(),
            "versions": {
                "kcmlab": env!("CARGO_PKG_VERSION"),
                "kcmlab_core": kcmlab_core::VERSION,
            },
            "threads": rayon::current_num_threads(),
            "timings": { "total_seconds": total, "steps": timings },
            "files": self.files.clone(),
        });
        self.json("provenance.json", &record)?;
        Ok(self.files)
    }
}

/// Machine-readable error record.
pub fn error_json(task: &str, err: &KcmError) -> Value {
    json!({
        "task": task,
        "error": err.kind(),
        "message": err.to_string(),
        "cross_check": err.is_cross_check(),
    })
}
