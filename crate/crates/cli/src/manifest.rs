//! Run manifest written next to every command's outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};
use survfuse::{Result, SurvError};

#[derive(Serialize)]
struct FileHash {
    path: PathBuf,
    sha256: String,
}

#[derive(Serialize)]
struct Versions {
    survfuse_cli: &'static str,
    survfuse_core: &'static str,
}

#[derive(Serialize)]
struct Written<'a> {
    command: &'a str,
    args: Vec<String>,
    versions: Versions,
    config: &'a serde_json::Value,
    seeds: &'a serde_json::Value,
    elapsed_secs: f64,
    inputs: Vec<FileHash>,
    outputs: Vec<FileHash>,
}

pub struct Manifest {
    command: &'static str,
    started: Instant,
    config: serde_json::Value,
    seeds: serde_json::Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| SurvError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl Manifest {
    pub fn new(command: &'static str) -> Self {
        Manifest {
            command,
            started: Instant::now(),
            config: serde_json::Value::Null,
            seeds: serde_json::json!({}),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn config<T: Serialize>(&mut self, cfg: &T) {
        self.config = serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null);
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.seeds[name] = value.into();
    }

    pub fn input(&mut self, p: impl Into<PathBuf>) {
        self.inputs.push(p.into());
    }

    pub fn inputs<I: IntoIterator<Item = PathBuf>>(&mut self, ps: I) {
        self.inputs.extend(ps);
    }

    pub fn output(&mut self, p: impl Into<PathBuf>) {
        self.outputs.push(p.into());
    }

    pub fn write(self, dir: &Path) -> Result<()> {
        let hash = |ps: &[PathBuf]| -> Result<Vec<FileHash>> {
            ps.iter()
                .map(|p| {
                    Ok(FileHash {
                        path: p.clone(),
                        sha256: sha256_file(p)?,
                    })
                })
                .collect()
        };
        let out = Written {
            command: self.command,
            args: std::env::args().collect(),
            versions: Versions {
                survfuse_cli: env!("CARGO_PKG_VERSION"),
                survfuse_core: survfuse::VERSION,
            },
            config: &self.config,
            seeds: &self.seeds,
            elapsed_secs: self.started.elapsed().as_secs_f64(),
            inputs: hash(&self.inputs)?,
            outputs: hash(&self.outputs)?,
        };
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&out).expect("manifest serialises");
        std::fs::write(&path, text + "\n").map_err(|e| SurvError::io(&path, e))
    }
}
