use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> std::io::Result<Self> {
        let bytes = std::fs::read(path)?;
        Ok(Self {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }
}

/// Everything needed to reproduce and audit one run.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub inputs: Vec<FileDigest>,
    pub output_dir: String,
    pub config: Value,
    pub seeds: Value,
    pub artifacts: Vec<FileDigest>,
    pub started: String,
    pub finished: String,
    pub status: String,
    pub exit_code: u8,
    pub diagnostic: Option<Value>,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn start(command: &str, argv: &[String], out: &Path) -> Self {
        Self {
            command: command.into(),
            argv: argv.to_vec(),
            inputs: Vec::new(),
            output_dir: out.display().to_string(),
            config: Value::Null,
            seeds: Value::Null,
            artifacts: Vec::new(),
            started: now(),
            finished: String::new(),
            status: String::new(),
            exit_code: 0,
            diagnostic: None,
        }
    }

    pub fn add_inputs<'a>(&mut self, paths: impl IntoIterator<Item = &'a PathBuf>) -> std::io::Result<()> {
        for p in paths {
            self.inputs.push(FileDigest::of(p)?);
        }
        Ok(())
    }

    /// Records written files by name relative to the output directory.
    pub fn add_artifacts(&mut self, dir: &Path, names: &[String]) -> std::io::Result<()> {
        for name in names {
            let mut d = FileDigest::of(&dir.join(name))?;
            d.path = name.clone();
            self.artifacts.push(d);
        }
        Ok(())
    }

    pub fn write(mut self, dir: &Path, status: &str, exit_code: u8) -> std::io::Result<()> {
        self.finished = now();
        self.status = status.into();
        self.exit_code = exit_code;
        let text = serde_json::to_string_pretty(&self).expect("manifest serializes");
        std::fs::write(dir.join(MANIFEST_FILE), text + "\n")
    }
}
