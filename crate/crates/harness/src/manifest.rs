//! Run manifests: what ran, with which seeds, for how long, and a checksum
//! for every file the run produced.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::ConfigDoc;
use crate::error::{HarnessError, Result};

pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Debug, Clone, PartialEq)]
pub enum InstanceStatus {
    Completed,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceRecord {
    pub algorithm: String,
    pub index: usize,
    pub seed: u64,
    pub status: InstanceStatus,
    pub train_seconds: f64,
    pub env_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub environment: String,
    pub algorithms: Vec<String>,
    /// Git-style blob hash (SHA-256) of the executable that produced the run.
    pub code_hash: String,
    pub runtime_seconds: f64,
    pub instances: Vec<InstanceRecord>,
    /// `(path relative to the run directory, sha256 hex)`.
    pub files: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// SHA-256 over `blob <len>\0<bytes>`, the framing git uses for object ids.
pub fn git_style_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

/// Hash of the running executable, or `unknown` if it cannot be read.
pub fn code_version_hash() -> String {
    std::env::current_exe()
        .ok()
        .and_then(|p| fs::read(p).ok())
        .map_or_else(|| "unknown".to_string(), |b| git_style_hash(&b))
}

pub fn file_checksum(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

fn relative(root: &Path, path: &Path) -> String {
    path.strip_prefix(root)
        .unwrap_or(path)
        .components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

impl RunManifest {
    /// Checksums `paths` (absolute, under `root`, or relative to it) into the file index.
    pub fn index_files(&mut self, root: &Path, paths: &[PathBuf]) -> Result<()> {
        for p in paths {
            let full = if p.is_absolute() || p.starts_with(root) { p.clone() } else { root.join(p) };
            self.files.push((relative(root, &full), file_checksum(&full)?));
        }
        self.files.sort();
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut doc = ConfigDoc::default();
        doc.set("run", "environment", &self.environment);
        doc.set("run", "algorithms", self.algorithms.join(", "));
        doc.set("run", "code_hash", &self.code_hash);
        doc.set("run", "runtime_seconds", format!("{:.6}", self.runtime_seconds));
        for (i, w) in self.warnings.iter().enumerate() {
            doc.set("warnings", &format!("w{i}"), w.replace('#', "no."));
        }
        for inst in &self.instances {
            let section = format!("instance.{}.{}", inst.algorithm, inst.index);
            doc.set(&section, "seed", inst.seed.to_string());
            doc.set(&section, "train_seconds", format!("{:.6}", inst.train_seconds));
            doc.set(&section, "env_steps", inst.env_steps.to_string());
            match &inst.status {
                InstanceStatus::Completed => doc.set(&section, "status", "completed"),
                InstanceStatus::Failed(msg) => {
                    doc.set(&section, "status", "failed");
                    doc.set(&section, "error", msg.replace(['#', '\n'], " "));
                }
            }
        }
        for (i, (path, sum)) in self.files.iter().enumerate() {
            doc.set("files", &format!("f{i}"), format!("{sum} {path}"));
        }
        doc.to_text()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let doc = ConfigDoc::parse(text)?;
        let field = |s: &str, k: &str| -> Result<String> {
            doc.get(s, k)
                .map(|e| e.value.clone())
                .ok_or_else(|| HarnessError::Parse {
                    file: MANIFEST_FILE.into(),
                    line: 0,
                    msg: format!("missing [{s}] {k}"),
                })
        };
        let mut m = RunManifest {
            environment: field("run", "environment")?,
            algorithms: doc.list("run", "algorithms")?.unwrap_or_default(),
            code_hash: field("run", "code_hash")?,
            runtime_seconds: doc.value("run", "runtime_seconds")?.unwrap_or(0.0),
            instances: Vec::new(),
            files: Vec::new(),
            warnings: Vec::new(),
        };
        for (name, entries) in doc.sections() {
            if name == "warnings" {
                m.warnings = entries.iter().map(|e| e.value.clone()).collect();
            } else if name == "files" {
                for e in entries {
                    let (sum, path) = e.value.split_once(' ').ok_or_else(|| HarnessError::Parse {
                        file: MANIFEST_FILE.into(),
                        line: e.line,
                        msg: "file entry is not `<sha256> <path>`".into(),
                    })?;
                    m.files.push((path.to_string(), sum.to_string()));
                }
            } else if let Some(rest) = name.strip_prefix("instance.") {
                let (algorithm, index) = rest.rsplit_once('.').ok_or_else(|| HarnessError::Parse {
                    file: MANIFEST_FILE.into(),
                    line: entries.first().map_or(0, |e| e.line),
                    msg: format!("bad instance section `{name}`"),
                })?;
                let status = match field(name, "status")?.as_str() {
                    "completed" => InstanceStatus::Completed,
                    _ => InstanceStatus::Failed(field(name, "error").unwrap_or_default()),
                };
                m.instances.push(InstanceRecord {
                    algorithm: algorithm.to_string(),
                    index: index.parse().map_err(|_| crate::error::ConfigError::new(format!("bad instance index in `{name}`")))?,
                    seed: doc.value(name, "seed")?.unwrap_or(0),
                    status,
                    train_seconds: doc.value(name, "train_seconds")?.unwrap_or(0.0),
                    env_steps: doc.value(name, "env_steps")?.unwrap_or(0),
                });
            }
        }
        Ok(m)
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, self.to_text()).map_err(|e| HarnessError::io(&path, e))?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
        Self::from_text(&text)
    }

    /// Lists every indexed file that is missing or whose checksum changed.
    pub fn verify(&self, dir: &Path) -> Vec<String> {
        self.files
            .iter()
            .filter_map(|(path, sum)| match file_checksum(&dir.join(path)) {
                Ok(actual) if &actual == sum => None,
                Ok(_) => Some(format!("{path}: checksum mismatch")),
                Err(_) => Some(format!("{path}: missing")),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn manifest_text_round_trips_and_verifies() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("a.csv");
        fs::write(&file, "x\n1\n").unwrap();
        let mut m = RunManifest {
            environment: "cliffwalking".into(),
            algorithms: vec!["arq".into(), "prq".into()],
            code_hash: git_style_hash(b"code"),
            runtime_seconds: 1.5,
            instances: vec![InstanceRecord {
                algorithm: "arq".into(),
                index: 0,
                seed: 7,
                status: InstanceStatus::Failed("diverged at step 3".into()),
                train_seconds: 0.25,
                env_steps: 100,
            }],
            files: Vec::new(),
            warnings: vec!["aggregated 0 of 1 instances".into()],
        };
        m.index_files(dir.path(), &[file.clone()]).unwrap();
        assert_eq!(m.files[0].0, "a.csv");
        let back = RunManifest::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
        assert!(back.verify(dir.path()).is_empty());
        fs::write(&file, "tampered").unwrap();
        assert_eq!(back.verify(dir.path()), vec!["a.csv: checksum mismatch".to_string()]);
    }
}
