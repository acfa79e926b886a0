//! Training-time comparison across finished runs.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::manifest::{InstanceStatus, RunManifest};

#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeRow {
    pub environment: String,
    pub algorithm: String,
    pub instances: usize,
    /// Mean wall-clock training seconds per completed instance.
    pub train_seconds: f64,
    /// `train_seconds` over that of the base algorithm on the same environment.
    pub ratio_to_base: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RuntimeTable {
    pub rows: Vec<RuntimeRow>,
    pub warnings: Vec<String>,
}

/// The algorithm a robust variant extends: `pr-ddpg` and `r-ddpg` map to
/// `ddpg`; the tabular robust learners map to `q-learning`.
pub fn base_algorithm(name: &str) -> Option<&str> {
    if let Some(base) = name.strip_prefix("pr-").or_else(|| name.strip_prefix("r-")) {
        return Some(base);
    }
    matches!(name, "robust-q" | "arq" | "prq").then_some("q-learning")
}

/// Builds the table from run directories; directories without a readable
/// manifest are skipped with a warning.
pub fn compare_runtime(run_dirs: &[PathBuf]) -> RuntimeTable {
    let mut table = RuntimeTable::default();
    for dir in run_dirs {
        let manifest = match RunManifest::read(dir) {
            Ok(m) => m,
            Err(e) => {
                table.warnings.push(format!("skipping {}: {e}", dir.display()));
                continue;
            }
        };
        for alg in &manifest.algorithms {
            let secs: Vec<f64> = manifest
                .instances
                .iter()
                .filter(|i| &i.algorithm == alg && i.status == InstanceStatus::Completed)
                .map(|i| i.train_seconds)
                .collect();
            if secs.is_empty() {
                table.warnings.push(format!("{}: no completed `{alg}` instances", dir.display()));
                continue;
            }
            table.rows.push(RuntimeRow {
                environment: manifest.environment.clone(),
                algorithm: alg.clone(),
                instances: secs.len(),
                train_seconds: secs.iter().sum::<f64>() / secs.len() as f64,
                ratio_to_base: None,
            });
        }
    }
    let snapshot = table.rows.clone();
    for row in &mut table.rows {
        row.ratio_to_base = base_algorithm(&row.algorithm).and_then(|base| {
            snapshot
                .iter()
                .find(|r| r.environment == row.environment && r.algorithm == base)
                .map(|b| row.train_seconds / b.train_seconds)
        });
    }
    table
}

impl RuntimeTable {
    pub fn to_text(&self) -> String {
        let mut out = format!("{:<14} {:<12} {:>9} {:>14} {:>8}\n", "environment", "algorithm", "instances", "train_seconds", "ratio");
        for r in &self.rows {
            let ratio = r.ratio_to_base.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"));
            let _ = writeln!(
                out,
                "{:<14} {:<12} {:>9} {:>14.3} {:>8}",
                r.environment, r.algorithm, r.instances, r.train_seconds, ratio
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_names() {
        assert_eq!(base_algorithm("pr-ddpg"), Some("ddpg"));
        assert_eq!(base_algorithm("r-dqn"), Some("dqn"));
        assert_eq!(base_algorithm("prq"), Some("q-learning"));
        assert_eq!(base_algorithm("dqn"), None);
    }

    #[test]
    fn missing_manifest_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let t = compare_runtime(&[dir.path().to_path_buf()]);
        assert!(t.rows.is_empty());
        assert_eq!(t.warnings.len(), 1);
    }
}
