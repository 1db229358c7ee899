//! Flat run configuration shared by flags and TOML files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// Every parameter a subcommand can take. Keys are the long flag names.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub operator: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair_budget: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grids: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kmax: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub box_width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub div_tests: Option<usize>,
    #[serde(rename = "in", skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_div: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_curl: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
}

macro_rules! merge_fields {
    ($a:ident, $b:ident, $($f:ident),*) => {
        RunConfig { $($f: $a.$f.or($b.$f)),* }
    };
}

impl RunConfig {
    /// Field-wise `self` if set, else `fallback`.
    pub fn or(self, fallback: RunConfig) -> RunConfig {
        let (a, b) = (self, fallback);
        merge_fields!(
            a, b, seed, jobs, operator, kind, mode, p, q, theta, pair_budget, grids, grid, ks,
            corpus, kmax, support_radius, box_width, samples, tol, div_tests, input, out, out_div,
            out_curl, summary, report
        )
    }

    /// Keys that are set, in declaration order.
    pub fn keys(&self) -> Vec<String> {
        match toml::Value::try_from(self) {
            Ok(toml::Value::Table(t)) => t.keys().cloned().collect(),
            _ => Vec::new(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.message().replace('\n', " "))
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        Self::from_toml(&text).map_err(|e| format!("config {}: {e}", path.display()))
    }

    /// Reject keys that the subcommand does not read.
    pub fn check_keys(&self, command: &str, allowed: &[&str]) -> Result<(), String> {
        for key in self.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(format!("key '{key}' does not apply to {command}"));
            }
        }
        Ok(())
    }
}
