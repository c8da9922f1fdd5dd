//! Flat TOML configuration merged under the command-line flags.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;

/// Every key a config file may set; all optional.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub n: Option<u32>,
    pub c: Option<f64>,
    pub tau: Option<f64>,
    pub refinement: Option<u32>,
    pub newton_tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub jacobian_mode: Option<String>,
    pub delta0: Option<f64>,
    pub delta: Option<f64>,
    pub eta: Option<f64>,
    pub gate_exponent: Option<i32>,
    pub seed: Option<u64>,
    pub amplitude: Option<f64>,
    pub data: Option<String>,
    pub phi0: Option<Vec<f64>>,
    pub class: Option<String>,
    pub k: Option<usize>,
    pub out: Option<String>,
    pub threads: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// First of the flag, the file value and the default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}
