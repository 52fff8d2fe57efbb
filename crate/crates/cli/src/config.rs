//! Optional TOML configuration. Keys mirror the long flag names with
//! underscores; flags given on the command line take precedence.
//!
//! ```toml
//! estimator = "spearman"
//! orders = 2
//! seed = 7
//!
//! [optimizer]
//! alpha0 = 0.005
//! max_inner = 8000
//! ```

use std::path::Path;

use anyhow::{Context, Result};
use maxassoc::optimizer::OptimizerSettings;
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub estimator: Option<String>,
    pub orders: Option<usize>,
    pub alpha_a: Option<f64>,
    pub alpha_b: Option<f64>,
    pub bound_a: Option<f64>,
    pub bound_b: Option<f64>,
    pub search: Option<String>,
    pub budget: Option<usize>,
    pub init: Option<String>,
    pub repair_pd: Option<bool>,
    pub seed: Option<u64>,
    pub test_fraction: Option<f64>,
    pub trim: Option<f64>,
    pub setting: Option<String>,
    pub n: Option<usize>,
    pub contamination_rate: Option<f64>,
    pub contamination_shift: Option<f64>,
    pub distribution: Option<String>,
    pub replicates: Option<usize>,
    pub optimizer: Option<OptimizerSettings>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Command-line value if given, else the config value, else the default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}
