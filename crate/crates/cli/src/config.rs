//! The `key = value` run file.
//!
//! Every key is optional and flat; flags given on the command line win over
//! the file. Keys that do not apply to the subcommand being run are ignored,
//! unknown keys are an error.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub out: Option<PathBuf>,
    pub release: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,

    // gen
    pub importers: Option<usize>,
    pub cities: Option<usize>,
    pub states: Option<usize>,
    pub transactions: Option<usize>,
    pub sh4_codes: Option<usize>,
    pub ncms_per_sh4: Option<usize>,
    pub countries: Option<usize>,
    pub single_importer_city_fraction: Option<f64>,
    pub city_skew: Option<f64>,
    pub outlier_rate: Option<f64>,
    pub administrative_rate: Option<f64>,
    /// 0 disables suppression.
    pub suppression_threshold: Option<usize>,
    pub year_month: Option<String>,

    // attack
    pub targets: Option<Vec<String>>,
    pub sample: Option<usize>,
    pub budget: Option<f64>,
    pub node_interval: Option<u64>,
    pub cap: Option<f64>,
    pub phase_caps: Option<Vec<f64>>,
    pub tolerance: Option<String>,
    pub tolerance_value: Option<String>,
    pub tolerance_weight: Option<String>,
    pub value_only: Option<bool>,
    pub absence_check: Option<bool>,
    pub timings: Option<bool>,
    pub keep_partial: Option<bool>,

    // bench
    pub bins: Option<Vec<usize>>,
    pub max_complexity: Option<f64>,
    pub reps: Option<usize>,
    pub timing_repeats: Option<usize>,
}

impl RunFile {
    pub fn load(path: &Path) -> Result<RunFile, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}
