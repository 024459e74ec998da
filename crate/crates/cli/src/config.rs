//! Run configuration. Each command reads its own table of a TOML file;
//! flags given on the command line win over the file, which wins over the
//! defaults below.
//!
//! ```toml
//! [build_ybus]
//! at = "2025-06-01T00:00:00Z"
//!
//! [phasors]
//! f0 = 60.0
//! rate = 2500.0
//! period = 10.0
//!
//! [estimate]
//! at = "2025-06-01T00:00:00Z"
//!
//! [dse]
//! dt = 0.0004
//!
//! [sync_error]
//! remove_mean = true
//! clock_sigma = 0.0
//! seed = 0
//!
//! [simulate]
//! seed = 7
//! ```

use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub build_ybus: BuildYbusConfig,
    pub phasors: PhasorsConfig,
    pub estimate: EstimateConfig,
    pub dse: DseConfig,
    pub sync_error: SyncErrorConfig,
    pub simulate: SimulateConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildYbusConfig {
    pub at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhasorsConfig {
    pub f0: f64,
    pub rate: f64,
    /// Tick spacing of the output table, s.
    pub period: f64,
}

impl Default for PhasorsConfig {
    fn default() -> Self {
        PhasorsConfig {
            f0: 60.0,
            rate: 2500.0,
            period: 10.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    pub at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DseConfig {
    pub at: Option<DateTime<Utc>>,
    pub dt: f64,
}

impl Default for DseConfig {
    fn default() -> Self {
        DseConfig {
            at: None,
            dt: 1.0 / 2500.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyncErrorConfig {
    pub remove_mean: bool,
    /// Standard deviation of clock error injected before estimation, deg.
    pub clock_sigma: f64,
    pub seed: u64,
}

impl Default for SyncErrorConfig {
    fn default() -> Self {
        SyncErrorConfig {
            remove_mean: true,
            clock_sigma: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    /// Overrides the scenario's own seed.
    pub seed: Option<u64>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> CliResult<ConfigFile> {
        let Some(path) = path else {
            return Ok(ConfigFile::default());
        };
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        toml::from_str(&text).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// Environment variable naming the directory behind `fixture:<name>` paths.
pub const FIXTURE_ENV: &str = "GRIDTWIN_FIXTURES";

pub fn default_fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

/// Resolves `fixture:<name>` against the fixture directory, trying
/// `<name>.json` when `<name>` does not exist. Other paths pass through.
pub fn resolve_path(arg: &str) -> PathBuf {
    let Some(name) = arg.strip_prefix("fixture:") else {
        return PathBuf::from(arg);
    };
    let dir = std::env::var_os(FIXTURE_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(default_fixture_dir);
    let p = dir.join(name);
    if p.exists() {
        return p;
    }
    let with_ext = dir.join(format!("{name}.json"));
    if with_ext.exists() {
        with_ext
    } else {
        p
    }
}
