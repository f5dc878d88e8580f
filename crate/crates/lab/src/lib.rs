//! Experiment runner for `blowuplab-core`: TOML configs, JSON run records,
//! CSV series and tables, verification suites and reports.

pub mod calculator;
pub mod config;
pub mod error;
pub mod experiment;
pub mod presets;
pub mod record;
pub mod report;
pub mod tables;
pub mod verify;

use std::path::{Path, PathBuf};

pub use config::RunConfig;
pub use error::{LabError, Result};
pub use record::RunRecord;

pub const OUT_ENV: &str = "BLOWUPLAB_OUT";
pub const DEFAULT_OUT: &str = "blowuplab-out";

/// `--out` first, then `BLOWUPLAB_OUT`, then the config's `output`, then
/// `blowuplab-out`.
pub fn resolve_out(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => config.map_or_else(|| PathBuf::from(DEFAULT_OUT), Path::to_path_buf),
    }
}
