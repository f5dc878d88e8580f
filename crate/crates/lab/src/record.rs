//! Run records (JSON) and per-run series (CSV).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{LabError, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const RECORD_FILE: &str = "record.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub step: u64,
    pub t: f64,
    #[serde(rename = "M1")]
    pub max: f64,
    pub m1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundValues {
    pub c_constant: f64,
    pub upper: Option<f64>,
    pub lower: Option<f64>,
    pub lower_vacuous: bool,
    /// Only when Γ1 is the whole boundary and M0 ≥ 1.
    pub whole_boundary: Option<f64>,
    pub ps_three_d: Option<f64>,
    pub ps_two_d: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowOutcome {
    pub gamma1: f64,
    pub crossed: bool,
    pub t0: Option<f64>,
    pub m1_at_t0: Option<f64>,
    pub steps: u64,
    pub final_time: f64,
    pub positivity_held: bool,
    pub min_seen: f64,
    /// Relative to the record directory.
    pub series_file: String,
    pub bounds: BoundValues,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub digest: String,
    pub config: RunConfig,
    pub dimension: usize,
    pub rows: Vec<RowOutcome>,
    /// Consecutive orders over the crossed rows.
    pub orders: Vec<f64>,
    pub global_order: Option<f64>,
    pub wall_seconds: f64,
}

impl RunRecord {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(LabError::io(path))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(RECORD_FILE);
        std::fs::write(&path, serde_json::to_string_pretty(self)?).map_err(LabError::io(&path))?;
        Ok(path)
    }

    /// Digest matches the embedded config and every series file exists.
    pub fn check(&self, dir: &Path) -> Result<()> {
        if self.config.digest() != self.digest {
            return Err(LabError::Config(format!("record digest {} does not match its config", self.digest)));
        }
        if self.schema_version != SCHEMA_VERSION {
            return Err(LabError::Config(format!("unsupported schema version {}", self.schema_version)));
        }
        for r in &self.rows {
            let p = dir.join(&r.series_file);
            if !p.is_file() {
                return Err(LabError::Config(format!("missing series file {}", p.display())));
            }
        }
        Ok(())
    }
}

/// Directory for a config: `<root>/<name>-<first 12 digest chars>`.
pub fn record_dir(root: &Path, config: &RunConfig) -> PathBuf {
    root.join(format!("{}-{}", config.name, &config.digest()[..12]))
}

pub fn write_series(path: &Path, rows: &[SeriesRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(LabError::io(path))?;
    Ok(())
}

pub fn read_series(path: &Path) -> Result<Vec<SeriesRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}
