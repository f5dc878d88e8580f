//! The four threshold-time sweeps shipped with the repository.

use crate::config::RunConfig;
use crate::error::{LabError, Result};

pub const PRESETS: [(&str, &str); 4] = [
    ("table1", include_str!("../presets/table1.toml")),
    ("table2", include_str!("../presets/table2.toml")),
    ("table3", include_str!("../presets/table3.toml")),
    ("table4", include_str!("../presets/table4.toml")),
];

pub fn preset(name: &str) -> Result<RunConfig> {
    let (_, text) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| LabError::Config(format!("no preset named `{name}`")))?;
    RunConfig::from_toml_str(text)
}

pub fn all() -> Result<Vec<RunConfig>> {
    PRESETS.iter().map(|(n, _)| preset(n)).collect()
}
