//! Threshold-time tables from the shipped presets.

use std::path::{Path, PathBuf};

use blowuplab_core::bounds::{lower_bound, BoundInputs};
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::experiment::execute_all;
use crate::presets;
use crate::record::RunRecord;

#[derive(Debug, Clone, Serialize)]
struct TableRow {
    gamma1: f64,
    #[serde(rename = "T0")]
    t0: Option<f64>,
    order: Option<f64>,
    #[serde(rename = "m1_at_T0")]
    m1_at_t0: Option<f64>,
    upper_bound: Option<f64>,
    #[serde(rename = "lower_bound_C1")]
    lower_bound_c1: Option<f64>,
}

fn write_table(path: &Path, record: &RunRecord) -> Result<()> {
    let n = record.dimension;
    let (q, u0) = (record.config.solver.q, record.config.solver.u0);
    let volume = record.config.domain.build()?.volume();
    let mut w = csv::Writer::from_path(path)?;
    let mut orders = record.orders.iter();
    for (i, r) in record.rows.iter().enumerate() {
        let lower = lower_bound(&BoundInputs::constant(n, q, u0, volume, r.gamma1)).ok().map(|l| l.value);
        w.serialize(TableRow {
            gamma1: r.gamma1,
            t0: r.t0,
            order: if i > 0 && r.t0.is_some() { orders.next().copied() } else { None },
            m1_at_t0: r.m1_at_t0,
            upper_bound: r.bounds.upper,
            lower_bound_c1: lower,
        })?;
    }
    w.flush().map_err(LabError::io(path))?;
    Ok(())
}

/// Runs table1..table4 and writes `<out>/tableN.csv` next to the record
/// directories. `c` is the lower-bound constant stored in the records.
pub fn reproduce_tables(out: &Path, jobs: Option<usize>, c: f64) -> Result<Vec<(PathBuf, RunRecord)>> {
    let mut configs = presets::all()?;
    for cfg in &mut configs {
        cfg.c_constant = c;
    }
    let records = execute_all(&configs, out, jobs)?;
    let mut written = Vec::with_capacity(records.len());
    for r in records {
        let path = out.join(format!("{}.csv", r.config.name));
        write_table(&path, &r)?;
        written.push((path, r));
    }
    Ok(written)
}
