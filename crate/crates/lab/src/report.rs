//! Aggregates run records into a comparison of threshold times, bounds and
//! orders, grouped by (dimension, q).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use blowuplab_core::bounds::{global_order, order_estimate};
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::record::{RunRecord, RECORD_FILE};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub experiment: String,
    pub dimension: usize,
    pub q: f64,
    pub gamma1: f64,
    #[serde(rename = "T0")]
    pub t0: Option<f64>,
    #[serde(rename = "m1_at_T0")]
    pub m1_at_t0: Option<f64>,
    pub upper_bound: Option<f64>,
    pub lower_bound: Option<f64>,
    pub c_constant: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportGroup {
    pub dimension: usize,
    pub q: f64,
    /// Sorted by decreasing |Γ1|.
    pub rows: Vec<ReportRow>,
    pub orders: Vec<f64>,
    pub global_order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub records: usize,
    pub groups: Vec<ReportGroup>,
}

/// `record.json` in `dir` or in any of its immediate subdirectories.
pub fn collect_records(dir: &Path) -> Result<Vec<(PathBuf, RunRecord)>> {
    let mut paths = Vec::new();
    if dir.join(RECORD_FILE).is_file() {
        paths.push(dir.join(RECORD_FILE));
    }
    if dir.is_dir() {
        for entry in std::fs::read_dir(dir).map_err(LabError::io(dir))? {
            let p = entry.map_err(LabError::io(dir))?.path().join(RECORD_FILE);
            if p.is_file() {
                paths.push(p);
            }
        }
    }
    paths.sort();
    paths.into_iter().map(|p| RunRecord::load(&p).map(|r| (p, r))).collect()
}

pub fn build_report(dir: &Path) -> Result<Report> {
    let records = collect_records(dir)?;
    if records.is_empty() {
        return Err(LabError::NoRecords(dir.to_path_buf()));
    }
    let mut groups: Vec<ReportGroup> = Vec::new();
    for (_, rec) in &records {
        let q = rec.config.solver.q;
        let idx = match groups.iter().position(|g| g.dimension == rec.dimension && g.q == q) {
            Some(i) => i,
            None => {
                groups.push(ReportGroup { dimension: rec.dimension, q, rows: Vec::new(), orders: Vec::new(), global_order: None });
                groups.len() - 1
            }
        };
        for r in &rec.rows {
            groups[idx].rows.push(ReportRow {
                experiment: rec.config.name.clone(),
                dimension: rec.dimension,
                q,
                gamma1: r.gamma1,
                t0: r.t0,
                m1_at_t0: r.m1_at_t0,
                upper_bound: r.bounds.upper,
                lower_bound: r.bounds.lower,
                c_constant: r.bounds.c_constant,
            });
        }
    }
    for g in &mut groups {
        g.rows.sort_by(|a, b| b.gamma1.total_cmp(&a.gamma1));
        g.rows.dedup_by(|a, b| a.gamma1 == b.gamma1);
        let pairs: Vec<(f64, f64)> = g.rows.iter().filter_map(|r| r.t0.map(|t| (r.gamma1, t))).collect();
        g.orders = order_estimate(&pairs).unwrap_or_default();
        g.global_order = global_order(&pairs).ok();
    }
    groups.sort_by(|a, b| (a.dimension, a.q).partial_cmp(&(b.dimension, b.q)).expect("finite q"));
    Ok(Report { records: records.len(), groups })
}

fn cell(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.digits$}"))
}

impl Report {
    pub fn to_markdown(&self) -> String {
        let mut s = format!("# Threshold times\n\n{} record(s)\n", self.records);
        for g in &self.groups {
            let _ = writeln!(s, "\n## n = {}, q = {}\n", g.dimension, g.q);
            let _ = writeln!(s, "| experiment | |Γ1| | T0 | m1(T0) | upper bound | lower bound (C) |");
            let _ = writeln!(s, "|---|---|---|---|---|---|");
            for r in &g.rows {
                let _ = writeln!(
                    s,
                    "| {} | {:.4} | {} | {} | {} | {} ({}) |",
                    r.experiment,
                    r.gamma1,
                    cell(r.t0, 1),
                    cell(r.m1_at_t0, 2),
                    cell(r.upper_bound, 2),
                    cell(r.lower_bound, 3),
                    r.c_constant
                );
            }
            if let Some(order) = g.global_order {
                let list: Vec<String> = g.orders.iter().map(|o| format!("{o:.3}")).collect();
                let _ = writeln!(s, "\nOrders: {}. Least-squares order of T0 in 1/|Γ1|: {order:.3}", list.join(", "));
            }
        }
        s
    }

    /// Writes `report.md` and `report.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir).map_err(LabError::io(dir))?;
        let md = dir.join("report.md");
        std::fs::write(&md, self.to_markdown()).map_err(LabError::io(&md))?;
        let csv_path = dir.join("report.csv");
        let mut w = csv::Writer::from_path(&csv_path)?;
        for r in self.groups.iter().flat_map(|g| &g.rows) {
            w.serialize(r)?;
        }
        w.flush().map_err(LabError::io(&csv_path))?;
        Ok((md, csv_path))
    }
}
