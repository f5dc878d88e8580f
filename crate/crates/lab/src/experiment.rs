//! Executes configs: every sweep entry is an independent job on a rayon pool.

use std::path::Path;
use std::time::Instant;

use blowuplab_core::bounds::{global_order, lower_bound, order_estimate, ps_lower_bounds, upper_bound, whole_boundary_lower_bound, BoundInputs};
use blowuplab_core::fdm::{run_until_threshold, Grid};
use blowuplab_core::layer::solve_nonlinear_bie;
use rayon::prelude::*;

use crate::config::{Backend, RunConfig};
use crate::error::{LabError, Result};
use crate::record::{record_dir, write_series, BoundValues, RowOutcome, RunRecord, SeriesRow, SCHEMA_VERSION};

struct RowResult {
    crossed: bool,
    t0: Option<f64>,
    m1_at_t0: Option<f64>,
    steps: u64,
    final_time: f64,
    min_seen: f64,
    series: Vec<SeriesRow>,
}

fn run_row(config: &RunConfig, gamma1: f64) -> Result<RowResult> {
    match config.backend {
        Backend::Fdm => {
            let r = run_until_threshold(&config.solver_config(gamma1)?)?;
            Ok(RowResult {
                crossed: r.crossed,
                t0: r.t0,
                m1_at_t0: r.m1_at_t0,
                steps: r.steps,
                final_time: r.final_time,
                min_seen: r.min_seen,
                series: r.series.iter().map(|s| SeriesRow { step: s.step, t: s.t, max: s.max, m1: s.min }).collect(),
            })
        }
        Backend::Bie => {
            let c = config.bie_config(gamma1)?;
            let r = solve_nonlinear_bie(&c)?;
            if r.truncated {
                return Err(LabError::Solver(blowuplab_core::Error::NoContraction {
                    level: r.levels_completed + 1,
                    iterations: blowuplab_core::layer::PICARD_MAX_ITER,
                }));
            }
            let series: Vec<SeriesRow> = r
                .series()
                .into_iter()
                .enumerate()
                .map(|(l, (t, max, min))| SeriesRow { step: l as u64, t, max, m1: min })
                .collect();
            let min_seen = series.iter().map(|s| s.m1).fold(f64::INFINITY, f64::min);
            let m1_at_t0 = if r.crossed { series.last().map(|s| s.m1) } else { None };
            Ok(RowResult {
                crossed: r.crossed,
                t0: r.crossed.then_some(r.t0),
                m1_at_t0,
                steps: r.levels_completed as u64,
                final_time: r.levels_completed as f64 * r.dt,
                min_seen,
                series,
            })
        }
    }
}

fn bounds(config: &RunConfig, gamma1: f64) -> Result<BoundValues> {
    let domain = config.domain.build()?;
    let n = domain.dim();
    let (q, u0) = (config.solver.q, config.solver.u0);
    let inputs = BoundInputs::constant(n, q, u0, domain.volume(), gamma1).with_c(config.c_constant);
    let lower = lower_bound(&inputs).ok();
    let whole = (gamma1 >= domain.boundary_measure() * (1.0 - 1e-12))
        .then(|| whole_boundary_lower_bound(&inputs).ok())
        .flatten();
    let ps = match config.backend {
        Backend::Fdm => {
            let grid = Grid::new(&domain, config.solver.h)?;
            ps_lower_bounds(&inputs, &grid, &vec![u0; grid.len()]).ok()
        }
        Backend::Bie => None,
    };
    Ok(BoundValues {
        c_constant: config.c_constant,
        upper: upper_bound(&inputs).ok(),
        lower: lower.map(|l| l.value),
        lower_vacuous: lower.is_some_and(|l| l.vacuous),
        whole_boundary: whole,
        ps_three_d: ps.map(|p| p.three_d),
        ps_two_d: ps.map(|p| p.two_d),
    })
}

/// Runs every row of every config, `jobs` at a time (all cores when `None`),
/// and writes one record directory per config under `out`.
pub fn execute_all(configs: &[RunConfig], out: &Path, jobs: Option<usize>) -> Result<Vec<RunRecord>> {
    for c in configs {
        c.validate()?;
    }
    let started = Instant::now();
    let tasks: Vec<(usize, usize, f64)> = configs
        .iter()
        .enumerate()
        .flat_map(|(ci, c)| c.gamma1_values().into_iter().enumerate().map(move |(ri, g)| (ci, ri, g)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder.build().map_err(|e| LabError::Config(format!("thread pool: {e}")))?;
    let dirs: Vec<_> = configs.iter().map(|c| record_dir(out, c)).collect();
    for d in &dirs {
        std::fs::create_dir_all(d).map_err(LabError::io(d))?;
    }
    let outcomes: Vec<Result<(usize, RowOutcome)>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(ci, ri, gamma1)| {
                let t = Instant::now();
                let config = &configs[ci];
                let r = run_row(config, gamma1)?;
                let series_file = format!("series-{ri}.csv");
                write_series(&dirs[ci].join(&series_file), &r.series)?;
                Ok((
                    ci,
                    RowOutcome {
                        gamma1,
                        crossed: r.crossed,
                        t0: r.t0,
                        m1_at_t0: r.m1_at_t0,
                        steps: r.steps,
                        final_time: r.final_time,
                        positivity_held: r.min_seen >= 0.0,
                        min_seen: r.min_seen,
                        series_file,
                        bounds: bounds(config, gamma1)?,
                        wall_seconds: t.elapsed().as_secs_f64(),
                    },
                ))
            })
            .collect()
    });
    let mut rows: Vec<Vec<RowOutcome>> = vec![Vec::new(); configs.len()];
    for o in outcomes {
        let (ci, row) = o?;
        rows[ci].push(row);
    }
    let wall = started.elapsed().as_secs_f64();
    let mut records = Vec::with_capacity(configs.len());
    for ((config, rows), dir) in configs.iter().zip(rows).zip(&dirs) {
        let pairs: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.t0.map(|t| (r.gamma1, t))).collect();
        let record = RunRecord {
            schema_version: SCHEMA_VERSION,
            digest: config.digest(),
            config: config.clone(),
            dimension: config.domain.build()?.dim(),
            orders: order_estimate(&pairs).unwrap_or_default(),
            global_order: global_order(&pairs).ok(),
            rows,
            wall_seconds: wall,
        };
        record.save(dir)?;
        records.push(record);
    }
    Ok(records)
}

pub fn execute(config: &RunConfig, out: &Path, jobs: Option<usize>) -> Result<RunRecord> {
    Ok(execute_all(std::slice::from_ref(config), out, jobs)?.remove(0))
}
