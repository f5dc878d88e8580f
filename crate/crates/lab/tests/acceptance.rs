//! One line per acceptance criterion. Runs the four table presets once and
//! reuses those records for the table, bound, order and positivity checks.

use std::process::ExitCode;

use blowuplab::experiment::execute_all;
use blowuplab::presets;
use blowuplab::record::RunRecord;
use blowuplab::verify::{self, Check};

struct Published {
    gamma1: [f64; 4],
    t0: [f64; 4],
    orders: [f64; 3],
    m1: [f64; 4],
}

const PUBLISHED: [Published; 4] = [
    Published {
        gamma1: [0.5, 0.25, 0.125, 0.075],
        t0: [35.4, 72.8, 149.6, 253.6],
        orders: [1.040, 1.039, 1.033],
        m1: [1.17, 1.57, 2.32, 3.21],
    },
    Published {
        gamma1: [0.5, 0.25, 0.125, 0.075],
        t0: [394.6, 791.8, 1588.5, 2652.5],
        orders: [1.005, 1.005, 1.004],
        m1: [0.81, 0.95, 1.16, 1.37],
    },
    Published {
        gamma1: [0.49, 0.25, 0.16, 0.09],
        t0: [36.3, 72.6, 114.7, 206.9],
        orders: [1.028, 1.024, 1.026],
        m1: [1.23, 1.51, 1.73, 2.17],
    },
    Published {
        gamma1: [0.49, 0.25, 0.16, 0.09],
        t0: [403.0, 791.6, 1238.4, 2205.4],
        orders: [1.003, 1.003, 1.003],
        m1: [0.84, 0.93, 1.00, 1.13],
    },
];

struct Outcome {
    passed: bool,
    detail: String,
}

fn from_checks(checks: &[Check]) -> Outcome {
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{} = {} (expected {} ± {}) {}", c.name, c.value, c.expected, c.tolerance, c.detail))
        .collect();
    Outcome {
        passed: failed.is_empty() && !checks.is_empty(),
        detail: if failed.is_empty() { format!("{} checks", checks.len()) } else { failed.join("; ") },
    }
}

fn tables(records: &[RunRecord]) -> Outcome {
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    let mut bad = Vec::new();
    for (k, (rec, p)) in records.iter().zip(&PUBLISHED).enumerate() {
        for (i, row) in rec.rows.iter().enumerate() {
            if (row.gamma1 - p.gamma1[i]).abs() > 1e-12 {
                bad.push(format!("table {} row {i}: |Γ1| = {}", k + 1, row.gamma1));
                continue;
            }
            let (Some(t0), Some(m1)) = (row.t0, row.m1_at_t0) else {
                bad.push(format!("table {} row {i}: no blow-up", k + 1));
                continue;
            };
            let et = (t0 / p.t0[i] - 1.0).abs();
            let em = (m1 / p.m1[i] - 1.0).abs();
            worst.0 = worst.0.max(et);
            worst.2 = worst.2.max(em);
            if et > 0.03 || em > 0.05 {
                bad.push(format!("table {} row {i}: T0 {t0:.1} m1 {m1:.3}", k + 1));
            }
        }
        for (i, o) in rec.orders.iter().enumerate() {
            let e = (o - p.orders[i]).abs();
            worst.1 = worst.1.max(e);
            if e > 0.02 {
                bad.push(format!("table {} order {i}: {o:.4}", k + 1));
            }
        }
        if rec.orders.len() != 3 {
            bad.push(format!("table {}: {} orders", k + 1, rec.orders.len()));
        }
    }
    Outcome {
        passed: bad.is_empty(),
        detail: format!(
            "worst T0 {:.2}%, order {:.4}, m1 {:.2}% {}",
            100.0 * worst.0,
            worst.1,
            100.0 * worst.2,
            bad.join("; ")
        ),
    }
}

fn upper_bounds(records: &[RunRecord]) -> Outcome {
    let mut tightest = f64::INFINITY;
    let mut ok = true;
    for row in records.iter().flat_map(|r| &r.rows) {
        match (row.t0, row.bounds.upper) {
            (Some(t), Some(u)) => {
                ok &= t < u;
                tightest = tightest.min(u / t - 1.0);
            }
            _ => ok = false,
        }
    }
    Outcome { passed: ok, detail: format!("smallest margin {:.2}%", 100.0 * tightest) }
}

fn global_orders(records: &[RunRecord]) -> Outcome {
    let g: Vec<Option<f64>> = records.iter().map(|r| r.global_order).collect();
    let passed = g.iter().all(|o| matches!(o, Some(v) if (0.98..=1.06).contains(v)));
    let shown: Vec<String> = g.iter().map(|o| o.map_or("none".into(), |v| format!("{v:.4}"))).collect();
    Outcome { passed, detail: format!("least-squares slopes [{}]", shown.join(", ")) }
}

fn positivity(records: &[RunRecord]) -> Outcome {
    let rows: Vec<_> = records.iter().flat_map(|r| &r.rows).collect();
    let negative = rows.iter().filter(|r| !r.positivity_held).count();
    let dominance: Vec<Check> = verify::fdm_properties()
        .into_iter()
        .filter(|c| c.name.contains("dominance"))
        .collect();
    let d = from_checks(&dominance);
    Outcome {
        passed: negative == 0 && dominance.len() == 2 && d.passed,
        detail: format!("{negative} of {} full table runs went negative; dominance: {}", rows.len(), d.detail),
    }
}

fn main() -> ExitCode {
    let configs = presets::all().expect("presets");
    let dir = tempfile::tempdir().expect("tempdir");
    let records = execute_all(&configs, dir.path(), None).expect("table runs");

    let criteria: [(&str, Outcome); 8] = [
        ("table reproduction (T0 ±3%, order ±0.02, m1 ±5%)", tables(&records)),
        ("T0 below the upper bound", upper_bounds(&records)),
        ("global order in [0.98, 1.06]", global_orders(&records)),
        ("layer potential jumps", from_checks(&verify::jumps())),
        ("boundary integral solver on the manufactured solution", from_checks(&verify::bie())),
        ("representation formula", from_checks(&verify::representation())),
        ("heat kernel suite", from_checks(&verify::kernels())),
        ("positivity and comparison", positivity(&records)),
    ];

    let mut all = true;
    for (i, (name, o)) in criteria.iter().enumerate() {
        all &= o.passed;
        println!("criterion {} {name}: {} ({})", i + 1, if o.passed { "PASS" } else { "FAIL" }, o.detail.trim_end());
    }
    if all {
        println!("acceptance: all 8 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    }
}
