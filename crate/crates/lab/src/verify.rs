//! Property suites run by `blowuplab verify`.

use std::f64::consts::PI;
use std::str::FromStr;

use blowuplab_core::fdm::{compare_runs, mass_balance_residual, run_trace, run_until_threshold, InitialData};
use blowuplab_core::geometry::{boundary_quadrature, partition_boundary, Domain, Placement, Point, RegionTag};
use blowuplab_core::kernel::{geom_defect, grad_phi, heat, phi, phi_mass, singular_ratio_scan, surface_heat_integral};
use blowuplab_core::layer::{
    dyadic_offsets, flat_jump_check, jump_check, solve_linear_bie, solve_nonlinear_bie, BoundaryData, BoxedInitial,
    LinearBvpData, NonlinearBieConfig, NormalSide,
};
use blowuplab_core::representation::{
    boundary_representation_at, initial_trace_limit, interior_representation, SolutionTrace, TraceFlux,
};
use serde::Serialize;

use crate::error::LabError;
use crate::presets;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Kernels,
    Jumps,
    Bie,
    Representation,
    FdmProperties,
    All,
}

impl FromStr for Suite {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self, LabError> {
        Ok(match s {
            "kernels" => Suite::Kernels,
            "jumps" => Suite::Jumps,
            "bie" => Suite::Bie,
            "representation" => Suite::Representation,
            "fdm-properties" => Suite::FdmProperties,
            "all" => Suite::All,
            other => return Err(LabError::UnknownSuite(other.to_string())),
        })
    }
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Kernels => "kernels",
            Suite::Jumps => "jumps",
            Suite::Bie => "bie",
            Suite::Representation => "representation",
            Suite::FdmProperties => "fdm-properties",
            Suite::All => "all",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    fn near(suite: &'static str, name: &str, value: f64, expected: f64, tolerance: f64) -> Check {
        Check {
            suite,
            name: name.to_string(),
            passed: (value - expected).abs() <= tolerance,
            value,
            expected,
            tolerance,
            detail: String::new(),
        }
    }

    fn below(suite: &'static str, name: &str, value: f64, limit: f64) -> Check {
        Check { suite, name: name.to_string(), passed: value < limit, value, expected: 0.0, tolerance: limit, detail: String::new() }
    }

    fn flag(suite: &'static str, name: &str, passed: bool, detail: String) -> Check {
        Check { suite, name: name.to_string(), passed, value: passed as u8 as f64, expected: 1.0, tolerance: 0.0, detail }
    }

    fn failed(suite: &'static str, name: &str, err: impl std::fmt::Display) -> Check {
        Check::flag(suite, name, false, err.to_string())
    }

    fn with_detail(mut self, detail: String) -> Check {
        self.detail = detail;
        self
    }
}

pub fn run_suite(suite: Suite) -> Vec<Check> {
    match suite {
        Suite::Kernels => kernels(),
        Suite::Jumps => jumps(),
        Suite::Bie => bie(),
        Suite::Representation => representation(),
        Suite::FdmProperties => fdm_properties(),
        Suite::All => [kernels(), jumps(), bie(), representation(), fdm_properties()].concat(),
    }
}

const K: &str = "kernels";

pub fn kernels() -> Vec<Check> {
    let mut out = Vec::new();
    let mut worst: f64 = 0.0;
    for n in 1..=3 {
        for t in [1e-3, 0.1, 10.0] {
            match phi_mass(n, t) {
                Ok(m) => worst = worst.max((m - 1.0).abs()),
                Err(e) => return vec![Check::failed(K, "phi normalization", e)],
            }
        }
    }
    out.push(Check::near(K, "phi normalization", 1.0 + worst, 1.0, 1e-8));

    let mut worst: f64 = 0.0;
    let points: [&[f64]; 4] = [&[0.3], &[0.2, -0.4], &[0.1, 0.5, -0.3], &[1.0, 1.0, 1.0]];
    for x in points {
        for t in [0.05, 0.5, 2.0] {
            let g = grad_phi(x, t).unwrap_or_default();
            for a in 0..x.len() {
                let e = 1e-6;
                let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
                xp[a] += e;
                xm[a] -= e;
                let fd = (phi(&xp, t).unwrap_or(f64::NAN) - phi(&xm, t).unwrap_or(f64::NAN)) / (2.0 * e);
                worst = worst.max((fd - g[a]).abs() / (1.0 + g[a].abs()));
            }
        }
    }
    out.push(Check::below(K, "grad_phi vs finite differences", worst, 1e-6));

    let mut worst: f64 = 0.0;
    for r in [0.5, 1.0, 2.0] {
        let d = Domain::disk(r).expect("disk");
        for (a, b) in [(0.0, 0.1), (0.3, 2.0), (1.0, 4.0)] {
            match geom_defect(&d, &d.circle_point(a), &d.circle_point(b)) {
                Ok(g) => worst = worst.max((g.ratio - 1.0 / (2.0 * r)).abs()),
                Err(e) => return [out, vec![Check::failed(K, "circle geometric defect", e)]].concat(),
            }
        }
    }
    out.push(Check::below(K, "circle geometric defect ratio", worst, 1e-12));

    let d = Domain::unit_disk();
    out.push(match surface_heat_integral(&d, &[1.0, 0.0, 0.0], 1e-4) {
        Ok(v) => Check::near(K, "surface heat integral small-time limit", v, 2.0 * PI.sqrt(), 1e-3),
        Err(e) => Check::failed(K, "surface heat integral small-time limit", e),
    });

    out.push(match singular_ratio_scan(&d, &[1.0, 0.0, 0.0], 0.75, 0.75, 0.5, 12) {
        Ok(scan) => {
            let hi = scan.iter().map(|s| s.scaled).fold(0.0, f64::max);
            let lo = scan.iter().map(|s| s.scaled).fold(f64::INFINITY, f64::min);
            Check::below(K, "singular kernel scaled ratio bounded", hi / lo, 1.5)
                .with_detail(format!("{} dyadic separations", scan.len()))
        }
        Err(e) => Check::failed(K, "singular kernel scaled ratio bounded", e),
    });
    out
}

const J: &str = "jumps";

pub fn jumps() -> Vec<Check> {
    let mut out = Vec::new();
    let d = Domain::unit_disk();
    let part = match partition_boundary(&d, PI, Placement::default_for(&d)) {
        Ok(p) => p,
        Err(e) => return vec![Check::failed(J, "partition", e)],
    };
    let density = |y: &Point, _: f64| match part.classify(&d, y) {
        RegionTag::Gamma1 => 1.0,
        RegionTag::Interface => 0.5,
        RegionTag::Gamma2 => 0.0,
    };
    let hs = dyadic_offsets(0.02, 5);
    let inside = d.circle_point(-PI / 2.0);
    for (label, x, expect) in [("Γ1 interior", inside, 0.5), ("interface", part.interface[0], 0.25)] {
        for side in [NormalSide::Target, NormalSide::Source] {
            let name = format!("jump at {label}, {side:?} normal");
            out.push(match jump_check(&d, density, &x, 0.1, &hs, side) {
                Ok(j) => Check::near(J, &name, j.jump, expect, 1e-2),
                Err(e) => Check::failed(J, &name, e),
            });
        }
    }
    for n in [2, 3] {
        let name = format!("flat half-space jump, n = {n}");
        out.push(match flat_jump_check(n, 0.1, &hs) {
            Ok(j) => Check::near(J, &name, j.jump, 0.5, 1e-3),
            Err(e) => Check::failed(J, &name, e),
        });
    }
    out
}

/// u = Φ(x − (1.5, 0), t + 0.1): a heat solution in the disk with its source outside.
pub fn manufactured(x: &Point, t: f64) -> f64 {
    heat((x[0] - 1.5) * (x[0] - 1.5) + x[1] * x[1], t + 0.1, 2)
}

fn manufactured_flux(x: &Point, t: f64) -> f64 {
    (-(x[0] - 1.5) * x[0] - x[1] * x[1]) / (2.0 * (t + 0.1)) * manufactured(x, t)
}

const PROBES: [Point; 6] =
    [[0.0, 0.0, 0.0], [0.5, 0.0, 0.0], [0.8, 0.0, 0.0], [-0.8, 0.1, 0.0], [0.0, 0.5, 0.0], [0.6, 0.45, 0.0]];

/// max |u − u_exact| / max |u_exact| over interior probes at t = 0.5.
pub fn manufactured_error(nodes: usize, levels: usize) -> Result<f64, blowuplab_core::Error> {
    let d = Domain::unit_disk();
    let psi = BoxedInitial::around(&d, |x: &Point| manufactured(x, 0.0));
    let data = LinearBvpData::neumann(BoundaryData::function(manufactured_flux), Box::new(psi));
    let sol = solve_linear_bie(&d, data, 0.5, levels, nodes)?;
    let mut err: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for x in &PROBES {
        let exact = manufactured(x, 0.5);
        err = err.max((sol.evaluate(x, 0.5)? - exact).abs());
        scale = scale.max(exact.abs());
    }
    Ok(err / scale)
}

pub const MANUFACTURED_LEVELS: [(usize, usize); 3] = [(32, 50), (64, 100), (128, 200)];

const B: &str = "bie";

pub fn bie() -> Vec<Check> {
    let mut errors = Vec::new();
    for (n, m) in MANUFACTURED_LEVELS {
        match manufactured_error(n, m) {
            Ok(e) => errors.push(e),
            Err(e) => return vec![Check::failed(B, "manufactured solution", e)],
        }
    }
    let detail = format!("errors {errors:?} at (N, M) = {MANUFACTURED_LEVELS:?}");
    vec![
        Check::below(B, "manufactured error at (128, 200)", errors[2], 0.02).with_detail(detail.clone()),
        Check::flag(B, "manufactured error decreases under refinement", errors.windows(2).all(|w| w[1] < w[0]), detail),
    ]
}

const R: &str = "representation";

pub fn nonlinear_trace() -> Result<SolutionTrace, blowuplab_core::Error> {
    let cfg = NonlinearBieConfig {
        radius: 1.0,
        q: 2.0,
        u0: 0.05,
        gamma1_measure: PI,
        t_end: 30.0,
        levels: 600,
        nodes: 32,
        threshold: 0.5,
    };
    let report = solve_nonlinear_bie(&cfg)?;
    SolutionTrace::from_nonlinear(&cfg, &report)
}

/// Worst relative gap between the doubled boundary formula and the trace,
/// over all nodes at the middle level.
pub fn self_consistency(trace: &SolutionTrace) -> Result<f64, blowuplab_core::Error> {
    let m = trace.levels() / 2;
    let mut worst: f64 = 0.0;
    for i in 0..trace.quadrature().len() {
        let rep = boundary_representation_at(trace, i, m)?;
        worst = worst.max((rep.value / trace.value(i, m) - 1.0).abs());
    }
    Ok(worst)
}

pub fn representation() -> Vec<Check> {
    let mut out = Vec::new();
    out.push(match nonlinear_trace().and_then(|t| self_consistency(&t)) {
        Ok(v) => Check::below(R, "boundary formula returns the trace mid-run", v, 0.03),
        Err(e) => Check::failed(R, "boundary formula returns the trace mid-run", e),
    });
    let d = Domain::unit_disk();
    let ts: Vec<f64> = (0..5).map(|i| 1e-3 * 0.25f64.powi(i)).collect();
    for (label, x, expect) in [("boundary", [1.0, 0.0, 0.0], 0.5), ("interior", [0.3, 0.2, 0.0], 1.0)] {
        let name = format!("initial trace limit, {label} point");
        out.push(match initial_trace_limit(&d, |_| 1.0, &x, &ts) {
            Ok(l) => Check::near(R, &name, l.limit, expect, 1e-3),
            Err(e) => Check::failed(R, &name, e),
        });
    }
    let name = "interior formula on the manufactured trace";
    out.push(match manufactured_representation(64, 100) {
        Ok(e) => Check::below(R, name, e, 0.02),
        Err(e) => Check::failed(R, name, e),
    });
    out
}

/// Interior formula fed the exact trace and flux of the manufactured solution.
pub fn manufactured_representation(nodes: usize, levels: usize) -> Result<f64, blowuplab_core::Error> {
    let d = Domain::unit_disk();
    let part = partition_boundary(&d, 0.0, Placement::default_for(&d))?;
    let quad = boundary_quadrature(&d, &part, nodes)?;
    let dt = 0.5 / levels as f64;
    let sample = |f: fn(&Point, f64) -> f64| -> Vec<Vec<f64>> {
        (0..=levels).map(|l| quad.nodes.iter().map(|x| f(x, l as f64 * dt)).collect()).collect()
    };
    let trace = SolutionTrace::new(
        &d,
        &part,
        dt,
        sample(manufactured),
        |x| manufactured(x, 0.0),
        TraceFlux::Given(sample(manufactured_flux)),
    )?;
    let mut err: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for x in &PROBES[..3] {
        let exact = manufactured(x, 0.5);
        err = err.max((interior_representation(&trace, x, 0.5)?.value - exact).abs());
        scale = scale.max(exact);
    }
    Ok(err / scale)
}

const F: &str = "fdm-properties";

pub fn fdm_properties() -> Vec<Check> {
    let mut out = Vec::new();
    let configs = match presets::all() {
        Ok(c) => c,
        Err(e) => return vec![Check::failed(F, "presets", e)],
    };
    // every table configuration over a short horizon
    let mut violations = 0usize;
    let mut runs = 0usize;
    for c in &configs {
        for g in c.gamma1_values() {
            let Ok(mut sc) = c.solver_config(g) else {
                violations += 1;
                continue;
            };
            sc.t_max = 2.0;
            match run_until_threshold(&sc) {
                Ok(r) if r.positivity_held() => {}
                _ => violations += 1,
            }
            runs += 1;
        }
    }
    out.push(Check::flag(
        F,
        "positivity on table configurations (t <= 2)",
        violations == 0,
        format!("{violations} of {runs} runs went negative or failed"),
    ));

    let base = configs[0].solver_config(0.5).expect("table1 row");
    let mut smaller = configs[0].solver_config(0.25).expect("table1 row");
    smaller.t_max = base.t_max;
    out.push(match compare_runs(&base, &smaller) {
        Ok(v) => Check::flag(F, "nested Γ1 dominance (20/40 over 10/40)", v.holds(), format!("{} steps, min gap {}", v.steps_checked, v.min_gap)),
        Err(e) => Check::failed(F, "nested Γ1 dominance", e),
    });
    let mut warmer = base.clone();
    warmer.u0 = InitialData::Constant(0.06);
    out.push(match compare_runs(&warmer, &base) {
        Ok(v) => Check::flag(F, "ordered u0 dominance (0.06 over 0.05)", v.holds(), format!("{} steps, min gap {}", v.steps_checked, v.min_gap)),
        Err(e) => Check::failed(F, "ordered u0 dominance", e),
    });

    let d = Domain::unit_square();
    let mut still = base.clone();
    still.partition = partition_boundary(&d, 0.0, Placement::default_for(&d)).expect("empty patch");
    still.t_max = 1.0;
    out.push(match run_until_threshold(&still) {
        Ok(r) => Check::flag(F, "empty Γ1 keeps constant data", !r.crossed && r.series.iter().all(|s| s.max == 0.05 && s.min == 0.05), String::new()),
        Err(e) => Check::failed(F, "empty Γ1 keeps constant data", e),
    });
    out.push(match run_trace(&still, 1.0, 100).and_then(|t| mass_balance_residual(&t, &still)) {
        Ok(m) => Check::below(F, "mass balance without inflow", m.max_normalized, 1e-12),
        Err(e) => Check::failed(F, "mass balance without inflow", e),
    });
    let mut a = base.clone();
    a.t_max = 0.5;
    out.push(match (run_until_threshold(&a), run_until_threshold(&a)) {
        (Ok(x), Ok(y)) => Check::flag(F, "bitwise determinism", x == y, String::new()),
        (Err(e), _) | (_, Err(e)) => Check::failed(F, "bitwise determinism", e),
    });
    out
}
