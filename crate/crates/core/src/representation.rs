//! Interior and boundary representation formulas for a computed boundary
//! trace on a disk: initial potential over Ω, single layer of the flux and
//! double layer of the trace. On the boundary every term is doubled.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use crate::geometry::{BoundaryPartition, BoundaryQuadrature, Domain, Point, Shape};
use crate::kernel::heat;
use crate::layer::{BoundaryDensity, BoundaryOperator, NonlinearBieConfig, NonlinearBieReport};
use crate::math::{self, Exponent, PI};
use crate::quadrature::{adaptive, GaussLegendre};
use crate::{Error, Result};

/// What drives the single-layer term.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceFlux {
    /// η u^q with η = 1 on Γ1, ½ on Γ̃, 0 on Γ2.
    Nonlinear { q: f64 },
    /// ∂u/∂n sampled on nodes × levels.
    Given(Vec<Vec<f64>>),
}

type InitialFn = Box<dyn Fn(&Point) -> f64 + Send + Sync>;

/// Boundary values of a solution on a disk, piecewise constant in time
/// like the layer densities, together with u0 and the flux law.
pub struct SolutionTrace {
    operator: BoundaryOperator,
    partition: BoundaryPartition,
    values: BoundaryDensity,
    flux: BoundaryDensity,
    u0: InitialFn,
}

impl SolutionTrace {
    pub fn new<F>(
        domain: &Domain,
        partition: &BoundaryPartition,
        dt: f64,
        values: Vec<Vec<f64>>,
        u0: F,
        flux: TraceFlux,
    ) -> Result<Self>
    where
        F: Fn(&Point) -> f64 + Send + Sync + 'static,
    {
        if values.len() < 2 {
            return Err(Error::InvalidParameter("trace needs at least one level after t = 0".into()));
        }
        let nodes = values[0].len();
        if values.iter().any(|row| row.len() != nodes) {
            return Err(Error::InvalidParameter("trace rows have different node counts".into()));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("trace holds non-finite values".into()));
        }
        let levels = values.len() - 1;
        let operator = BoundaryOperator::new(domain, partition, nodes, dt, levels)?;
        let flux = match flux {
            TraceFlux::Nonlinear { q } => {
                if !(q > 1.0) {
                    return Err(Error::InvalidParameter(format!("need q > 1, got {q}")));
                }
                let q = Exponent::new(q);
                let eta = operator.gamma1_indicator();
                values
                    .iter()
                    .map(|row| row.iter().zip(&eta).map(|(&u, &e)| e * q.apply(u.max(0.0))).collect())
                    .collect()
            }
            TraceFlux::Given(g) => {
                if g.len() != values.len() || g.iter().any(|row| row.len() != nodes) {
                    return Err(Error::InvalidParameter("flux samples do not match the trace".into()));
                }
                g
            }
        };
        Ok(SolutionTrace {
            operator,
            partition: partition.clone(),
            values: BoundaryDensity { values, dt },
            flux: BoundaryDensity { values: flux, dt },
            u0: Box::new(u0),
        })
    }

    /// The boundary trace of a nonlinear disk run with constant u0.
    pub fn from_nonlinear(config: &NonlinearBieConfig, report: &NonlinearBieReport) -> Result<Self> {
        let domain = Domain::disk(config.radius)?;
        let u0 = config.u0;
        SolutionTrace::new(
            &domain,
            &report.partition,
            report.dt,
            report.boundary_values.clone(),
            move |_| u0,
            TraceFlux::Nonlinear { q: config.q },
        )
    }

    pub fn domain(&self) -> &Domain {
        self.operator.domain()
    }

    pub fn partition(&self) -> &BoundaryPartition {
        &self.partition
    }

    pub fn quadrature(&self) -> &BoundaryQuadrature {
        self.operator.quadrature()
    }

    pub fn dt(&self) -> f64 {
        self.values.dt
    }

    pub fn levels(&self) -> usize {
        self.values.levels()
    }

    /// u at node i, level m.
    pub fn value(&self, i: usize, m: usize) -> f64 {
        self.values.values[m][i]
    }

    pub fn initial(&self, x: &Point) -> f64 {
        (self.u0)(x)
    }
}

/// The three terms of a representation formula and their sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Representation {
    pub initial: f64,
    pub single_layer: f64,
    pub double_layer: f64,
    pub value: f64,
}

/// ∫_Ω Φ(x−y, t) u0(y) dy on a disk, in polar coordinates centred at x
/// (x in the closed disk).
pub fn initial_potential<F: Fn(&Point) -> f64>(domain: &Domain, u0: F, x: &Point, t: f64) -> Result<f64> {
    let Shape::Disk { radius } = domain.shape() else {
        return Err(Error::InvalidDomain("initial potential is implemented on disks".into()));
    };
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("need t > 0, got {t}")));
    }
    let c = domain.center();
    let d = [x[0] - c[0], x[1] - c[1]];
    let excess = math::dot(&d, &d) - radius * radius;
    if excess > 1e-9 * radius * radius {
        return Err(Error::InvalidParameter("point lies outside the disk".into()));
    }
    let st = math::sqrt(t);
    let reach = 13.0 * st;
    let rule = GaussLegendre::new(10);
    let ray = |theta: f64| {
        let e = [math::cos(theta), math::sin(theta)];
        let b = math::dot(&d, &e);
        let disc = b * b - excess.min(0.0);
        let rmax = (-b + math::sqrt(disc.max(0.0))).clamp(0.0, reach);
        if rmax == 0.0 {
            return 0.0;
        }
        let pieces = libm::ceil(rmax / (2.0 * st)).clamp(1.0, 64.0) as usize;
        let step = rmax / pieces as f64;
        let mut s = 0.0;
        for p in 0..pieces {
            let lo = p as f64 * step;
            for (rho, w) in rule.mapped(lo, lo + step) {
                let y = [x[0] + rho * e[0], x[1] + rho * e[1], 0.0];
                s += w * rho * heat(rho * rho, t, 2) * u0(&y);
            }
        }
        s
    };
    // the ray length has kinks at the tangent directions of the nearest boundary point
    let alpha = math::atan2(d[1], d[0]);
    let breaks = [alpha - 0.5 * PI, alpha + 0.5 * PI, alpha + 1.5 * PI];
    adaptive(ray, &breaks, 1e-12, 4000)
}

fn check_time(trace: &SolutionTrace, t: f64) -> Result<()> {
    let end = trace.dt() * trace.levels() as f64;
    if !(t > 0.0) || t > end * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!("time {t} outside (0, {end}]")));
    }
    Ok(())
}

/// u(x, t) = ∫_Ω Φ u0 + ∫∫ Φ ∂u/∂n + ∫∫ DΦ·n(y) u at an interior point at
/// least one panel width from the boundary.
pub fn interior_representation(trace: &SolutionTrace, x: &Point, t: f64) -> Result<Representation> {
    check_time(trace, t)?;
    let domain = trace.domain();
    let panel = domain.boundary_measure() / trace.quadrature().len() as f64;
    if !domain.contains(x) || domain.boundary_distance(x) < panel {
        return Err(Error::NearBoundary(format!(
            "distance {} below the panel width {panel}",
            domain.boundary_distance(x)
        )));
    }
    let initial = initial_potential(domain, &trace.u0, x, t)?;
    let single_layer = trace.operator.single_layer(&trace.flux, x, t)?;
    let double_layer = trace.operator.double_layer(&trace.values, x, t)?;
    Ok(Representation { initial, single_layer, double_layer, value: initial + single_layer + double_layer })
}

/// The boundary formula, every term doubled, at a quadrature node and a
/// time level. The double layer is the on-boundary value.
pub fn boundary_representation(trace: &SolutionTrace, x: &Point, t: f64) -> Result<Representation> {
    check_time(trace, t)?;
    let quad = trace.quadrature();
    let scale = trace.domain().extents()[0];
    let i = quad
        .nodes
        .iter()
        .position(|y| math::dist2(&x[..2], &y[..2]) < 1e-18 * scale * scale)
        .ok_or_else(|| Error::InvalidParameter("boundary point is not a quadrature node".into()))?;
    let m = libm::round(t / trace.dt());
    if math::abs(m * trace.dt() - t) > 1e-9 * trace.dt() {
        return Err(Error::InvalidParameter(format!("t = {t} is not a time level")));
    }
    boundary_representation_at(trace, i, m as usize)
}

/// [`boundary_representation`] by node and level index.
pub fn boundary_representation_at(trace: &SolutionTrace, i: usize, m: usize) -> Result<Representation> {
    if i >= trace.quadrature().len() || m == 0 || m > trace.levels() {
        return Err(Error::InvalidParameter(format!("node {i}, level {m} out of range")));
    }
    let x = trace.quadrature().nodes[i];
    let initial = 2.0 * initial_potential(trace.domain(), &trace.u0, &x, m as f64 * trace.dt())?;
    let single_layer = 2.0 * trace.operator.single_layer_at_node(&trace.flux, i, m);
    let double_layer = 2.0 * trace.operator.double_layer_at_node(&trace.values, i, m);
    Ok(Representation { initial, single_layer, double_layer, value: initial + single_layer + double_layer })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceLimit {
    /// Intercept of a linear fit in √t.
    pub limit: f64,
    pub samples: Vec<(f64, f64)>,
}

/// ∫_Ω Φ(x−y, t) u0(y) dy for each t, extrapolated to t → 0⁺.
pub fn initial_trace_limit<F: Fn(&Point) -> f64>(
    domain: &Domain,
    u0: F,
    x: &Point,
    t_sequence: &[f64],
) -> Result<TraceLimit> {
    if t_sequence.len() < 2 || t_sequence.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParameter("t sequence must be decreasing with at least two entries".into()));
    }
    let mut samples = Vec::with_capacity(t_sequence.len());
    for &t in t_sequence {
        samples.push((t, initial_potential(domain, &u0, x, t)?));
    }
    let s: Vec<f64> = samples.iter().map(|p| math::sqrt(p.0)).collect();
    let v: Vec<f64> = samples.iter().map(|p| p.1).collect();
    Ok(TraceLimit { limit: math::linear_fit(&s, &v).1, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{boundary_quadrature, partition_boundary, Placement};
    use crate::layer::solve_nonlinear_bie;
    use alloc::vec;

    fn zero_trace(nodes: usize, levels: usize) -> SolutionTrace {
        let d = Domain::unit_disk();
        let part = partition_boundary(&d, PI, Placement::default_for(&d)).unwrap();
        SolutionTrace::new(&d, &part, 0.1, vec![vec![0.0; nodes]; levels + 1], |_| 0.0, TraceFlux::Nonlinear { q: 2.0 })
            .unwrap()
    }

    #[test]
    fn zero_trace_represents_zero() {
        let tr = zero_trace(16, 4);
        assert_eq!(interior_representation(&tr, &[0.1, 0.2, 0.0], 0.3).unwrap().value, 0.0);
        let x = tr.quadrature().nodes[3];
        assert_eq!(boundary_representation(&tr, &x, 0.4).unwrap().value, 0.0);
        assert!(boundary_representation(&tr, &x, 0.35).is_err());
        assert!(matches!(interior_representation(&tr, &[0.95, 0.0, 0.0], 0.3), Err(Error::NearBoundary(_))));
        assert!(interior_representation(&tr, &[0.1, 0.0, 0.0], 0.5).is_err());
    }

    #[test]
    fn trace_validation() {
        let d = Domain::unit_disk();
        let part = partition_boundary(&d, PI, Placement::default_for(&d)).unwrap();
        let bad = vec![vec![0.0; 8], vec![f64::NAN; 8]];
        assert!(SolutionTrace::new(&d, &part, 0.1, bad, |_| 0.0, TraceFlux::Nonlinear { q: 2.0 }).is_err());
        let ragged = vec![vec![0.0; 8], vec![0.0; 7]];
        assert!(SolutionTrace::new(&d, &part, 0.1, ragged, |_| 0.0, TraceFlux::Nonlinear { q: 2.0 }).is_err());
        let flux = TraceFlux::Given(vec![vec![0.0; 8]]);
        assert!(SolutionTrace::new(&d, &part, 0.1, vec![vec![0.0; 8]; 2], |_| 0.0, flux).is_err());
        let sq = Domain::unit_square();
        let part = partition_boundary(&sq, 0.5, Placement::default_for(&sq)).unwrap();
        assert!(SolutionTrace::new(&sq, &part, 0.1, vec![vec![0.0; 8]; 2], |_| 0.0, TraceFlux::Nonlinear { q: 2.0 }).is_err());
    }

    #[test]
    fn initial_potential_limits() {
        let d = Domain::unit_disk();
        let ts: Vec<f64> = (0..5).map(|i| 1e-3 * math::pow(0.25, i as f64)).collect();
        let on = initial_trace_limit(&d, |_| 1.0, &[1.0, 0.0, 0.0], &ts).unwrap();
        assert!((on.limit - 0.5).abs() < 1e-3, "{on:?}");
        let inside = initial_trace_limit(&d, |_| 1.0, &[0.3, 0.2, 0.0], &ts).unwrap();
        assert!((inside.limit - 1.0).abs() < 1e-3);
        let zero = initial_trace_limit(&d, |_| 0.0, &[1.0, 0.0, 0.0], &ts).unwrap();
        assert_eq!(zero.limit, 0.0);
        // smooth data at a short time
        let v = initial_potential(&d, |x| libm::sin(2.0 * x[0]) + 1.0, &[0.3, 0.2, 0.0], 1e-4).unwrap();
        assert!((v - libm::sin(0.6) - 1.0).abs() < 1e-3);
        // whole-disk mass of Φ decreases with t once the Gaussian leaves Ω
        let a = initial_potential(&d, |_| 1.0, &[0.0; 3], 0.05).unwrap();
        let b = initial_potential(&d, |_| 1.0, &[0.0; 3], 0.5).unwrap();
        assert!((a - (1.0 - libm::exp(-1.0 / 0.2))).abs() < 1e-10 && b < a);
        assert!(initial_trace_limit(&d, |_| 1.0, &[1.0, 0.0, 0.0], &[1e-4, 1e-3]).is_err());
        assert!(initial_potential(&d, |_| 1.0, &[1.5, 0.0, 0.0], 0.1).is_err());
    }

    #[test]
    fn boundary_formula_returns_the_bie_trace() {
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
        let report = solve_nonlinear_bie(&cfg).unwrap();
        let tr = SolutionTrace::from_nonlinear(&cfg, &report).unwrap();
        let m = report.levels_completed / 2;
        for i in 0..32 {
            let rep = boundary_representation_at(&tr, i, m).unwrap();
            assert!((rep.value / tr.value(i, m) - 1.0).abs() < 1e-6);
        }
        // interior values approach the trace along the normal
        let t = m as f64 * report.dt;
        let x0 = tr.quadrature().nodes[24];
        let far = interior_representation(&tr, &[0.7 * x0[0], 0.7 * x0[1], 0.0], t).unwrap().value;
        let near = interior_representation(&tr, &[0.8 * x0[0], 0.8 * x0[1], 0.0], t).unwrap().value;
        let target = tr.value(24, m);
        assert!(math::abs(near - target) < math::abs(far - target));
        assert!(math::abs(near / target - 1.0) < 1e-2);
    }

    #[test]
    fn manufactured_trace_is_reproduced() {
        // u = Φ(x − (1.5, 0), t + 0.1) with its exact trace and flux
        let d = Domain::unit_disk();
        let part = partition_boundary(&d, 0.0, Placement::default_for(&d)).unwrap();
        let u = |x: &Point, t: f64| heat((x[0] - 1.5) * (x[0] - 1.5) + x[1] * x[1], t + 0.1, 2);
        let g = move |x: &Point, t: f64| (-(x[0] - 1.5) * x[0] - x[1] * x[1]) / (2.0 * (t + 0.1)) * u(x, t);
        let (nodes, levels) = (32, 50);
        let q = boundary_quadrature(&d, &part, nodes).unwrap();
        let dt = 0.5 / levels as f64;
        let sample = |f: &dyn Fn(&Point, f64) -> f64| -> Vec<Vec<f64>> {
            (0..=levels).map(|l| q.nodes.iter().map(|x| f(x, l as f64 * dt)).collect()).collect()
        };
        let tr = SolutionTrace::new(&d, &part, dt, sample(&u), move |x| u(x, 0.0), TraceFlux::Given(sample(&g))).unwrap();
        for x in [[0.0, 0.0, 0.0], [0.5, 0.0, 0.0], [-0.5, 0.3, 0.0]] {
            let v = interior_representation(&tr, &x, 0.5).unwrap().value;
            assert!((v / u(&x, 0.5) - 1.0).abs() < 2e-2);
        }
    }
}
