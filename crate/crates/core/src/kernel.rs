//! The free-space heat kernel Φ, its gradient and time integrals, and
//! numeric checks of the boundary-integral estimates built on it.

use alloc::format;
use alloc::vec::Vec;

use crate::geometry::{Domain, Point, Shape};
use crate::math::{self, PI};
use crate::quadrature::{surface_integral, surface_integral_graded, GaussLegendre};
use crate::{Error, Result};

/// Values of `|x|²/4t` beyond this give exactly zero.
pub const UNDERFLOW_EXPONENT: f64 = 700.0;

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("heat kernel needs t > 0, got {t}")))
    }
}

/// Φ in dimension `n` from the squared distance; no argument checks.
#[inline]
pub fn heat(r2: f64, t: f64, n: usize) -> f64 {
    let e = r2 / (4.0 * t);
    if e > UNDERFLOW_EXPONENT {
        return 0.0;
    }
    let norm = match n {
        1 => 1.0 / math::sqrt(4.0 * PI * t),
        2 => 1.0 / (4.0 * PI * t),
        3 => {
            let s = 4.0 * PI * t;
            1.0 / (s * math::sqrt(s))
        }
        _ => math::pow(4.0 * PI * t, -(n as f64) / 2.0),
    };
    norm * math::exp(-e)
}

/// (4πt)^{−n/2} exp(−|x|²/4t), with n = `x.len()`.
pub fn phi(x: &[f64], t: f64) -> Result<f64> {
    check_time(t)?;
    Ok(heat(math::dot(x, x), t, x.len()))
}

/// DΦ(x, t) = −x/(2t) Φ(x, t).
pub fn grad_phi(x: &[f64], t: f64) -> Result<Vec<f64>> {
    let p = phi(x, t)?;
    Ok(x.iter().map(|xi| -xi / (2.0 * t) * p).collect())
}

/// ∫_a^b Φ(r, σ) dσ for 0 ≤ a < b; `a = 0` allowed.
///
/// Infinite when r = 0 and a = 0 (n ≥ 2).
pub fn single_layer_time_integral(r2: f64, a: f64, b: f64, n: usize) -> f64 {
    debug_assert!(0.0 <= a && a < b);
    let c = 0.25 * r2;
    if c == 0.0 {
        if a == 0.0 {
            return f64::INFINITY;
        }
        return match n {
            2 => math::ln(b / a) / (4.0 * PI),
            _ => {
                let k = n as f64 / 2.0;
                math::pow(4.0 * PI, -k) * (math::pow(a, 1.0 - k) - math::pow(b, 1.0 - k)) / (k - 1.0)
            }
        };
    }
    let za = if a == 0.0 { f64::INFINITY } else { c / a };
    let zb = c / b;
    match n {
        2 => (math::exp_integral_e1(zb) - if za.is_infinite() { 0.0 } else { math::exp_integral_e1(za) }) / (4.0 * PI),
        _ => {
            let s = n as f64 / 2.0 - 1.0;
            math::pow(4.0 * PI, -(n as f64) / 2.0) * math::pow(c, -s) * math::lower_gamma_difference(s, za, zb)
        }
    }
}

/// G with ∫_a^b DΦ(z, σ) dσ = −z·G(|z|², a, b).
pub fn gradient_time_factor(r2: f64, a: f64, b: f64, n: usize) -> f64 {
    debug_assert!(0.0 <= a && a < b);
    let k = n as f64 / 2.0;
    let pre = 0.5 * math::pow(4.0 * PI, -k);
    let c = 0.25 * r2;
    if c == 0.0 {
        if a == 0.0 {
            return f64::INFINITY;
        }
        return pre * (math::pow(a, -k) - math::pow(b, -k)) / k;
    }
    let zb = c / b;
    if n == 2 {
        if zb > UNDERFLOW_EXPONENT {
            return 0.0;
        }
        // e^{−zb} − e^{−za} without cancellation
        let diff = if a == 0.0 { math::exp(-zb) } else { -math::exp(-zb) * libm::expm1(-(c / a - zb)) };
        return pre * diff / c;
    }
    let za = if a == 0.0 { f64::INFINITY } else { c / a };
    pre * math::pow(c, -k) * math::lower_gamma_difference(k, za, zb)
}

/// Shape of the boundary-kernel singularity: σ^{−3/4} r^{−(n−3/2)}.
pub fn kernel_majorant(r: f64, sigma: f64, n: usize) -> f64 {
    math::pow(sigma, -0.75) * math::pow(r, -(n as f64 - 1.5))
}

/// ∫_{ℝⁿ} Φ(x, t) dx by tensor Gauss quadrature on a box of half-width 14√t.
pub fn phi_mass(n: usize, t: f64) -> Result<f64> {
    check_time(t)?;
    if !(1..=3).contains(&n) {
        return Err(Error::InvalidParameter(format!("dimension {n} not supported")));
    }
    let half = 14.0 * math::sqrt(t);
    let g = GaussLegendre::new(20);
    let pieces = 8;
    let step = 2.0 * half / pieces as f64;
    let mut axis = Vec::with_capacity(pieces * g.len());
    for p in 0..pieces {
        let lo = -half + p as f64 * step;
        axis.extend(g.mapped(lo, lo + step));
    }
    let mut total = 0.0;
    let mut idx = [0usize; 3];
    let count = axis.len();
    loop {
        let mut r2 = 0.0;
        let mut w = 1.0;
        for &i in &idx[..n] {
            r2 += axis[i].0 * axis[i].0;
            w *= axis[i].1;
        }
        total += w * heat(r2, t, n);
        let mut d = 0;
        loop {
            idx[d] += 1;
            if idx[d] < count {
                break;
            }
            idx[d] = 0;
            d += 1;
            if d == n {
                return Ok(total);
            }
        }
    }
}

fn on_boundary(domain: &Domain, x: &Point, what: &str) -> Result<()> {
    let tol = 1e-9 * domain.inradius().max(1.0);
    if math::abs(domain.boundary_distance(x)) > tol {
        return Err(Error::InvalidParameter(format!("{what} is not on the boundary")));
    }
    Ok(())
}

/// t^{−(n−1)/2} ∫_{∂Ω} exp(−|x−y|²/4t) dS_y.
pub fn surface_heat_integral(domain: &Domain, x: &Point, t: f64) -> Result<f64> {
    check_time(t)?;
    on_boundary(domain, x, "x")?;
    let n = domain.dim();
    let scale = math::pow(t, (n as f64 - 1.0) / 2.0);
    let tol = 1e-10 * scale.min(domain.boundary_measure());
    let raw = surface_integral(
        domain,
        |y| {
            let e = math::dist2(&x[..n], &y[..n]) / (4.0 * t);
            if e > UNDERFLOW_EXPONENT {
                0.0
            } else {
                math::exp(-e)
            }
        },
        &[*x],
        tol,
    )?;
    Ok(raw / scale)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceHeatScan {
    pub sup: f64,
    pub t_at_sup: f64,
    /// `(t, max over points)` per sampled time.
    pub by_time: Vec<(f64, f64)>,
}

/// Supremum of [`surface_heat_integral`] over a sample grid.
pub fn surface_heat_scan(domain: &Domain, points: &[Point], times: &[f64]) -> Result<SurfaceHeatScan> {
    let mut scan = SurfaceHeatScan { sup: f64::NEG_INFINITY, t_at_sup: f64::NAN, by_time: Vec::new() };
    for &t in times {
        let mut best = f64::NEG_INFINITY;
        for x in points {
            best = best.max(surface_heat_integral(domain, x, t)?);
        }
        if best > scan.sup {
            scan.sup = best;
            scan.t_at_sup = t;
        }
        scan.by_time.push((t, best));
    }
    Ok(scan)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeomDefect {
    /// (x − y)·n(x)
    pub defect: f64,
    /// |(x − y)·n(x)| / |x − y|²
    pub ratio: f64,
}

pub fn geom_defect(domain: &Domain, x: &Point, y: &Point) -> Result<GeomDefect> {
    let n = domain.dim();
    let r2 = math::dist2(&x[..n], &y[..n]);
    if r2 == 0.0 {
        return Err(Error::InvalidParameter("geometric defect needs x != y".into()));
    }
    on_boundary(domain, y, "y")?;
    let nx = domain.normal(x)?;
    let d: Vec<f64> = (0..n).map(|a| x[a] - y[a]).collect();
    let defect = math::dot(&d, &nx[..n]);
    Ok(GeomDefect { defect, ratio: math::abs(defect) / r2 })
}

/// ∫_{∂Ω} |x−y|^{−a} |y−z|^{−b} dS_y by adaptive quadrature graded at x and z.
pub fn singular_surface_integral(domain: &Domain, x: &Point, z: &Point, a: f64, b: f64) -> Result<f64> {
    let n = domain.dim();
    let limit = n as f64 - 1.0;
    for (v, name) in [(a, "a"), (b, "b")] {
        if !(0.0..limit).contains(&v) {
            return Err(Error::InvalidParameter(format!("exponent {name} = {v} outside [0, {limit})")));
        }
    }
    on_boundary(domain, x, "x")?;
    on_boundary(domain, z, "z")?;
    let sep2 = math::dist2(&x[..n], &z[..n]);
    if sep2 == 0.0 && a + b >= limit {
        return Err(Error::InvalidParameter("x = z makes the integral diverge".into()));
    }
    // the value grows like |x−z|^{n−1−a−b} when a + b > n − 1
    let magnitude = math::pow(sep2.max(1e-300), 0.5 * (limit - a - b)).max(1.0);
    let p = libm::ceil(2.0 / (limit - a.max(b))).clamp(1.0, 40.0);
    if n == 2 {
        let tol = 1e-9 * domain.boundary_measure() * magnitude;
        return singular_curve_integral(domain, x, z, a, b, tol, p);
    }
    let tol = 1e-6 * domain.boundary_measure() * magnitude;
    surface_integral_graded(
        domain,
        |y| {
            let rx = math::dist2(&x[..n], &y[..n]);
            let rz = math::dist2(&z[..n], &y[..n]);
            if rx == 0.0 || rz == 0.0 {
                // only reachable through rounding at a breakpoint
                return 0.0;
            }
            math::pow(rx, -0.5 * a) * math::pow(rz, -0.5 * b)
        },
        &[*x, *z],
        tol,
        p,
    )
}

/// Closed plane curve parametrized by arc length (angle for the circle).
enum Curve {
    Circle { c: Point, r: f64 },
    Rect { lo: Point, w: f64, h: f64 },
}

impl Curve {
    fn new(domain: &Domain) -> Self {
        match domain.shape() {
            Shape::Disk { radius } => Curve::Circle { c: domain.center(), r: radius },
            _ => {
                let e = domain.extents();
                Curve::Rect { lo: domain.lower_corner(), w: e[0], h: e[1] }
            }
        }
    }

    fn period(&self) -> f64 {
        match *self {
            Curve::Circle { .. } => 2.0 * PI,
            Curve::Rect { w, h, .. } => 2.0 * (w + h),
        }
    }

    /// dS per unit parameter.
    fn speed(&self) -> f64 {
        match *self {
            Curve::Circle { r, .. } => r,
            Curve::Rect { .. } => 1.0,
        }
    }

    fn corners(&self) -> Vec<f64> {
        match *self {
            Curve::Circle { .. } => Vec::new(),
            Curve::Rect { w, h, .. } => alloc::vec![0.0, w, w + h, 2.0 * w + h],
        }
    }

    fn point(&self, s: f64) -> Point {
        let s = math::rem_euclid(s, self.period());
        match *self {
            Curve::Circle { c, r } => [c[0] + r * math::cos(s), c[1] + r * math::sin(s), 0.0],
            Curve::Rect { lo, w, h } => {
                if s <= w {
                    [lo[0] + s, lo[1], 0.0]
                } else if s <= w + h {
                    [lo[0] + w, lo[1] + s - w, 0.0]
                } else if s <= 2.0 * w + h {
                    [lo[0] + w - (s - w - h), lo[1] + h, 0.0]
                } else {
                    [lo[0], lo[1] + h - (s - 2.0 * w - h), 0.0]
                }
            }
        }
    }

    fn param(&self, p: &Point) -> f64 {
        match *self {
            Curve::Circle { c, .. } => math::rem_euclid(math::atan2(p[1] - c[1], p[0] - c[0]), 2.0 * PI),
            Curve::Rect { lo, w, h } => {
                let (u, v) = (p[0] - lo[0], p[1] - lo[1]);
                let tol = 1e-9 * (w + h);
                if math::abs(v) <= tol {
                    u
                } else if math::abs(u - w) <= tol {
                    w + v
                } else if math::abs(v - h) <= tol {
                    w + h + (w - u)
                } else {
                    2.0 * w + h + (h - v)
                }
            }
        }
    }

    /// Distance between the points at parameters s and s + off, exact for
    /// small |off| (no corner in between).
    fn chord(&self, off: f64) -> f64 {
        match *self {
            Curve::Circle { r, .. } => 2.0 * r * math::abs(math::sin(0.5 * off)),
            Curve::Rect { .. } => math::abs(off),
        }
    }
}

fn singular_curve_integral(domain: &Domain, x: &Point, z: &Point, a: f64, b: f64, tol: f64, p: f64) -> Result<f64> {
    let curve = Curve::new(domain);
    let period = curve.period();
    let sx = curve.param(x);
    let sz = curve.param(z);
    let shift = |s: f64| {
        let mut v = math::rem_euclid(s - sx, period);
        if period - v < 1e-14 {
            v = 0.0;
        }
        sx + v
    };
    let mut breaks = alloc::vec![sx, sx + period, shift(sz)];
    breaks.extend(curve.corners().into_iter().map(shift));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|u, v| math::abs(*u - *v) < 1e-14);
    let sz = shift(sz);
    let foci = [(sx, sx + period, a, x), (sz, sz, b, z)];
    let pieces = (breaks.len() - 1) as f64;
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (s0, s1) = (w[0], w[1]);
        let len = s1 - s0;
        total += crate::quadrature::adaptive(
            |u| {
                let (up, vp) = (math::pow(u, p), math::pow(1.0 - u, p));
                let den = up + vp;
                let jac = p * math::pow(u * (1.0 - u), p - 1.0) / (den * den);
                // offset measured from the nearer end keeps full precision
                let (anchor, off) = if u <= 0.5 { (s0, len * up / den) } else { (s1, -len * vp / den) };
                let y = curve.point(anchor + off);
                let mut val = 1.0;
                for &(f0, f1, e, q) in &foci {
                    if e == 0.0 {
                        continue;
                    }
                    let d = if anchor == f0 || anchor == f1 {
                        curve.chord(off)
                    } else {
                        math::sqrt(math::dist2(&q[..2], &y[..2]))
                    };
                    val *= math::pow(d, -e);
                }
                len * jac * curve.speed() * val
            },
            &[0.0, 1.0],
            tol / pieces,
            4000,
        )?;
    }
    Ok(total)
}

/// Boundary point at arc distance `s` from `x` (along the boundary).
fn boundary_neighbor(domain: &Domain, x: &Point, s: f64) -> Result<Point> {
    let c = domain.center();
    match domain.shape() {
        Shape::Disk { radius } => {
            let th = math::atan2(x[1] - c[1], x[0] - c[0]);
            Ok(domain.circle_point(th + s / radius))
        }
        Shape::Ball { radius } => {
            let u = [(x[0] - c[0]) / radius, (x[1] - c[1]) / radius, (x[2] - c[2]) / radius];
            let helper = if math::abs(u[2]) < 0.9 { [0.0, 0.0, 1.0] } else { [1.0, 0.0, 0.0] };
            let d = math::dot(&helper, &u);
            let mut v = [helper[0] - d * u[0], helper[1] - d * u[1], helper[2] - d * u[2]];
            let nv = math::sqrt(math::dot(&v, &v));
            v.iter_mut().for_each(|e| *e /= nv);
            let ang = s / radius;
            let (sn, cs) = (math::sin(ang), math::cos(ang));
            Ok(core::array::from_fn(|k| c[k] + radius * (cs * u[k] + sn * v[k])))
        }
        Shape::Rectangle { .. } | Shape::Box { .. } => {
            let nrm = domain.normal(x)?;
            let axis = (0..domain.dim()).find(|&k| nrm[k] != 0.0).expect("face normal");
            let along = (0..domain.dim()).find(|&k| k != axis).expect("tangential axis");
            let lo = domain.lower_corner()[along];
            let hi = lo + domain.extents()[along];
            let mut z = *x;
            z[along] = if x[along] + s < hi { x[along] + s } else { x[along] - s };
            if z[along] <= lo {
                return Err(Error::InvalidParameter("separation larger than the face".into()));
            }
            Ok(z)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularSample {
    pub separation: f64,
    pub value: f64,
    /// value · |x−z|^{a+b−(n−1)}; bounded when a + b > n − 1.
    pub scaled: f64,
}

/// [`singular_surface_integral`] at dyadic separations `s0·2^{−k}`, k < levels.
pub fn singular_ratio_scan(domain: &Domain, x: &Point, a: f64, b: f64, s0: f64, levels: usize) -> Result<Vec<SingularSample>> {
    let n = domain.dim();
    let excess = a + b - (n as f64 - 1.0);
    (0..levels)
        .map(|k| {
            let z = boundary_neighbor(domain, x, s0 * math::pow(2.0, -(k as f64)))?;
            let separation = math::sqrt(math::dist2(&x[..n], &z[..n]));
            let value = singular_surface_integral(domain, x, &z, a, b)?;
            let scaled = if excess > 0.0 { value * math::pow(separation, excess) } else { value };
            Ok(SingularSample { separation, value, scaled })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_reference_values() {
        assert!((phi(&[0.0, 0.0], 1.0 / (4.0 * PI)).unwrap() - 1.0).abs() < 1e-14);
        let t: f64 = 0.3;
        for n in 1..=3 {
            let mut x = alloc::vec![0.0; n];
            x[0] = 2.0 * t.sqrt();
            let expect = (-1.0f64).exp() * (4.0 * PI * t).powf(-(n as f64) / 2.0);
            assert!((phi(&x, t).unwrap() - expect).abs() < 1e-14);
        }
        assert_eq!(phi(&[100.0, 0.0], 1e-3).unwrap(), 0.0);
        assert!(phi(&[0.0], 0.0).is_err());
        assert!(grad_phi(&[0.0], -1.0).is_err());
        let g = grad_phi(&[1.0, 0.0], 0.5).unwrap();
        assert!((g[0] + phi(&[1.0, 0.0], 0.5).unwrap()).abs() < 1e-15 && g[1] == 0.0);
    }

    #[test]
    fn phi_is_normalized() {
        for n in 1..=3 {
            for t in [0.1, 1.0] {
                let m = phi_mass(n, t).unwrap();
                assert!((m - 1.0).abs() < 1e-8, "n={n} t={t}: {m}");
            }
        }
    }

    fn quad_time(r2: f64, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        // in log σ; below σ = r²/240 the integrand is under e^{-60}
        let lo = a.max(r2 / 240.0).ln();
        let g = GaussLegendre::new(40);
        g.composite(lo, b.ln(), 64, |w| w.exp() * f(w.exp()))
    }

    #[test]
    fn time_integrals_match_direct_quadrature() {
        for n in [2, 3] {
            for &(r2, a, b) in &[(0.04, 0.0, 0.01), (0.5, 0.002, 0.3), (1e-6, 0.0, 0.5), (2.0, 0.1, 0.2), (0.01, 1e-3, 2e-3)] {
                let s = quad_time(r2, a, b, |s| heat(r2, s, n));
                let v = single_layer_time_integral(r2, a, b, n);
                assert!((v - s).abs() < 1e-9 * s.abs().max(1.0), "S n={n} r2={r2} [{a},{b}]: {v} vs {s}");
                let g = quad_time(r2, a, b, |s| heat(r2, s, n) / (2.0 * s));
                let v = gradient_time_factor(r2, a, b, n);
                assert!((v - g).abs() < 1e-8 * g.abs().max(1.0), "G n={n} r2={r2} [{a},{b}]: {v} vs {g}");
            }
        }
        assert!((single_layer_time_integral(0.0, 0.1, 0.2, 2) - 2f64.ln() / (4.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn circle_defect_is_the_curvature_identity() {
        let d = Domain::unit_disk();
        let g = geom_defect(&d, &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap();
        assert!((g.defect - 1.0).abs() < 1e-15 && (g.ratio - 0.5).abs() < 1e-15);
        assert!(geom_defect(&d, &[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]).is_err());
        let sq = Domain::unit_square();
        let g = geom_defect(&sq, &[0.2, 0.0, 0.0], &[0.7, 0.0, 0.0]).unwrap();
        assert_eq!(g.defect, 0.0);
    }

    #[test]
    fn surface_heat_integral_small_and_large_time() {
        let d = Domain::unit_disk();
        let x = [1.0, 0.0, 0.0];
        let v = surface_heat_integral(&d, &x, 1e-4).unwrap();
        assert!((v - 2.0 * PI.sqrt()).abs() < 1e-3, "{v}");
        let v = surface_heat_integral(&d, &x, 100.0).unwrap();
        assert!(v < 1.0);
        assert!(surface_heat_integral(&d, &[0.5, 0.0, 0.0], 1.0).is_err());
        // flat face of the cube: the planar limit is 4π
        let cube = Domain::unit_cube();
        let v = surface_heat_integral(&cube, &[0.5, 0.5, 0.0], 1e-4).unwrap();
        assert!((v - 4.0 * PI).abs() < 1e-6, "{v}");
    }

    #[test]
    fn singular_integral_plain_measure_and_closed_form() {
        let d = Domain::unit_disk();
        let x = [1.0, 0.0, 0.0];
        let z = [0.0, 1.0, 0.0];
        assert!((singular_surface_integral(&d, &x, &z, 0.0, 0.0).unwrap() - 2.0 * PI).abs() < 1e-10);
        // √2 B(1/2, 1/4)
        let exact = 2f64.sqrt() * math::gamma(0.5) * math::gamma(0.25) / math::gamma(0.75);
        let v = singular_surface_integral(&d, &x, &z, 0.5, 0.0).unwrap();
        assert!((v - exact).abs() < 1e-7, "{v} vs {exact}");
        let x2 = d.circle_point(2.0);
        let v2 = singular_surface_integral(&d, &x2, &z, 0.5, 0.0).unwrap();
        assert!((v - v2).abs() < 1e-7);
        assert!(singular_surface_integral(&d, &x, &z, 1.0, 0.0).is_err());
        assert!(singular_surface_integral(&d, &x, &x, 0.75, 0.75).is_err());
    }

    #[test]
    fn singular_ratio_stays_bounded() {
        let d = Domain::unit_disk();
        let scan = singular_ratio_scan(&d, &[1.0, 0.0, 0.0], 0.75, 0.75, 0.5, 12).unwrap();
        let hi = scan.iter().map(|s| s.scaled).fold(0.0, f64::max);
        let lo = scan.iter().map(|s| s.scaled).fold(f64::INFINITY, f64::min);
        assert!(hi / lo < 1.5, "{scan:?}");
        assert!(scan.last().unwrap().value > 10.0 * scan[0].value);
    }
}
