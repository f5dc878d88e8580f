//! One-dimensional rules used by the kernel and layer-potential code.

use alloc::vec::Vec;

use crate::geometry::{tangential_axes, Domain, Point, Shape};
use crate::math::{self, PI};
use crate::{Error, Result};

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on P_n from the Chebyshev guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = alloc::vec![0.0; n];
        let mut weights = alloc::vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = math::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                let dx = p / d;
                x -= dx;
                if math::abs(dx) < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// ∫_a^b f.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(c + r * x);
        }
        s * r
    }

    /// Nodes and weights mapped to [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (c + r * x, w * r))
    }

    /// ∫_a^b f with the rule applied on `pieces` equal sub-intervals.
    pub fn composite<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, pieces: usize, mut f: F) -> f64 {
        let pieces = pieces.max(1);
        let step = (b - a) / pieces as f64;
        (0..pieces)
            .map(|i| {
                let lo = a + i as f64 * step;
                self.integrate(lo, lo + step, &mut f)
            })
            .sum()
    }

    /// ∫_a^b f for f singular (integrably) at `a`: substitute s = a + (b−a)u^p.
    pub fn graded<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, p: f64, mut f: F) -> f64 {
        let len = b - a;
        self.integrate(0.0, 1.0, |u| {
            let up = math::pow(u, p - 1.0);
            p * len * up * f(a + len * up * u)
        })
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

const KRONROD_X: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const KRONROD_W: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GAUSS7_W: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod15<F: FnMut(f64) -> f64>(a: f64, b: f64, f: &mut F) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let fc = f(c);
    let mut k = KRONROD_W[7] * fc;
    let mut g = GAUSS7_W[3] * fc;
    for i in 0..7 {
        let dx = r * KRONROD_X[i];
        let s = f(c - dx) + f(c + dx);
        k += KRONROD_W[i] * s;
        if i % 2 == 1 {
            g += GAUSS7_W[i / 2] * s;
        }
    }
    (k * r, math::abs((k - g) * r))
}

/// Adaptive Gauss–Kronrod (7/15) on [a, b] with breakpoints.
///
/// Fails with `UnresolvedQuadrature` when the error estimate stays above
/// `tol` after `max_intervals` subdivisions.
pub fn adaptive<F: FnMut(f64) -> f64>(mut f: F, breaks: &[f64], tol: f64, max_intervals: usize) -> Result<f64> {
    let mut work: Vec<(f64, f64, f64, f64)> = Vec::new();
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let (v, e) = kronrod15(w[0], w[1], &mut f);
            work.push((w[0], w[1], v, e));
        }
    }
    loop {
        let total_err: f64 = work.iter().map(|w| w.3).sum();
        if total_err <= tol {
            break;
        }
        if work.len() >= max_intervals {
            return Err(Error::UnresolvedQuadrature(alloc::format!(
                "error estimate {total_err:.3e} above {tol:.3e} after {} intervals",
                work.len()
            )));
        }
        let (i, _) = work
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (a, b, _, _) = work.swap_remove(i);
        let m = 0.5 * (a + b);
        let (v1, e1) = kronrod15(a, m, &mut f);
        let (v2, e2) = kronrod15(m, b, &mut f);
        work.push((a, m, v1, e1));
        work.push((m, b, v2, e2));
    }
    Ok(work.iter().map(|w| w.2).sum())
}

const MAX_INTERVALS: usize = 4000;

/// [`adaptive`] after the substitution s = w(u), w(u) = u^p/(u^p + (1−u)^p),
/// on every break interval. An endpoint singularity |s|^{−a} becomes
/// u^{p(1−a)−1}; p = 1 is the identity.
pub fn adaptive_graded<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    tol: f64,
    max_intervals: usize,
    p: f64,
) -> Result<f64> {
    if p == 1.0 {
        return adaptive(f, breaks, tol, max_intervals);
    }
    let pieces = breaks.windows(2).filter(|w| w[1] > w[0]).count().max(1);
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (a, len) = (w[0], w[1] - w[0]);
        if len <= 0.0 {
            continue;
        }
        total += adaptive(
            |u| {
                let (up, vp) = (math::pow(u, p), math::pow(1.0 - u, p));
                let den = up + vp;
                let jac = p * math::pow(u * (1.0 - u), p - 1.0) / (den * den);
                len * jac * f(a + len * up / den)
            },
            &[0.0, 1.0],
            tol / pieces as f64,
            max_intervals,
        )?;
    }
    Ok(total)
}

/// ∫_{∂Ω} f dS by adaptive quadrature on the boundary parametrization.
///
/// `foci` are points where `f` is peaked or singular; they become
/// breakpoints. `tol` is an absolute target.
pub fn surface_integral<F: FnMut(&Point) -> f64>(domain: &Domain, f: F, foci: &[Point], tol: f64) -> Result<f64> {
    surface_integral_graded(domain, f, foci, tol, 1.0)
}

/// [`surface_integral`] with every 1-D pass graded towards its breakpoints
/// (see [`adaptive_graded`]).
pub fn surface_integral_graded<F: FnMut(&Point) -> f64>(
    domain: &Domain,
    mut f: F,
    foci: &[Point],
    tol: f64,
    p: f64,
) -> Result<f64> {
    let adaptive = |g: &mut dyn FnMut(f64) -> f64, b: &[f64], tol: f64, m: usize| adaptive_graded(g, b, tol, m, p);
    let c = domain.center();
    match domain.shape() {
        Shape::Disk { radius } => {
            let base = foci.first().map(|p| math::atan2(p[1] - c[1], p[0] - c[0])).unwrap_or(0.0);
            let mut breaks = alloc::vec![base, base + 2.0 * PI];
            for p in foci.iter().skip(1) {
                let mut a = math::atan2(p[1] - c[1], p[0] - c[0]);
                while a <= base {
                    a += 2.0 * PI;
                }
                while a > base + 2.0 * PI {
                    a -= 2.0 * PI;
                }
                breaks.push(a);
            }
            sort_breaks(&mut breaks);
            adaptive(&mut |th| radius * f(&domain.circle_point(th)), &breaks, tol, MAX_INTERVALS)
        }
        Shape::Ball { radius } => {
            let axis = foci.first().map(|p| [p[0] - c[0], p[1] - c[1], p[2] - c[2]]).unwrap_or([0.0, 0.0, 1.0]);
            let (e1, e2, e3) = frame(axis);
            let coords = |p: &Point| {
                let d = [p[0] - c[0], p[1] - c[1], p[2] - c[2]];
                let z = math::dot(&d, &e3) / radius;
                let th = libm::acos(z.clamp(-1.0, 1.0));
                let ph = math::atan2(math::dot(&d, &e2), math::dot(&d, &e1));
                (th, if ph < 0.0 { ph + 2.0 * PI } else { ph })
            };
            let mut tb = alloc::vec![0.0, PI];
            let mut pb = alloc::vec![0.0, 2.0 * PI];
            for p in foci.iter().skip(1) {
                let (th, ph) = coords(p);
                tb.push(th);
                pb.push(ph);
            }
            sort_breaks(&mut tb);
            sort_breaks(&mut pb);
            let mut err = None;
            let v = adaptive(
                &mut |th| {
                    let (st, ct) = (math::sin(th), math::cos(th));
                    let inner = adaptive(
                        &mut |ph| {
                            let (sp, cp) = (math::sin(ph), math::cos(ph));
                            let mut y = c;
                            for k in 0..3 {
                                y[k] += radius * (st * cp * e1[k] + st * sp * e2[k] + ct * e3[k]);
                            }
                            f(&y)
                        },
                        &pb,
                        tol * 1e-2,
                        MAX_INTERVALS,
                    );
                    match inner {
                        Ok(v) => radius * radius * st * v,
                        Err(e) => {
                            err.get_or_insert(e);
                            0.0
                        }
                    }
                },
                &tb,
                tol,
                MAX_INTERVALS,
            )?;
            match err {
                Some(e) => Err(e),
                None => Ok(v),
            }
        }
        Shape::Rectangle { .. } | Shape::Box { .. } => {
            let dim = domain.dim();
            let lo = domain.lower_corner();
            let ext = domain.extents();
            let mut total = 0.0;
            let mut err = None;
            for axis in 0..dim {
                for upper in [false, true] {
                    let tang = tangential_axes(dim, axis);
                    let breaks: [Vec<f64>; 2] = core::array::from_fn(|slot| match tang[slot] {
                        Some(a) => {
                            let mut b = alloc::vec![lo[a], lo[a] + ext[a]];
                            b.extend(foci.iter().map(|p| p[a]).filter(|&v| v > lo[a] && v < lo[a] + ext[a]));
                            sort_breaks(&mut b);
                            b
                        }
                        None => Vec::new(),
                    });
                    let mut base = c;
                    base[axis] = if upper { lo[axis] + ext[axis] } else { lo[axis] };
                    let a0 = tang[0].expect("every face has a tangential axis");
                    let v = match tang[1] {
                        None => adaptive(
                            &mut |s| {
                                let mut y = base;
                                y[a0] = s;
                                f(&y)
                            },
                            &breaks[0],
                            tol / (2 * dim) as f64,
                            MAX_INTERVALS,
                        )?,
                        Some(a1) => adaptive(
                            &mut |s| {
                                let inner = adaptive(
                                    &mut |r| {
                                        let mut y = base;
                                        y[a0] = s;
                                        y[a1] = r;
                                        f(&y)
                                    },
                                    &breaks[1],
                                    tol * 1e-2,
                                    MAX_INTERVALS,
                                );
                                inner.unwrap_or_else(|e| {
                                    err.get_or_insert(e);
                                    0.0
                                })
                            },
                            &breaks[0],
                            tol / (2 * dim) as f64,
                            MAX_INTERVALS,
                        )?,
                    };
                    total += v;
                }
            }
            match err {
                Some(e) => Err(e),
                None => Ok(total),
            }
        }
    }
}

fn sort_breaks(b: &mut Vec<f64>) {
    b.sort_by(f64::total_cmp);
    b.dedup_by(|x, y| math::abs(*x - *y) < 1e-14);
}

/// Orthonormal frame with third vector along `axis`.
fn frame(axis: [f64; 3]) -> ([f64; 3], [f64; 3], [f64; 3]) {
    let norm = math::sqrt(math::dot(&axis, &axis));
    let e3 = if norm > 0.0 { [axis[0] / norm, axis[1] / norm, axis[2] / norm] } else { [0.0, 0.0, 1.0] };
    let helper = if math::abs(e3[0]) < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let d = math::dot(&helper, &e3);
    let mut e1 = [helper[0] - d * e3[0], helper[1] - d * e3[1], helper[2] - d * e3[2]];
    let n1 = math::sqrt(math::dot(&e1, &e1));
    for v in &mut e1 {
        *v /= n1;
    }
    let e2 = [e3[1] * e1[2] - e3[2] * e1[1], e3[2] * e1[0] - e3[0] * e1[2], e3[0] * e1[1] - e3[1] * e1[0]];
    (e1, e2, e3)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_is_exact_for_polynomials() {
        for n in [1, 2, 5, 8, 16, 33] {
            let g = GaussLegendre::new(n);
            let sw: f64 = g.weights.iter().sum();
            assert!((sw - 2.0).abs() < 1e-13, "n={n}");
            let deg = 2 * n - 1;
            let v = g.integrate(0.0, 1.0, |x| x.powi(deg as i32));
            assert!((v - 1.0 / (deg as f64 + 1.0)).abs() < 1e-13, "n={n}: {v}");
        }
    }

    #[test]
    fn graded_rule_handles_endpoint_singularities() {
        let g = GaussLegendre::new(16);
        // ∫_0^1 x^{-1/2} = 2, ∫_0^1 ln x = -1
        assert!((g.graded(0.0, 1.0, 4.0, |x| 1.0 / x.sqrt()) - 2.0).abs() < 1e-10);
        assert!((g.graded(0.0, 1.0, 4.0, f64::ln) + 1.0).abs() < 1e-8);
    }

    #[test]
    fn adaptive_resolves_a_narrow_peak() {
        let eps: f64 = 1e-3;
        let f = |x: f64| (-(x * x) / (eps * eps)).exp();
        let v = adaptive(f, &[-1.0, 1.0], 1e-12, 500).unwrap();
        assert!((v - eps * PI.sqrt()).abs() < 1e-11);
        assert!(matches!(adaptive(f, &[-1.0, 1.0], 1e-30, 4), Err(Error::UnresolvedQuadrature(_))));
    }

    #[test]
    fn surface_integrals_of_simple_functions() {
        let disk = Domain::unit_disk();
        let v = surface_integral(&disk, |y| y[0] * y[0], &[[1.0, 0.0, 0.0]], 1e-12).unwrap();
        assert!((v - PI).abs() < 1e-10);
        let sq = Domain::unit_square();
        let v = surface_integral(&sq, |y| y[0].powi(4), &[], 1e-12).unwrap();
        assert!((v - 1.4).abs() < 1e-10);
        let ball = Domain::ball(2.0).unwrap();
        let v = surface_integral(&ball, |_| 1.0, &[[0.0, 2.0, 0.0]], 1e-10).unwrap();
        assert!((v - 16.0 * PI).abs() < 1e-8);
        let v = surface_integral(&ball, |y| y[2] * y[2], &[[2.0, 0.0, 0.0]], 1e-10).unwrap();
        assert!((v - 4.0 * PI * 16.0 / 3.0).abs() < 1e-8);
        let cube = Domain::unit_cube();
        let v = surface_integral(&cube, |y| y[0] * y[1], &[[0.5, 0.5, 0.0]], 1e-10).unwrap();
        // faces x=1, y=1 contribute 1/2 each, z faces 1/4 each, x=0 and y=0 nothing
        assert!((v - 1.5).abs() < 1e-9, "{v}");
    }
}
