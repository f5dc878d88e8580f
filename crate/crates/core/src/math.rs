//! Thin float helpers routed through `libm` so the crate builds without std.

pub(crate) use libm::{atan2, cos, exp, fabs as abs, log as ln, pow, sin, sqrt};

pub(crate) const PI: f64 = core::f64::consts::PI;

/// `x mod p` in `[0, p)`.
#[inline]
pub(crate) fn rem_euclid(x: f64, p: f64) -> f64 {
    let r = libm::fmod(x, p);
    if r < 0.0 {
        r + p
    } else {
        r
    }
}

#[inline]
pub(crate) fn powi(x: f64, n: u32) -> f64 {
    let mut acc = 1.0;
    for _ in 0..n {
        acc *= x;
    }
    acc
}

/// Exponent `q` with a fast path for small integers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Exponent {
    Int(u32),
    Real(f64),
}

impl Exponent {
    pub(crate) fn new(q: f64) -> Self {
        if libm::trunc(q) == q && q >= 0.0 && q <= 16.0 {
            Exponent::Int(q as u32)
        } else {
            Exponent::Real(q)
        }
    }

    #[inline]
    pub(crate) fn apply(self, x: f64) -> f64 {
        match self {
            Exponent::Int(n) => powi(x, n),
            Exponent::Real(q) => {
                if x <= 0.0 {
                    0.0
                } else {
                    pow(x, q)
                }
            }
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Γ(x) for x > 0.
pub(crate) fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// Least-squares slope and intercept of `y` against `x`.
pub(crate) fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Lower incomplete gamma γ(s, z) by its power series (s > 0).
fn lower_series(s: f64, z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    let mut term = 1.0 / s;
    let mut sum = term;
    let mut k = 1.0;
    while k < 1000.0 {
        term *= z / (s + k);
        sum += term;
        if term.abs() < sum.abs() * 1e-17 {
            break;
        }
        k += 1.0;
    }
    sum * exp(s * ln(z) - z)
}

/// Upper incomplete gamma Γ(s, z) by Lentz's continued fraction (z > s + 1, s ≥ 0).
fn upper_fraction(s: f64, z: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = z + 1.0 - s;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    let mut i = 1.0;
    while i < 1000.0 {
        let an = -i * (i - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
        i += 1.0;
    }
    exp(s * ln(z) - z) * h
}

/// E1(z) = Γ(0, z) for z > 0; zero past the underflow guard.
pub(crate) fn exp_integral_e1(z: f64) -> f64 {
    if z > 700.0 {
        0.0
    } else if z <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        let mut k = 1.0;
        while k < 200.0 {
            term *= -z / k;
            let add = term / k;
            sum += add;
            if add.abs() < 1e-17 {
                break;
            }
            k += 1.0;
        }
        -EULER_GAMMA - ln(z) - sum
    } else {
        upper_fraction(0.0, z)
    }
}

/// γ(s, za) − γ(s, zb) for za ≥ zb ≥ 0, s > 0; `za` may be infinite.
pub(crate) fn lower_gamma_difference(s: f64, za: f64, zb: f64) -> f64 {
    let upper = |z: f64| if z.is_infinite() { 0.0 } else { upper_fraction(s, z) };
    if zb > s + 1.0 {
        upper(zb) - upper(za)
    } else if za > s + 1.0 {
        gamma(s) - upper(za) - lower_series(s, zb)
    } else {
        lower_series(s, za) - lower_series(s, zb)
    }
}
