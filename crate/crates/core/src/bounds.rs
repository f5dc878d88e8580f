//! Closed-form blow-up time bounds and the empirical order estimator.

use alloc::format;
use alloc::vec::Vec;

use crate::fdm::Grid;
use crate::math;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub n: usize,
    pub q: f64,
    /// max of u0
    pub m0: f64,
    /// min of u0
    pub u0_min: f64,
    pub gamma1_measure: f64,
    /// Unquantified constant of the lower bounds.
    pub c: f64,
    /// ∫_Ω u0^{1−q}
    pub u0_integral: f64,
    /// Exponent of the comparison bounds.
    pub m: f64,
}

impl BoundInputs {
    /// Inputs for u0 ≡ `u0` on a domain of volume `volume`, with C = 1 and
    /// m = 2q − 2.
    pub fn constant(n: usize, q: f64, u0: f64, volume: f64, gamma1_measure: f64) -> Self {
        BoundInputs {
            n,
            q,
            m0: u0,
            u0_min: u0,
            gamma1_measure,
            c: 1.0,
            u0_integral: volume * math::pow(u0, 1.0 - q),
            m: 2.0 * q - 2.0,
        }
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    fn check_q(&self) -> Result<()> {
        if self.q > 1.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("bounds need q > 1, got {}", self.q)))
        }
    }

    fn check_c(&self) -> Result<()> {
        if self.c > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("bound constant must be positive, got {}", self.c)))
        }
    }
}

/// T* ≤ ∫ u0^{1−q} / ((q−1)|Γ1|).
pub fn upper_bound(inputs: &BoundInputs) -> Result<f64> {
    inputs.check_q()?;
    if !(inputs.u0_min > 0.0) {
        return Err(Error::InvalidParameter("upper bound needs min u0 > 0".into()));
    }
    if !(inputs.gamma1_measure > 0.0) {
        return Err(Error::InvalidParameter("upper bound needs a non-empty Γ1".into()));
    }
    Ok(inputs.u0_integral / ((inputs.q - 1.0) * inputs.gamma1_measure))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBound {
    pub value: f64,
    /// The bracket was ≤ 0 and the bound says nothing.
    pub vacuous: bool,
}

/// C^{−2/(n+2)} [ln|Γ1|^{−1} − (n+2)(q−1) ln M0 − ln(q−1) − ln C]^{2/(n+2)}.
pub fn lower_bound(inputs: &BoundInputs) -> Result<LowerBound> {
    inputs.check_q()?;
    inputs.check_c()?;
    if !(inputs.gamma1_measure > 0.0) || !(inputs.m0 > 0.0) {
        return Err(Error::InvalidParameter("lower bound needs |Γ1| > 0 and M0 > 0".into()));
    }
    let n = inputs.n as f64;
    let bracket = -math::ln(inputs.gamma1_measure)
        - (n + 2.0) * (inputs.q - 1.0) * math::ln(inputs.m0)
        - math::ln(inputs.q - 1.0)
        - math::ln(inputs.c);
    if bracket <= 0.0 {
        return Ok(LowerBound { value: 0.0, vacuous: true });
    }
    let e = 2.0 / (n + 2.0);
    Ok(LowerBound { value: math::pow(inputs.c, -e) * math::pow(bracket, e), vacuous: false })
}

/// min{1, M0^{−(q−1)(n+2)}/C} for Γ1 = ∂Ω.
pub fn whole_boundary_lower_bound(inputs: &BoundInputs) -> Result<f64> {
    inputs.check_q()?;
    inputs.check_c()?;
    if inputs.m0 < 1.0 {
        return Err(Error::InvalidParameter(format!("whole-boundary bound needs M0 >= 1, got {}", inputs.m0)));
    }
    let n = inputs.n as f64;
    Ok((math::pow(inputs.m0, -(inputs.q - 1.0) * (n + 2.0)) / inputs.c).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsBounds {
    /// C (∫ u0^{2m})^{−2}
    pub three_d: f64,
    /// C (∫ u0^{4m})^{−1}
    pub two_d: f64,
}

/// The earlier comparison bounds, with the integrals taken on the grid.
pub fn ps_lower_bounds(inputs: &BoundInputs, grid: &Grid, u0: &[f64]) -> Result<PsBounds> {
    inputs.check_q()?;
    inputs.check_c()?;
    if inputs.m < 2.0 * inputs.q - 2.0 {
        return Err(Error::InvalidParameter(format!("m = {} below 2q - 2 = {}", inputs.m, 2.0 * inputs.q - 2.0)));
    }
    if u0.len() != grid.len() {
        return Err(Error::InvalidParameter("u0 samples do not match the grid".into()));
    }
    let pow_integral = |e: f64| {
        let v: Vec<f64> = u0.iter().map(|&u| math::pow(u, e)).collect();
        grid.integrate(&v)
    };
    let i2 = pow_integral(2.0 * inputs.m);
    let i4 = pow_integral(4.0 * inputs.m);
    Ok(PsBounds { three_d: inputs.c / (i2 * i2), two_d: inputs.c / i4 })
}

fn check_pairs(pairs: &[(f64, f64)]) -> Result<()> {
    if pairs.len() < 2 {
        return Err(Error::NonMonotone("need at least two (|Γ1|, T0) pairs".into()));
    }
    for w in pairs.windows(2) {
        if !(w[1].0 < w[0].0) {
            return Err(Error::NonMonotone(format!("|Γ1| must strictly decrease: {} then {}", w[0].0, w[1].0)));
        }
    }
    if pairs.iter().any(|&(g, t)| !(g > 0.0) || !(t > 0.0)) {
        return Err(Error::NonMonotone("|Γ1| and T0 must be positive".into()));
    }
    Ok(())
}

/// ln(T_i/T_{i−1}) / ln(|Γ1|_{i−1}/|Γ1|_i) for consecutive pairs.
pub fn order_estimate(pairs: &[(f64, f64)]) -> Result<Vec<f64>> {
    check_pairs(pairs)?;
    Ok(pairs
        .windows(2)
        .map(|w| math::ln(w[1].1 / w[0].1) / math::ln(w[0].0 / w[1].0))
        .collect())
}

/// Least-squares slope of ln T0 against ln |Γ1|^{−1}.
pub fn global_order(pairs: &[(f64, f64)]) -> Result<f64> {
    check_pairs(pairs)?;
    let x: Vec<f64> = pairs.iter().map(|p| -math::ln(p.0)).collect();
    let y: Vec<f64> = pairs.iter().map(|p| math::ln(p.1)).collect();
    Ok(math::linear_fit(&x, &y).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Domain;

    #[test]
    fn upper_bound_examples() {
        let b = BoundInputs::constant(2, 2.0, 0.05, 1.0, 0.5);
        assert!((upper_bound(&b).unwrap() - 40.0).abs() < 1e-12);
        let b = BoundInputs::constant(3, 3.0, 0.05, 1.0, 0.49);
        assert!((upper_bound(&b).unwrap() - 400.0 / 0.98).abs() < 1e-9);
        let b = BoundInputs::constant(2, 2.0, 1.0, 1.0, 1.0);
        assert!((upper_bound(&b).unwrap() - 1.0).abs() < 1e-15);
        assert!(upper_bound(&BoundInputs::constant(2, 2.0, 0.0, 1.0, 0.5)).is_err());
        assert!(upper_bound(&BoundInputs::constant(2, 2.0, 0.05, 1.0, 0.0)).is_err());
    }

    #[test]
    fn lower_bound_examples() {
        let b = BoundInputs::constant(2, 2.0, 0.05, 1.0, 0.5);
        let l = lower_bound(&b).unwrap();
        let expect = (2f64.ln() - 4.0 * 0.05f64.ln()).sqrt();
        assert!((l.value - expect).abs() < 1e-12 && !l.vacuous);
        assert!((l.value - 3.560).abs() < 1e-3);
        let mut prev = 0.0;
        for k in 1..20 {
            let b = BoundInputs::constant(2, 2.0, 0.05, 1.0, 2f64.powi(-k));
            let v = lower_bound(&b).unwrap().value;
            assert!(v > prev);
            prev = v;
        }
        let b = BoundInputs::constant(2, 2.0, 10.0, 1.0, 1.0);
        assert_eq!(lower_bound(&b).unwrap(), LowerBound { value: 0.0, vacuous: true });
    }

    #[test]
    fn whole_boundary_examples() {
        let b = BoundInputs::constant(2, 3.0, 1.0, 1.0, 4.0);
        assert_eq!(whole_boundary_lower_bound(&b).unwrap(), 1.0);
        let b = BoundInputs::constant(3, 2.0, 2.0, 1.0, 6.0);
        assert!((whole_boundary_lower_bound(&b).unwrap() - 1.0 / 32.0).abs() < 1e-15);
        let b = BoundInputs::constant(2, 2.0, 4.0, 1.0, 4.0);
        assert!((whole_boundary_lower_bound(&b).unwrap() - 1.0 / 256.0).abs() < 1e-15);
        assert!(whole_boundary_lower_bound(&BoundInputs::constant(2, 2.0, 0.5, 1.0, 4.0)).is_err());
    }

    #[test]
    fn ps_bounds_for_constant_data() {
        let grid = Grid::new(&Domain::unit_cube(), 0.1).unwrap();
        for (q, m0) in [(2.0, 3.0), (3.0, 1.5)] {
            let b = BoundInputs::constant(3, q, m0, 1.0, 6.0);
            let u0 = alloc::vec![m0; grid.len()];
            let ps = ps_lower_bounds(&b, &grid, &u0).unwrap();
            let expect = math::pow(m0, -4.0 * b.m);
            assert!((ps.three_d / expect - 1.0).abs() < 1e-12);
            assert!((ps.two_d / expect - 1.0).abs() < 1e-12);
            // the whole-boundary bound is the stronger one for large M0
            assert!(whole_boundary_lower_bound(&b).unwrap() >= ps.three_d);
        }
        let mut b = BoundInputs::constant(3, 2.0, 2.0, 1.0, 6.0);
        b.m = 1.0;
        assert!(ps_lower_bounds(&b, &grid, &alloc::vec![2.0; grid.len()]).is_err());
    }

    #[test]
    fn order_examples() {
        let o = order_estimate(&[(0.5, 35.4), (0.25, 72.8)]).unwrap();
        assert!((o[0] - 1.040).abs() < 5e-4);
        let o = order_estimate(&[(0.49, 403.0), (0.25, 791.6)]).unwrap();
        assert!((o[0] - 1.003).abs() < 5e-4);
        let pure: Vec<(f64, f64)> = [0.5, 0.3, 0.1, 0.01].iter().map(|&g| (g, 1.0 / g)).collect();
        assert!(order_estimate(&pure).unwrap().iter().all(|o| (o - 1.0).abs() < 1e-12));
        assert!((global_order(&pure).unwrap() - 1.0).abs() < 1e-12);
        assert!(order_estimate(&[(0.25, 1.0), (0.5, 2.0)]).is_err());
        assert!(order_estimate(&[(0.25, 1.0)]).is_err());
    }

    #[test]
    fn table_one_global_order() {
        let rows = [(20.0 / 40.0, 35.4), (10.0 / 40.0, 72.8), (5.0 / 40.0, 149.6), (3.0 / 40.0, 253.6)];
        let g = global_order(&rows).unwrap();
        assert!((g - 1.038).abs() < 2e-3, "{g}");
    }
}
