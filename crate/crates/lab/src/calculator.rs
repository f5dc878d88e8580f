//! `blowuplab bounds`: the closed-form bounds for constant initial data.

use blowuplab_core::bounds::{lower_bound, upper_bound, whole_boundary_lower_bound, BoundInputs};
use serde::Serialize;

use crate::error::{LabError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsSummary {
    pub n: usize,
    pub q: f64,
    pub u0: f64,
    pub gamma1: f64,
    pub volume: f64,
    pub c_constant: f64,
    pub upper: Option<f64>,
    pub lower: f64,
    pub lower_vacuous: bool,
    /// Only defined for M0 ≥ 1; meaningful when Γ1 is the whole boundary.
    pub whole_boundary: Option<f64>,
}

pub fn bounds_summary(n: usize, q: f64, u0: f64, gamma1: f64, volume: f64, c: f64) -> Result<BoundsSummary> {
    if !(2..=3).contains(&n) {
        return Err(LabError::Config(format!("dimension must be 2 or 3, got {n}")));
    }
    if !(volume > 0.0) {
        return Err(LabError::Config(format!("volume must be positive, got {volume}")));
    }
    let inputs = BoundInputs::constant(n, q, u0, volume, gamma1).with_c(c);
    let lower = lower_bound(&inputs).map_err(|e| LabError::Config(e.to_string()))?;
    Ok(BoundsSummary {
        n,
        q,
        u0,
        gamma1,
        volume,
        c_constant: c,
        upper: upper_bound(&inputs).ok(),
        lower: lower.value,
        lower_vacuous: lower.vacuous,
        whole_boundary: whole_boundary_lower_bound(&inputs).ok(),
    })
}

pub fn bounds_json(n: usize, q: f64, u0: f64, gamma1: f64, volume: f64, c: f64) -> Result<String> {
    Ok(serde_json::to_string_pretty(&bounds_summary(n, q, u0, gamma1, volume, c)?)?)
}
