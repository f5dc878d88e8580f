//! TOML run configuration.
//!
//! ```toml
//! name = "table1"
//! backend = "fdm"            # or "bie" (disk only)
//! c_constant = 1.0           # constant of the lower bounds
//!
//! [domain]
//! shape = "square"           # square, cube, rectangle, box, disk, ball
//!
//! [partition]
//! gamma1 = 0.5               # ignored when [sweep] is present
//! alignment = "dual-cells"   # or "exact"
//! interface_coefficient = 0.5
//!
//! [solver]
//! q = 2.0
//! u0 = 0.05
//! h = 0.025
//! k_over_h2 = 0.2            # or an absolute `k`
//! threshold = 10.0
//! t_max = 100000.0
//!
//! [sweep]
//! gamma1 = [0.5, 0.25, 0.125, 0.075]
//! ```

use std::path::{Path, PathBuf};

use blowuplab_core::fdm::{PatchAlignment, SolverConfig};
use blowuplab_core::geometry::{partition_boundary, BoundaryPartition, Domain, Placement};
use blowuplab_core::layer::NonlinearBieConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Fdm,
    Bie,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum DomainSpec {
    Square,
    Cube,
    Rectangle { width: f64, height: f64 },
    Box { sides: [f64; 3] },
    Disk { radius: f64 },
    Ball { radius: f64 },
}

impl DomainSpec {
    pub fn build(&self) -> Result<Domain> {
        use blowuplab_core::geometry::Shape;
        let d = match *self {
            DomainSpec::Square => Ok(Domain::unit_square()),
            DomainSpec::Cube => Ok(Domain::unit_cube()),
            DomainSpec::Rectangle { width, height } => {
                Domain::new(Shape::Rectangle { width, height }, [0.5 * width, 0.5 * height, 0.0])
            }
            DomainSpec::Box { sides } => Domain::new(Shape::Box { sides }, [0.5 * sides[0], 0.5 * sides[1], 0.5 * sides[2]]),
            DomainSpec::Disk { radius } => Domain::disk(radius),
            DomainSpec::Ball { radius } => Domain::ball(radius),
        };
        d.map_err(|e| LabError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alignment {
    #[default]
    Exact,
    DualCells,
}

/// Where Γ1 sits. Unset fields fall back to the domain default (bottom face,
/// bottom arc or bottom cap).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementSpec {
    pub axis: Option<usize>,
    #[serde(default)]
    pub upper: bool,
    pub shift: Option<[f64; 2]>,
    /// Arc centre angle on a disk.
    pub angle: Option<f64>,
    /// Cap direction on a ball.
    pub direction: Option<[f64; 3]>,
}

impl PlacementSpec {
    fn build(&self, domain: &Domain) -> Placement {
        match Placement::default_for(domain) {
            Placement::Face { axis, upper, shift } => Placement::Face {
                axis: self.axis.unwrap_or(axis),
                upper: self.upper || upper,
                shift: self.shift.unwrap_or(shift),
            },
            Placement::Arc { center_angle } => Placement::Arc { center_angle: self.angle.unwrap_or(center_angle) },
            Placement::Cap { direction } => Placement::Cap { direction: self.direction.unwrap_or(direction) },
        }
    }
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSpec {
    #[serde(default)]
    pub gamma1: f64,
    #[serde(default)]
    pub placement: PlacementSpec,
    #[serde(default)]
    pub alignment: Alignment,
    #[serde(default = "half")]
    pub interface_coefficient: f64,
}

impl Default for PartitionSpec {
    fn default() -> Self {
        PartitionSpec { gamma1: 0.0, placement: PlacementSpec::default(), alignment: Alignment::Exact, interface_coefficient: 0.5 }
    }
}

fn ten() -> f64 {
    10.0
}

fn horizon() -> f64 {
    1e5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub q: f64,
    pub u0: f64,
    pub h: f64,
    pub k: Option<f64>,
    pub k_over_h2: Option<f64>,
    #[serde(default = "ten")]
    pub threshold: f64,
    #[serde(default = "horizon")]
    pub t_max: f64,
    #[serde(default)]
    pub record_every: u64,
}

impl SolverSpec {
    pub fn time_step(&self) -> Result<f64> {
        match (self.k, self.k_over_h2) {
            (Some(k), None) => Ok(k),
            (None, Some(f)) => Ok(f * self.h * self.h),
            _ => Err(LabError::Config("set exactly one of solver.k and solver.k_over_h2".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub gamma1: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BieSpec {
    pub nodes: usize,
    pub levels: usize,
    pub t_end: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    #[serde(default)]
    pub backend: Backend,
    pub domain: DomainSpec,
    #[serde(default)]
    pub partition: PartitionSpec,
    pub solver: SolverSpec,
    pub sweep: Option<SweepSpec>,
    pub bie: Option<BieSpec>,
    #[serde(default = "one")]
    pub c_constant: f64,
    /// Output directory; not part of the digest.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    /// Parses and validates, including the CFL check.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(LabError::Config(format!("invalid experiment name `{}`", self.name)));
        }
        if !(self.c_constant > 0.0) {
            return Err(LabError::Config(format!("c_constant must be positive, got {}", self.c_constant)));
        }
        if let Some(s) = &self.sweep {
            if s.gamma1.is_empty() {
                return Err(LabError::Config("sweep.gamma1 is empty".into()));
            }
            if s.gamma1.windows(2).any(|w| !(w[1] < w[0])) {
                return Err(LabError::Config("sweep.gamma1 must be strictly decreasing".into()));
            }
        }
        self.domain.build()?;
        match self.backend {
            Backend::Fdm => {
                for g in self.gamma1_values() {
                    self.solver_config(g)?.validate().map_err(config_error)?;
                }
            }
            Backend::Bie => {
                for g in self.gamma1_values() {
                    self.bie_config(g)?;
                }
                if self.bie.is_none() {
                    return Err(LabError::Config("bie backend needs a [bie] table".into()));
                }
                if !matches!(self.domain, DomainSpec::Disk { .. }) {
                    return Err(LabError::Config("bie backend runs on disks only".into()));
                }
            }
        }
        Ok(())
    }

    pub fn gamma1_values(&self) -> Vec<f64> {
        match &self.sweep {
            Some(s) => s.gamma1.clone(),
            None => vec![self.partition.gamma1],
        }
    }

    pub fn partition(&self, gamma1: f64) -> Result<(Domain, BoundaryPartition)> {
        let domain = self.domain.build()?;
        let placement = self.partition.placement.build(&domain);
        let p = partition_boundary(&domain, gamma1, placement).map_err(|e| LabError::Config(e.to_string()))?;
        Ok((domain, p))
    }

    pub fn solver_config(&self, gamma1: f64) -> Result<SolverConfig> {
        let (domain, partition) = self.partition(gamma1)?;
        let s = &self.solver;
        let mut c = SolverConfig::new(domain, partition, s.q, s.u0, s.h, s.time_step()?);
        c.threshold = s.threshold;
        c.t_max = s.t_max;
        c.record_every = s.record_every;
        c.interface_coefficient = self.partition.interface_coefficient;
        c.alignment = match self.partition.alignment {
            Alignment::Exact => PatchAlignment::Exact,
            Alignment::DualCells => PatchAlignment::DualCells,
        };
        Ok(c)
    }

    pub fn bie_config(&self, gamma1: f64) -> Result<NonlinearBieConfig> {
        let DomainSpec::Disk { radius } = self.domain else {
            return Err(LabError::Config("bie backend runs on disks only".into()));
        };
        let b = self.bie.as_ref().ok_or_else(|| LabError::Config("bie backend needs a [bie] table".into()))?;
        if b.nodes < 4 || b.levels == 0 || !(b.t_end > 0.0) {
            return Err(LabError::Config("bie needs nodes >= 4, levels >= 1 and t_end > 0".into()));
        }
        if !(self.solver.q > 1.0) || !(self.solver.u0 > 0.0) {
            return Err(LabError::Config("bie needs q > 1 and u0 > 0".into()));
        }
        self.partition(gamma1)?;
        Ok(NonlinearBieConfig {
            radius,
            q: self.solver.q,
            u0: self.solver.u0,
            gamma1_measure: gamma1,
            t_end: b.t_end,
            levels: b.levels,
            nodes: b.nodes,
            threshold: self.solver.threshold,
        })
    }

    /// Hex SHA-256 of the canonical JSON form, output directory excluded.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn config_error(e: blowuplab_core::Error) -> LabError {
    match e {
        blowuplab_core::Error::Cfl { k, limit } => LabError::Cfl { k, limit },
        other => LabError::Config(other.to_string()),
    }
}
