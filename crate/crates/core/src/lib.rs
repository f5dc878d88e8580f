//! Numerical core for the heat equation `u_t = Δu` with a local nonlinear
//! Neumann condition `∂u/∂n = u^q` on a boundary patch Γ1 and zero flux on
//! the rest of the boundary.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature. All IO, configuration and reporting lives in the companion
//! `blowuplab` crate.
//!
//! Modules:
//! - [`geometry`]: domains, the Γ1/Γ2 partition, normals and boundary quadrature.
//! - [`fdm`]: explicit finite differences with ghost-node flux conditions and
//!   threshold-time detection.
//! - [`kernel`]: the heat kernel Φ, its gradient and the geometric defect checks.
//! - [`layer`]: single-layer heat potentials, the Volterra boundary integral
//!   equation and jump relation checks.
//! - [`representation`]: interior/boundary representation formulas.
//! - [`bounds`]: closed-form blow-up time bounds and order estimates.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod bounds;
mod error;
pub mod fdm;
pub mod geometry;
pub mod kernel;
pub mod layer;
mod math;
pub mod quadrature;
pub mod representation;

pub use error::{Error, Result};
pub use geometry::{BoundaryPartition, BoundaryQuadrature, Domain, Placement, Point, RegionTag, Shape};
