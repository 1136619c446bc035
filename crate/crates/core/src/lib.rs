//! 2D plane-strain finite elements for fluid-structure-contact interaction
//! where rough contacting surfaces are modeled as a homogenized poroelastic
//! layer.
//!
//! The library is organized along the physics:
//!
//! - [`mesh`]: quadrilateral meshes, bilinear shape functions, dof maps
//! - [`constitutive`]: hyperelastic energies, porosity closure, permeability
//! - [`forms`]: domain weak-form residuals/tangents (solid, fluid, poro)
//! - [`cutcell`]: cut-cell geometry, quadrature and ghost-penalty stabilization
//! - [`interface`]: Nitsche couplings, mortar contact, active-set logic
//! - [`solver`]: one-step-theta time integration, monolithic Newton, sparse LU
//! - [`scenarios`]: leakage and contacting-stamp setups, QoI, file output

pub mod constitutive;
pub mod cutcell;
pub mod dual;
pub mod error;
pub mod forms;
pub mod interface;
pub mod math;
pub mod mesh;
pub mod scenarios;
pub mod solver;

pub use error::{Error, Result};
pub use math::{Mat2, Vec2};
