//! Numerical laboratory for the resolvent problem of the linearized
//! Q-tensor (Beris-Edwards) system coupled to Stokes flow in the half-space.
//!
//! The crate evaluates the characteristic roots and boundary symbols of the
//! problem, scans their lower bounds on a sector near the origin, probes
//! multiplier-class memberships by finite differences, and solves the
//! whole-space and half-space resolvent problems mode by mode.

pub mod cli;
pub mod error;
pub mod estimates;
pub mod field;
pub mod halfspace;
pub mod lopatinski;
pub mod multiplier;
pub mod numerics;
pub mod sector;
pub mod symbols;
pub mod wholespace;

pub use error::{QthsError, Result};
pub use num_complex::Complex64 as C64;
pub use sector::SectorParams;
