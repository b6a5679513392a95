//! Half-space solver: whole-space solve of reflected data, a boundary
//! corrector per tangential mode, and a weak Dirichlet-Neumann solve for the
//! pressure. A staggered finite-difference solver for N = 2 serves as oracle.

pub mod boundary;
pub mod extension;
pub mod fd_oracle;
pub mod grid;
pub mod kernels;
pub mod pressure;
pub mod samples;
pub mod solver;

pub use boundary::{mode_defect, solve_boundary_mode, ModeBoundary, Profile};
pub use fd_oracle::{compare_with_spectral, fd_oracle_solve, FdGrid, FdSolution};
pub use extension::{extend_even, extend_odd, extend_tensor, extend_velocity, Parity};
pub use grid::{HalfSpaceGrid, NormalGrid};
pub use kernels::{volevich_form, volevich_integral, ExpSum, ExpTerm, VolevichResult};
pub use samples::SingleMode;
pub use pressure::{pressure_dn_mode, pressure_dn_solve};
pub use solver::{interior_residual, solve_boundary, solve_halfspace, tangential_coords, trace_diagnostics, Component, DataKind, HalfSpaceData, HalfSpaceSolution, ModeRepresentation, SolveDiagnostics};
