//! Gradient-constrained Born-Infeld electrostatics.
//!
//! The library minimizes the electrostatic Born-Infeld energy
//! `∫ (1 - √(1 - |∇u|²)) dx - ∫ ρ u dx` over scalar fields with `|∇u| ≤ 1`,
//! solves the radial case exactly by flux inversion, and numerically
//! certifies the quantitative estimates attached to that problem: the
//! Lorentz-ball gradient estimate, the small-data threshold machinery, the
//! structure conditions of the regularized flux, the scaling identities,
//! and a nonlinear Gronwall-type integral bound.
//!
//! Modules mirror the mathematical pipeline:
//!
//! * [`grid`] - box grids, zero-trace scalar fields, staggered gradients, norms
//! * [`charge`] - charge densities, mollification, Riesz/Wolff potentials
//! * [`radial`] - exact radial solver and origin regularity classification
//! * [`minimize`] - constrained energy minimization on grids
//! * [`plap`] - truncated power-series (p-Laplacian) approximations
//! * [`verify`] - estimate evaluation, small-data reports, regularized operator
//! * [`gronwall`] - the nonlinear integral inequality bound and its certification
//! * [`io`] - bit-exact field serialization

pub mod charge;
pub mod error;
pub mod grid;
pub mod gronwall;
pub mod io;
pub mod minimize;
pub mod plap;
pub mod poisson;
pub mod quad;
pub mod radial;
pub mod special;
pub mod verify;

pub use error::{Error, Result};
