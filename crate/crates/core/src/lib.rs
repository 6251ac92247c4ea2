//! Numerical core of a Floquet–Bloch laboratory for the periodic
//! Schrödinger operator `H = -∂ₓ² + V(x)` on a large torus.
//!
//! The modules build on each other in order: [`fields`] provides grids and
//! spectral calculus, [`bloch`] diagonalizes the fibers, [`propagator`]
//! evolves linearly and splits the spectrum, [`norms`] measures mixed
//! space-time norms, [`nls`] integrates the nonlinear flow and
//! [`scattering`] analyzes its long-time behaviour.

pub mod bloch;
pub mod error;
pub mod fields;
pub mod nls;
pub mod norms;
pub mod propagator;
pub mod scattering;

pub use error::{Error, PairViolation, Result};
