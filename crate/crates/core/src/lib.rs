//! Construction and verification of Stäckel-separable integrable geodesic
//! flows.
//!
//! The crate is organised bottom-up:
//!
//! * [`scalarfield`]: coefficient functions (exact rational functions or
//!   numeric expression trees) and the expression parser;
//! * [`phase_poly`]: polynomials in momenta and the Poisson bracket;
//! * [`tensorcalc`]: metrics, quadratic integrals and Killing residuals;
//! * [`framediag`]: pointwise simultaneous diagonalization and rank checks;
//! * [`stackel`]: integrals generated by a Stäckel matrix;
//! * [`theoremlab`]: the pointwise linear system on directional derivatives
//!   of the block coefficients;
//! * [`geoflow`]: implicit-midpoint integration of the geodesic flow.

pub mod error;
pub mod framediag;
pub mod geoflow;
pub mod matrix;
pub mod phase_poly;
pub mod sampling;
pub mod scalarfield;
pub mod stackel;
pub mod tensorcalc;
pub mod theoremlab;

pub use error::{Error, Result};
