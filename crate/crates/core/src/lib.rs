//! Discrete differential-complex toolkit for second-order tensor fields.
//!
//! The crate builds structured-grid domains over flat and constant-curvature
//! charts, applies the first- and second-order operators that link tensor
//! fields into exact sequences, verifies that those sequences compose to
//! zero, decides compatibility questions by combining local residuals with
//! period integrals over user-supplied chains, reconstructs potentials on
//! topologically trivial regions, and counts cohomology dimensions so the
//! analytic predictions can be checked against mesh topology.

pub mod calculus;
pub mod cohomology;
pub mod compat;
pub mod geometry;
pub mod isomorphisms;
pub mod error;
pub mod expr;
pub mod fields;
pub mod io;
pub mod mesh;
pub mod potentials;
pub mod probe;

pub use error::{Error, Result};
