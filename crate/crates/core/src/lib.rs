//! A numerical laboratory for Korn–Maxwell–Sobolev inequalities.
//!
//! The crate samples matrix fields on uniform 3-D grids, applies first-order
//! operators through their matrix representatives, evaluates the norms that
//! enter the inequalities, and measures the ratios of left- to right-hand
//! sides over random corpora.
//!
//! * [`operators`]: matrix representatives, symbols, ellipticity.
//! * [`fields`]: grids, sampled fields, derivatives, KMSF files.
//! * [`spectral`]: Helmholtz projection, Riesz potentials, multipliers.
//! * [`norms`]: Lebesgue, Lorentz, BMO, Hölder and Gagliardo (semi)norms.
//! * [`extension`]: solenoidal extension from the unit cube and the local
//!   pairing estimate for divergence-free fields.
//! * [`harness`]: the inequality experiments and their reports.

pub mod error;
pub mod extension;
pub mod fields;
pub mod harness;
pub mod norms;
pub mod operators;
pub mod spectral;

pub use error::{KmsError, Result};
pub use fields::{Field, GridGeometry};
pub use operators::{Builtin, MatrixRep};
