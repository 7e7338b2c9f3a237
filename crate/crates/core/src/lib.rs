//! Numerical laboratory for the mean-field and Bogoliubov description of
//! weakly interacting bosons on a periodic one-dimensional lattice.
//!
//! The crate couples an exact truncated-Fock-space solver to the effective
//! equations (Hartree, Gross-Pitaevskii, Bogoliubov) and to a zero-energy
//! scattering solver, so that the effective descriptions can be compared
//! against the many-body dynamics quantitatively.

// `!(x > 0.0)` is used deliberately so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bogoliubov;
pub mod error;
pub mod exact;
pub mod fock;
pub mod harness;
pub mod krylov;
pub mod lattice;
pub mod meanfield;
pub mod par;
pub mod scattering;
pub mod sparse;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
