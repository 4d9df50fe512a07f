//! Spectral toolkit for the chiral and anti-chiral moiré continuum models of
//! twisted bilayer graphene in periodic and rational-flux magnetic fields.
//!
//! The crate assembles Bloch–Floquet fiber operators in two discretizations
//! (plane waves on the moiré torus, magnetic finite differences on the
//! magnetic unit cell), constructs exact flat-band zero modes from elliptic
//! special functions, locates magic angles through a Birman–Schwinger
//! operator, and computes band structures, Chern numbers, band squeezing
//! statistics and Landau-level spectra.

// force linkage of the BLAS provider for ndarray's matrix products
use blas_src as _;

pub mod chern;
pub mod checks;
pub mod error;
pub mod grid;
pub mod lattice;
pub mod linalg;
pub mod magic;
pub mod operators;
pub mod potentials;
pub mod special;
pub mod spectra;
pub mod zero_modes;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

/// Crate version string recorded in output metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
