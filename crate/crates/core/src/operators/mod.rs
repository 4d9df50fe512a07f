//! Bloch–Floquet fiber operators for the chiral, anti-chiral, full and pure
//! Dirac models in two discretizations: a plane-wave basis on the moiré
//! torus (zero constant field, periodic potentials allowed) and a magnetic
//! finite-difference grid on ℂ/Γ_mag for rational constant flux, together
//! with magnetic translations and Landau ladder states.

pub mod fd;
pub mod ladder;
pub mod pw;
pub mod translate;

use crate::lattice::Lattice;
use crate::potentials::MagneticPotential;
use crate::{C64, Error, Result};
use ndarray::Array2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Chiral,
    AntiChiral,
    Full,
    DiracOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    PlaneWave,
    FiniteDifference,
}

/// Discretization request: momentum truncation radius N for the plane-wave
/// backend (all dual-lattice indices with |m|∞ ≤ N), grid side n for the
/// finite-difference backend.
#[derive(Debug, Clone, Copy)]
pub struct BasisSpec {
    pub backend: Backend,
    pub size: usize,
    pub lattice: Lattice,
}

impl BasisSpec {
    pub fn plane_wave(lattice: Lattice, n_trunc: usize) -> Result<Self> {
        if n_trunc < 4 {
            return Err(Error::InvalidParameter(
                "plane-wave truncation must be >= 4".into(),
            ));
        }
        Ok(Self {
            backend: Backend::PlaneWave,
            size: n_trunc,
            lattice,
        })
    }

    pub fn finite_difference(lattice: Lattice, n: usize) -> Result<Self> {
        if n < 32 || n % 4 != 0 {
            return Err(Error::InvalidParameter(
                "finite-difference grid side must be >= 32 and divisible by 4".into(),
            ));
        }
        Ok(Self {
            backend: Backend::FiniteDifference,
            size: n,
            lattice,
        })
    }
}

/// A dense fiber operator at fixed quasi-momentum.
#[derive(Debug, Clone)]
pub struct FiberOperator {
    pub matrix: Array2<C64>,
    pub k: C64,
    pub model: Model,
    pub basis: BasisSpec,
    pub hermitian: bool,
}

impl FiberOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Assembles the dense fiber operator at quasi-momentum k.
///
/// Plane-wave backend: requires A.b = 0 (periodic part arbitrary); returns
/// the Hermitian matrix for Chiral/AntiChiral/Full/DiracOnly. The
/// finite-difference backend materializes the matrix from stencil applies
/// and is capped at n ≤ 40 (larger grids go through the Landau-ladder
/// spectral path in `spectra`).
pub fn assemble_fiber(
    model: Model,
    alpha0: f64,
    alpha1: f64,
    k: C64,
    a: &MagneticPotential,
    basis: &BasisSpec,
) -> Result<FiberOperator> {
    match basis.backend {
        Backend::PlaneWave => {
            if a.b != 0.0 {
                return Err(Error::InvalidParameter(
                    "plane-wave backend requires zero constant field".into(),
                ));
            }
            let matrix = match model {
                Model::Chiral => pw::hermitian_chiral(&basis.lattice, basis.size, alpha1, k, a)?,
                Model::AntiChiral => {
                    pw::hermitian_antichiral(&basis.lattice, basis.size, alpha0, 0.0, k, a)?
                }
                Model::Full => pw::hermitian_full(&basis.lattice, basis.size, alpha0, alpha1, k, a)?,
                Model::DiracOnly => pw::hermitian_dirac(&basis.lattice, basis.size, k, a)?,
            };
            Ok(FiberOperator {
                matrix,
                k,
                model,
                basis: *basis,
                hermitian: true,
            })
        }
        Backend::FiniteDifference => {
            if basis.size > 40 {
                return Err(Error::InvalidParameter(
                    "dense FD assembly capped at n = 40; use the spectral band path".into(),
                ));
            }
            let matrix = fd::dense_hermitian(model, alpha0, alpha1, k, a, basis)?;
            Ok(FiberOperator {
                matrix,
                k,
                model,
                basis: *basis,
                hermitian: true,
            })
        }
    }
}

/// The Birman–Schwinger operator T_k = (2D_z̄ − A_ℂ + k)⁻¹ ∘ tunneling on the
/// twisted plane-wave basis; non-Hermitian and compact.
pub fn assemble_bs(
    lattice: &Lattice,
    n_trunc: usize,
    k: C64,
    a_per: Option<&MagneticPotential>,
) -> Result<FiberOperator> {
    let basis = BasisSpec::plane_wave(*lattice, n_trunc)?;
    let matrix = pw::bs_matrix(lattice, n_trunc, k, a_per)?;
    Ok(FiberOperator {
        matrix,
        k,
        model: Model::Chiral,
        basis,
        hermitian: false,
    })
}
