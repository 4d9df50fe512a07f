//! Moiré lattice geometry: the triangular lattice Γ, its dual Γ*, the
//! magnetic superlattice Γ_mag = λ₁ζ₁ℤ ⊕ λ₂ζ₂ℤ, rational flux data and
//! distinguished points of the Brillouin zone.
//!
//! The real pairing ⟨z, k⟩ := Re(z·conj(k)) is fixed here and used for every
//! Floquet phase in the crate.

use crate::{C64, Error, Result};
use std::f64::consts::PI;

/// ω = exp(2πi/3).
pub fn omega() -> C64 {
    C64::new(-0.5, 0.5 * 3f64.sqrt())
}

/// Real pairing ⟨z, k⟩ = Re(z·conj(k)).
#[inline]
pub fn pairing(z: C64, k: C64) -> f64 {
    (z * k.conj()).re
}

/// Moiré lattice data for scaling parameter λ = (λ₁, λ₂).
///
/// Γ = ζ₁ℤ ⊕ ζ₂ℤ with ζ₁ = 4πiω/3, ζ₂ = 4πiω²/3; the magnetic superlattice
/// is Γ_mag = v₁ℤ ⊕ v₂ℤ with v_j = λ_jζ_j. The dual basis η₁ = √3ω²,
/// η₂ = −√3ω satisfies ⟨ζ_i, η_j⟩ = 2πδ_ij.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    pub zeta1: C64,
    pub zeta2: C64,
    pub lambda: (u32, u32),
    pub v1: C64,
    pub v2: C64,
    pub eta1: C64,
    pub eta2: C64,
    pub cell_area: f64,
    pub mag_cell_area: f64,
}

impl Lattice {
    /// Dual basis of the magnetic superlattice, η_j/λ_j.
    pub fn mag_dual_basis(&self) -> (C64, C64) {
        (
            self.eta1 / self.lambda.0 as f64,
            self.eta2 / self.lambda.1 as f64,
        )
    }

    /// q = λ₁λ₂, the number of Γ-cells inside a magnetic cell.
    pub fn q(&self) -> u32 {
        self.lambda.0 * self.lambda.1
    }

    /// Point z = s·v₁ + t·v₂ of the magnetic cell.
    #[inline]
    pub fn cell_point(&self, s: f64, t: f64) -> C64 {
        self.v1 * s + self.v2 * t
    }

    /// Coordinates (s, t) of z in the (v₁, v₂) basis.
    pub fn cell_coords(&self, z: C64) -> (f64, f64) {
        // Solve z = s v1 + t v2 via the dual pairing.
        let (e1, e2) = self.mag_dual_basis();
        (pairing(z, e1) / (2.0 * PI), pairing(z, e2) / (2.0 * PI))
    }

    /// Representative of z of minimal modulus in z + Γ_mag.
    pub fn reduce_to_cell(&self, z: C64) -> C64 {
        let (s, t) = self.cell_coords(z);
        let z0 = z - self.v1 * s.round() - self.v2 * t.round();
        let mut best = z0;
        for m in -1..=1 {
            for n in -1..=1 {
                let cand = z0 + self.v1 * m as f64 + self.v2 * n as f64;
                if cand.norm() < best.norm() {
                    best = cand;
                }
            }
        }
        best
    }
}

/// Rational magnetic flux data: p Dirac flux quanta through ℂ/Γ_mag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxSpec {
    pub p: u32,
    pub q: u32,
    pub b: f64,
    pub lambda: (u32, u32),
}

/// Builds the lattice for scaling parameter λ.
pub fn make_lattice(lambda: (u32, u32)) -> Result<Lattice> {
    if lambda.0 < 1 || lambda.1 < 1 {
        return Err(Error::InvalidParameter(format!(
            "lattice scaling must be positive, got {lambda:?}"
        )));
    }
    let w = omega();
    let i = C64::i();
    let zeta1 = 4.0 * PI * i * w / 3.0;
    let zeta2 = 4.0 * PI * i * w * w / 3.0;
    let v1 = zeta1 * lambda.0 as f64;
    let v2 = zeta2 * lambda.1 as f64;
    let eta1 = 3f64.sqrt() * w * w;
    let eta2 = -(3f64.sqrt()) * w;
    let cell_area = (zeta1.conj() * zeta2).im;
    let mag_cell_area = (v1.conj() * v2).im;
    debug_assert!(cell_area > 0.0 && mag_cell_area > 0.0);
    Ok(Lattice {
        zeta1,
        zeta2,
        lambda,
        v1,
        v2,
        eta1,
        eta2,
        cell_area,
        mag_cell_area,
    })
}

/// Flux specification with p flux quanta through the magnetic cell.
pub fn flux_spec(p: u32, lattice: &Lattice) -> Result<FluxSpec> {
    if p < 1 {
        return Err(Error::InvalidParameter("flux quanta p must be >= 1".into()));
    }
    Ok(FluxSpec {
        p,
        q: lattice.q(),
        b: 2.0 * PI * p as f64 / lattice.mag_cell_area,
        lambda: lattice.lambda,
    })
}

/// Distinguished points: the Dirac momentum k₀ = (η₁+η₂)/3 = −i and the
/// stacking point z_S = 4π/(3√3) where the simple-magic-angle zero mode
/// vanishes at −z_S.
#[derive(Debug, Clone, Copy)]
pub struct SpecialPoints {
    pub k0: C64,
    pub z_s: C64,
}

pub fn special_points(lattice: &Lattice) -> SpecialPoints {
    let k0 = (lattice.eta1 + lattice.eta2) / 3.0;
    let w = omega();
    let z_s = 4.0 / 9.0 * PI * C64::i() * (w * w - w);
    SpecialPoints { k0, z_s }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    #[test]
    fn duality_pairing() {
        let lat = make_lattice((1, 1)).unwrap();
        assert!((pairing(lat.zeta1, lat.eta1) - 2.0 * PI).abs() < TOL);
        assert!((pairing(lat.zeta2, lat.eta2) - 2.0 * PI).abs() < TOL);
        assert!(pairing(lat.zeta1, lat.eta2).abs() < TOL);
        assert!(pairing(lat.zeta2, lat.eta1).abs() < TOL);
    }

    #[test]
    fn unit_cell_area() {
        let lat = make_lattice((1, 1)).unwrap();
        let expected = 8.0 * PI * PI / (3.0 * 3f64.sqrt());
        assert!((lat.cell_area - expected).abs() < TOL);
        assert!((lat.v1 - lat.zeta1).norm() < TOL);
        // orientation fixed positive
        assert!((lat.v1.conj() * lat.v2).im > 0.0);
    }

    #[test]
    fn mag_cell_scaling() {
        let lat = make_lattice((2, 1)).unwrap();
        assert!((lat.mag_cell_area - 2.0 * lat.cell_area).abs() < TOL);
        let lat22 = make_lattice((2, 2)).unwrap();
        assert!((lat22.mag_cell_area - 4.0 * lat22.cell_area).abs() < 1e-11);
    }

    #[test]
    fn rejects_bad_lambda() {
        assert!(make_lattice((0, 1)).is_err());
    }

    #[test]
    fn flux_arithmetic() {
        let lat = make_lattice((1, 1)).unwrap();
        let f = flux_spec(1, &lat).unwrap();
        assert_eq!(f.q, 1);
        assert!((f.b * lat.cell_area - 2.0 * PI).abs() < TOL);
        let expected_b = 3.0 * 3f64.sqrt() / (4.0 * PI);
        assert!((f.b - expected_b).abs() < 1e-12);

        let lat21 = make_lattice((2, 1)).unwrap();
        let f2 = flux_spec(2, &lat21).unwrap();
        // p/q = 1 so flux through the unit cell is 2π
        assert!((f2.b * lat21.cell_area - 2.0 * PI).abs() < TOL);
        assert!((f2.b * lat21.mag_cell_area - 4.0 * PI).abs() < 1e-11);
        assert!(flux_spec(0, &lat).is_err());
    }

    #[test]
    fn special_points_values() {
        let lat = make_lattice((1, 1)).unwrap();
        let sp = special_points(&lat);
        assert!((sp.k0 - C64::new(0.0, -1.0)).norm() < TOL);
        let zs = 4.0 * PI / (3.0 * 3f64.sqrt());
        assert!((sp.z_s - C64::new(zs, 0.0)).norm() < TOL);
        // dual-basis arithmetic for any λ gives the same k0
        let lat21 = make_lattice((2, 1)).unwrap();
        let sp21 = special_points(&lat21);
        assert!((sp21.k0 - C64::new(0.0, -1.0)).norm() < TOL);
    }

    #[test]
    fn reduce_to_cell_idempotent() {
        let lat = make_lattice((2, 1)).unwrap();
        let z = C64::new(7.3, -4.1);
        let r = lat.reduce_to_cell(z);
        let d = z - r;
        let (s, t) = lat.cell_coords(d);
        assert!((s - s.round()).abs() < 1e-9 && (t - t.round()).abs() < 1e-9);
        assert!((lat.reduce_to_cell(r) - r).norm() < 1e-12);
    }
}
