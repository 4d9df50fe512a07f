//! Tunneling potentials U, V, U₋ and the magnetic vector potential
//! A = A_con + A_per together with the gauge scalar that absorbs the
//! periodic part of the field.
//!
//! All Fourier momenta use the pairing ⟨z, k⟩ = Re(z·conj(k)); with the
//! momenta K_ℓ = iω^ℓ one has U(z) = Σ_ℓ ω^ℓ e^{i⟨z,K_ℓ⟩} and
//! V(z) = Σ_ℓ e^{i⟨z,K_ℓ⟩}.

use crate::lattice::{omega, pairing};
use crate::{C64, Error, Result};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TunnelingKind {
    U,
    V,
    Uminus,
}

/// A tunneling potential as a three-mode trigonometric sum.
#[derive(Debug, Clone)]
pub struct TunnelingPotential {
    pub kind: TunnelingKind,
    pub fourier_modes: Vec<(C64, C64)>,
}

/// The plane-wave decomposition (momentum, weight) of each tunneling kind.
pub fn tunneling_momenta(kind: TunnelingKind) -> Vec<(C64, C64)> {
    let w = omega();
    let i = C64::i();
    (0..3)
        .map(|l| {
            let wl = w.powu(l);
            let momentum = i * wl;
            let weight = match kind {
                TunnelingKind::U => wl,
                TunnelingKind::V => C64::new(1.0, 0.0),
                TunnelingKind::Uminus => wl,
            };
            let momentum = if kind == TunnelingKind::Uminus {
                -momentum
            } else {
                momentum
            };
            (momentum, weight)
        })
        .collect()
}

impl TunnelingPotential {
    pub fn new(kind: TunnelingKind) -> Self {
        Self {
            kind,
            fourier_modes: tunneling_momenta(kind),
        }
    }

    /// Pointwise evaluation through the stored modes.
    pub fn eval(&self, z: C64) -> C64 {
        self.fourier_modes
            .iter()
            .map(|&(k, w)| w * (C64::i() * pairing(z, k)).exp())
            .sum()
    }

    /// The defining trigonometric sum, kept as an independent reference.
    pub fn eval_defining_sum(&self, z: C64) -> C64 {
        let w = omega();
        let mut acc = C64::new(0.0, 0.0);
        let zz = if self.kind == TunnelingKind::Uminus { -z } else { z };
        for l in 0..3u32 {
            let wl = w.powu(l);
            let expo = (zz * wl.conj() - zz.conj() * wl) / 2.0;
            let weight = match self.kind {
                TunnelingKind::U | TunnelingKind::Uminus => wl,
                TunnelingKind::V => C64::new(1.0, 0.0),
            };
            acc += weight * expo.exp();
        }
        acc
    }
}

/// Convenience evaluation of a fresh potential of the given kind.
pub fn eval_tunneling(kind: TunnelingKind, z: C64) -> C64 {
    TunnelingPotential::new(kind).eval(z)
}

/// Magnetic vector potential A_con + A_per in complexified form
/// A₁ + iA₂ = (Bi/2)z + Σ_K A_K e^{i⟨z,K⟩}.
#[derive(Debug, Clone, Default)]
pub struct MagneticPotential {
    pub b: f64,
    pub per_coeffs: Vec<(C64, C64)>,
}

impl MagneticPotential {
    pub fn constant(b: f64) -> Self {
        Self {
            b,
            per_coeffs: Vec::new(),
        }
    }

    pub fn periodic(modes: Vec<(C64, C64)>) -> Result<Self> {
        Self::new(0.0, modes)
    }

    pub fn new(b: f64, modes: Vec<(C64, C64)>) -> Result<Self> {
        for &(k, _) in &modes {
            if k.norm() < 1e-12 {
                return Err(Error::InvalidParameter(
                    "periodic magnetic modes must have nonzero momentum".into(),
                ));
            }
        }
        Ok(Self {
            b,
            per_coeffs: modes,
        })
    }

    /// The field used in the band plots with periodic perturbation:
    /// A₁(z) = 2√3 cos(Im z), A₂ = 0, periodic on the λ = (3,3) superlattice.
    pub fn cosine_field() -> Self {
        let s3 = 3f64.sqrt();
        Self {
            b: 0.0,
            per_coeffs: vec![
                (C64::i(), C64::new(s3, 0.0)),
                (-C64::i(), C64::new(s3, 0.0)),
            ],
        }
    }

    pub fn eval(&self, z: C64) -> C64 {
        let mut a = 0.5 * self.b * C64::i() * z;
        for &(k, c) in &self.per_coeffs {
            a += c * (C64::i() * pairing(z, k)).exp();
        }
        a
    }

    pub fn eval_periodic(&self, z: C64) -> C64 {
        self.per_coeffs
            .iter()
            .map(|&(k, c)| c * (C64::i() * pairing(z, k)).exp())
            .sum()
    }

    pub fn has_periodic(&self) -> bool {
        !self.per_coeffs.is_empty()
    }

    /// Loads periodic modes from a plain-text file with lines
    /// "k_re k_im  A_re A_im" and '#' comments.
    pub fn load_periodic<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut modes = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let parts: Vec<f64> = body
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
                })
                .collect::<Result<_>>()?;
            if parts.len() != 4 {
                return Err(Error::Parse(format!(
                    "line {}: expected 4 numbers, got {}",
                    lineno + 1,
                    parts.len()
                )));
            }
            modes.push((C64::new(parts[0], parts[1]), C64::new(parts[2], parts[3])));
        }
        Self::new(0.0, modes)
    }
}

/// Periodic gauge scalar φ with 2i∂_z̄ φ = A_per, as Fourier modes.
///
/// Each periodic mode A_K e^{i⟨z,K⟩} contributes −(A_K/K) e^{i⟨z,K⟩}; the
/// normalization is pinned by the finite-difference derivative check in the
/// tests rather than taken on trust.
#[derive(Debug, Clone)]
pub struct GaugeScalar {
    pub modes: Vec<(C64, C64)>,
}

impl GaugeScalar {
    pub fn eval(&self, z: C64) -> C64 {
        self.modes
            .iter()
            .map(|&(k, c)| c * (C64::i() * pairing(z, k)).exp())
            .sum()
    }
}

pub fn gauge_phi(pot: &MagneticPotential) -> Result<GaugeScalar> {
    if pot.per_coeffs.is_empty() {
        return Ok(GaugeScalar { modes: Vec::new() });
    }
    let modes = pot
        .per_coeffs
        .iter()
        .map(|&(k, c)| (k, -c / k))
        .collect();
    Ok(GaugeScalar { modes })
}
