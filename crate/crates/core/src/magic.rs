//! Magic-angle detection through the Birman–Schwinger operator, counting
//! statistics, and flat-band verification at candidate couplings.

use crate::lattice::Lattice;
use crate::linalg;
use crate::operators::pw::{self, chiral_dblock};
use crate::potentials::MagneticPotential;
use crate::{C64, Error, Result};
use serde::Serialize;

/// Sup-norm bound of the tunneling potential, the constant in the resolvent
/// tail estimate ‖B_N‖ ≤ C₁/N.
pub const TUNNELING_SUP: f64 = 3.0;

#[derive(Debug, Clone, Serialize)]
pub struct MagicAngle {
    pub re: f64,
    pub im: f64,
    pub mult: usize,
}

#[derive(Debug, Clone)]
pub struct MagicAngleSet {
    pub values: Vec<(C64, usize)>,
    pub radius: f64,
    pub truncation_n: usize,
    pub k_used: C64,
    /// flat-band smallest singular value at a sample momentum for each real
    /// value, as an independent confirmation
    pub residual_bound: f64,
}

impl MagicAngleSet {
    /// Cumulative count (with multiplicities) within radius r.
    pub fn count_within(&self, r: f64) -> usize {
        self.values
            .iter()
            .filter(|(a, _)| a.norm() <= r)
            .map(|(_, m)| m)
            .sum()
    }

    pub fn real_values(&self) -> Vec<f64> {
        self.values
            .iter()
            .filter(|(a, _)| a.im.abs() < 1e-6)
            .map(|(a, _)| a.re)
            .collect()
    }
}

/// All magic couplings with |α| ≤ radius from the spectrum of the
/// Birman–Schwinger operator at quasi-momentum k.
pub fn magic_angles(
    lattice: &Lattice,
    radius: f64,
    n_trunc: usize,
    k: C64,
    a_per: Option<&MagneticPotential>,
) -> Result<MagicAngleSet> {
    if radius * TUNNELING_SUP / n_trunc as f64 >= 0.5 {
        return Err(Error::Truncation(format!(
            "truncation N = {n_trunc} too small for radius {radius}: needs N > {}",
            (2.0 * radius * TUNNELING_SUP).ceil()
        )));
    }
    let c = pw::bs_product(lattice, n_trunc, k, a_per)?;
    let eigs = linalg::eigvals(&c)?;
    // mu^2 eigenvalues of C with |1/mu| <= radius give alphas ±1/sqrt
    let mut alphas: Vec<C64> = Vec::new();
    let thresh = 1.0 / (radius * radius);
    for lam in eigs.iter() {
        if lam.norm() >= thresh {
            let mu = lam.sqrt();
            for a in [1.0 / mu, -1.0 / mu] {
                alphas.push(a);
            }
        }
    }
    // cluster by distance 1e-6
    alphas.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
    let mut clustered: Vec<(C64, usize)> = Vec::new();
    'outer: for a in alphas {
        for (v, m) in clustered.iter_mut() {
            if (*v - a).norm() < 1e-6 {
                *v = (*v * *m as f64 + a) / (*m as f64 + 1.0);
                *m += 1;
                continue 'outer;
            }
        }
        clustered.push((a, 1));
    }
    clustered.sort_by(|(a, _), (b, _)| {
        (a.norm(), a.arg())
            .partial_cmp(&(b.norm(), b.arg()))
            .unwrap()
    });
    // confirm real values by a flat-band probe at a generic momentum
    let mut residual_bound = 0.0f64;
    let k_probe = C64::new(0.37, 0.19);
    for (a, _) in clustered.iter().filter(|(a, _)| a.im.abs() < 1e-6) {
        let (d, _) = chiral_dblock(lattice, n_trunc.min(12), a.re, k_probe, 1.0, None)?;
        let (smin, _) = linalg::smallest_singular(&d, 10)?;
        residual_bound = residual_bound.max(smin);
    }
    Ok(MagicAngleSet {
        values: clustered,
        radius,
        truncation_n: n_trunc,
        k_used: k,
        residual_bound,
    })
}

/// Polishes a real magic angle by ternary search on the smallest singular
/// value of the zero-field chiral fiber at a generic momentum.
pub fn refine_real_magic(alpha0: f64, n_trunc: usize, half_width: f64) -> Result<f64> {
    let lattice = crate::lattice::make_lattice((1, 1))?;
    let k_probe = C64::new(0.43, 0.21);
    let f = |alpha: f64| -> Result<f64> {
        let (d, _) = chiral_dblock(&lattice, n_trunc, alpha, k_probe, 1.0, None)?;
        Ok(linalg::smallest_singular(&d, 10)?.0)
    };
    let (mut lo, mut hi) = (alpha0 - half_width, alpha0 + half_width);
    for _ in 0..60 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1)? < f(m2)? {
            hi = m2;
        } else {
            lo = m1;
        }
        if hi - lo < 1e-9 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Shift-inverted refinement of one Birman–Schwinger eigenvalue near a
/// guess, for truncation-stability checks at large N without a full
/// eigendecomposition.
pub fn bs_eigenvalue_near(
    lattice: &Lattice,
    n_trunc: usize,
    k: C64,
    guess_alpha: f64,
    a_per: Option<&MagneticPotential>,
) -> Result<f64> {
    use ndarray_linalg::{Factorize, Solve};
    let c = pw::bs_product(lattice, n_trunc, k, a_per)?;
    let dim = c.nrows();
    let mu2 = 1.0 / (guess_alpha * guess_alpha);
    let mut shifted = c.clone();
    for i in 0..dim {
        shifted[(i, i)] -= C64::new(mu2, 0.0);
    }
    let lu = shifted.factorize()?;
    let mut v = ndarray::Array1::from_iter(
        (0..dim).map(|j| C64::new(1.0 + (j as f64 * 0.37).sin(), (j as f64 * 0.71).cos())),
    );
    let mut lam = C64::new(mu2, 0.0);
    for _ in 0..30 {
        let w = lu.solve(&v).map_err(|e| Error::Linalg(e.to_string()))?;
        let nw = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        v = w.mapv(|x| x / nw);
        // Rayleigh quotient against C
        let cv = c.dot(&v);
        lam = v.iter().zip(cv.iter()).map(|(a, b)| a.conj() * b).sum();
    }
    let mu = lam.sqrt();
    let alpha = 1.0 / mu;
    if alpha.im.abs() > 1e-6 {
        return Err(Error::Linalg(format!(
            "refined eigenvalue is not real: {alpha}"
        )));
    }
    Ok(alpha.re.abs() * guess_alpha.signum())
}

/// Least-squares quadratic fit of the cumulative magic-angle count.
pub fn counting_fit(
    set: &MagicAngleSet,
    radii: &[f64],
) -> Result<(Vec<f64>, f64, Vec<(f64, usize)>)> {
    if set.values.is_empty() {
        return Err(Error::InvalidParameter("empty magic-angle set".into()));
    }
    if radii.len() < 4 {
        return Err(Error::InvalidParameter(
            "need at least four radii for the quadratic fit".into(),
        ));
    }
    for &r in radii {
        if r > set.radius + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "radius {r} outside the validated range {}",
                set.radius
            )));
        }
    }
    let counts: Vec<(f64, usize)> = radii.iter().map(|&r| (r, set.count_within(r))).collect();
    let x: Vec<f64> = counts.iter().map(|(r, _)| *r).collect();
    let y: Vec<f64> = counts.iter().map(|(_, c)| *c as f64).collect();
    let (coeff, r2) = linalg::polyfit(&x, &y, 2)?;
    Ok((coeff, r2, counts))
}

/// Smallest singular value (and the largest, as the scale) of the assembled
/// chiral fiber at each sample momentum, for a possibly complex coupling.
pub fn verify_magic(
    lattice: &Lattice,
    alpha: C64,
    k_samples: &[C64],
    n_trunc: usize,
) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(k_samples.len());
    for &k in k_samples {
        let d = chiral_dblock_complex(lattice, n_trunc, alpha, k)?;
        let (smin, _) = linalg::smallest_singular(&d, 10)?;
        let smax = linalg::singular_values(&d)?.last().copied().unwrap_or(1.0);
        out.push((smin, smax));
    }
    Ok(out)
}

/// Chiral D-block with complex coupling, for complex magic-angle probes.
fn chiral_dblock_complex(
    lattice: &Lattice,
    n_trunc: usize,
    alpha: C64,
    k: C64,
) -> Result<ndarray::Array2<C64>> {
    use crate::potentials::{tunneling_momenta, TunnelingKind};
    let space = pw::PwSpace::chiral(*lattice, n_trunc, false);
    let dim = space.dim();
    let mut m = ndarray::Array2::<C64>::zeros((dim, dim));
    for comp in 0..2 {
        space.scatter_diag(comp, |q| q + k, &mut |r, c, v| m[(r, c)] += v);
    }
    for (kk, w) in tunneling_momenta(TunnelingKind::U) {
        space.scatter_mode(0, 1, kk, alpha * w, &mut |r, c, v| m[(r, c)] += v)?;
    }
    for (kk, w) in tunneling_momenta(TunnelingKind::Uminus) {
        space.scatter_mode(1, 0, kk, alpha * w, &mut |r, c, v| m[(r, c)] += v)?;
    }
    Ok(m)
}
