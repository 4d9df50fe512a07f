//! Exact magnetic zero modes on the torus, flat-band kernel assembly away
//! from and at magic angles, theta-function translates, and zero location
//! by plaquette winding numbers.

use crate::grid::{GridFunction, StencilOrder, Twist};
use crate::lattice::{omega, special_points, FluxSpec, Lattice};
use crate::linalg;
use crate::operators::fd::{self, FdChiral};
use crate::operators::pw::{chiral_dblock, PwSpace};
use crate::operators::translate::MagneticTranslationOp;
use crate::special::{f_multiplier, g_multiplier, sigma_tilde, SigmaParams, ThetaParams};
use crate::{C64, Error, Result};
use ndarray::{Array1, Array2};
use std::f64::consts::PI;

const DEFAULT_ORDER: StencilOrder = StencilOrder::O8;

/// Zero configuration of a magnetic kernel state: p zeros with prescribed
/// sum Z_p and exponential slope γ₁.
#[derive(Debug, Clone)]
pub struct ZeroConfig {
    pub p: u32,
    pub zeros: Vec<C64>,
    pub gamma1: C64,
    pub k: C64,
    pub flux: FluxSpec,
}

/// Z_p = (2πip/3)(λ₂ω² − λ₁ω) − ikp/B.
pub fn zero_sum(flux: &FluxSpec, k: C64) -> C64 {
    let w = omega();
    let (l1, l2) = (flux.lambda.0 as f64, flux.lambda.1 as f64);
    2.0 * PI * C64::i() * flux.p as f64 / 3.0 * (l2 * w * w - l1 * w)
        - C64::i() * k * flux.p as f64 / flux.b
}

/// γ₁ = ik/2 + iπB(λ₂−λ₁)/3.
pub fn gamma1(flux: &FluxSpec, k: C64) -> C64 {
    let (l1, l2) = (flux.lambda.0 as f64, flux.lambda.1 as f64);
    C64::i() * k / 2.0 + C64::i() * PI * flux.b * (l2 - l1) / 3.0
}

impl ZeroConfig {
    pub fn new(flux: FluxSpec, k: C64, zeros: Vec<C64>) -> Result<Self> {
        if zeros.len() != flux.p as usize {
            return Err(Error::InvalidParameter(format!(
                "need p = {} zeros, got {}",
                flux.p,
                zeros.len()
            )));
        }
        let sum: C64 = zeros.iter().sum();
        let zp = zero_sum(&flux, k);
        if (sum - zp).norm() > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "zero sum {sum} violates the constraint {zp}"
            )));
        }
        Ok(Self {
            p: flux.p,
            zeros,
            gamma1: gamma1(&flux, k),
            k,
            flux,
        })
    }

    /// Deterministic j-th basis configuration: p−1 zeros coincide at a fixed
    /// cell point w_j, the last is pinned by the sum constraint.
    pub fn canonical(lattice: &Lattice, flux: FluxSpec, k: C64, j: usize, attempt: usize) -> Result<Self> {
        let zp = zero_sum(&flux, k);
        let p = flux.p as usize;
        if p == 1 {
            return Self::new(flux, k, vec![zp]);
        }
        let s = (0.271 + 0.173 * j as f64 + 0.047 * attempt as f64).fract();
        let t = (0.613 + 0.211 * j as f64 + 0.031 * attempt as f64).fract();
        let w = lattice.cell_point(s, t);
        let mut zeros = vec![w; p - 1];
        zeros.push(zp - w * (p as f64 - 1.0));
        Self::new(flux, k, zeros)
    }

    /// Residual of the two boundary constraint equations
    /// γ₁v_j − i k v̄_j/2 + ipπ − (ξ_j/p) Z_p, j = 1, 2.
    pub fn constraint_residual(&self, params: &SigmaParams) -> f64 {
        let lat = params.lattice;
        let zp: C64 = self.zeros.iter().sum();
        let pf = self.p as f64;
        let mut worst = 0.0f64;
        for (vj, xij) in [(lat.v1, params.xi1), (lat.v2, params.xi2)] {
            let r = self.gamma1 * vj - C64::i() * self.k * vj.conj() / 2.0
                + C64::i() * PI * pf
                - xij / pf * zp;
            worst = worst.max(r.norm());
        }
        worst
    }
}

/// Evaluates u(z) = e^{−ikz̄/2} e^{B(z²−|z|²)/4} e^{γ₁z} Π σ̃(z−z_i) anywhere.
pub struct ZeroModeEvaluator {
    pub config: ZeroConfig,
    pub params: SigmaParams,
}

impl ZeroModeEvaluator {
    pub fn new(lattice: &Lattice, config: ZeroConfig) -> Result<Self> {
        let params = SigmaParams::with_flux(*lattice, config.flux)?;
        Ok(Self { config, params })
    }

    pub fn eval(&self, z: C64) -> C64 {
        let b = self.config.flux.b;
        let k = self.config.k;
        let mut g = (self.config.gamma1 * z).exp();
        for zi in &self.config.zeros {
            g *= sigma_tilde(z - zi, &self.params).expect("flux present");
        }
        let w = -C64::i() * k * z.conj() / 2.0 + b * (z * z - z.norm_sqr()) / 4.0;
        w.exp() * g
    }
}

/// An orthonormal list of grid states spanning a numerically certified
/// nullspace.
#[derive(Debug, Clone)]
pub struct KernelBasis {
    pub states: Vec<GridFunction>,
    pub dim: usize,
    pub residuals: Vec<f64>,
    pub gram_min_sv: f64,
    pub boundary_err: f64,
}

/// Modified Gram-Schmidt on grid functions with the cell inner product.
pub fn orthonormalize_states(states: &mut Vec<GridFunction>) {
    for j in 0..states.len() {
        for i in 0..j {
            let proj = states[i].inner(&states[j]);
            let si = states[i].clone();
            states[j].axpy(-proj, &si);
        }
        let nj = states[j].norm();
        if nj > 0.0 {
            states[j].scale(C64::new(1.0 / nj, 0.0));
        }
    }
}

fn gram_min_sv_states(states: &[GridFunction]) -> Result<f64> {
    let k = states.len();
    let mut g = Array2::<C64>::zeros((k, k));
    for i in 0..k {
        for j in 0..k {
            g[(i, j)] = states[i].inner(&states[j]);
        }
    }
    let s = linalg::singular_values(&g)?;
    Ok(s[0])
}

/// Exact kernel of the fiber a_k = a + k on the magnetic torus: p
/// orthonormalized states with application residuals, Gram certificate and
/// boundary-phase error.
pub fn kernel_a(lattice: &Lattice, flux: FluxSpec, k: C64, n: usize) -> Result<KernelBasis> {
    if flux.b <= 0.0 {
        return Err(Error::InvalidParameter(
            "kernel_a needs B > 0; use kernel_a_negative_b for the conjugate".into(),
        ));
    }
    let p = flux.p as usize;
    let twist = Twist::magnetic(flux.b, 1);
    let mut states = Vec::with_capacity(p);
    for attempt in 0..4 {
        states.clear();
        let mut boundary_err = 0.0f64;
        for j in 0..p {
            let config = ZeroConfig::canonical(lattice, flux, k, j, attempt)?;
            let ev = ZeroModeEvaluator::new(lattice, config)?;
            let g = GridFunction::sample_scalar(*lattice, n, twist.clone(), |z| ev.eval(z))
                .normalized();
            boundary_err = boundary_err.max(g.boundary_defect(0, |z| ev.eval(z)));
            states.push(g);
        }
        let gram = gram_min_sv_states(&states)?;
        if gram > 1e-6 {
            let raw_states = states.clone();
            orthonormalize_states(&mut states);
            let residuals: Vec<f64> = states
                .iter()
                .map(|u| fd::apply_a(u, k, None, DEFAULT_ORDER).norm() / u.norm())
                .collect();
            let _ = raw_states;
            return Ok(KernelBasis {
                dim: states.len(),
                residuals,
                gram_min_sv: gram,
                boundary_err,
                states,
            });
        }
    }
    Err(Error::InvalidParameter(
        "could not find an independent zero configuration set".into(),
    ))
}

/// Kernel of the conjugated operator 2D_z + conj(A) + conj(k) via
/// (Qu)(z) = conj(u(−z)); the returned grid functions carry the −B wrap
/// convention.
pub fn kernel_a_negative_b(
    lattice: &Lattice,
    flux: FluxSpec,
    k: C64,
    n: usize,
) -> Result<KernelBasis> {
    let base = (0..flux.p as usize)
        .map(|j| {
            let config = ZeroConfig::canonical(lattice, flux, k, j, 0)?;
            ZeroModeEvaluator::new(lattice, config)
        })
        .collect::<Result<Vec<_>>>()?;
    let twist = Twist::magnetic(-flux.b, 1);
    let mut states: Vec<GridFunction> = base
        .iter()
        .map(|ev| {
            GridFunction::sample_scalar(*lattice, n, twist.clone(), |z| ev.eval(-z).conj())
                .normalized()
        })
        .collect();
    let gram = gram_min_sv_states(&states)?;
    let boundary_err = states
        .iter()
        .zip(base.iter())
        .map(|(g, ev)| g.boundary_defect(0, |z| ev.eval(-z).conj()))
        .fold(0.0f64, f64::max);
    orthonormalize_states(&mut states);
    let residuals: Vec<f64> = states
        .iter()
        .map(|u| fd::apply_conjugated_op(u, flux.b, k, DEFAULT_ORDER).norm() / u.norm())
        .collect();
    Ok(KernelBasis {
        dim: states.len(),
        residuals,
        gram_min_sv: gram,
        boundary_err,
        states,
    })
}

/// Protected Dirac-point seeds u₁(α) ∈ ker(D_c(α,0)+k₀), u₂(α) ∈ ker(D_c(α,0))
/// tracked from α = 0 by smallest-singular-vector continuation.
#[derive(Debug, Clone)]
pub struct Seeds {
    pub alpha: f64,
    pub u1: Array1<C64>,
    pub u2: Array1<C64>,
    pub space: PwSpace,
    pub residual1: f64,
    pub residual2: f64,
    /// smallest singular value of the fiber restricted orthogonally to the
    /// tracked vector (simplicity certificate along the path)
    pub gap1: f64,
    pub gap2: f64,
}

pub fn continue_seeds(alpha_target: f64, steps: usize, n_trunc: usize) -> Result<Seeds> {
    let min_steps = (alpha_target / 0.05).ceil().max(1.0) as usize;
    if steps < min_steps {
        return Err(Error::InvalidParameter(format!(
            "need at least {min_steps} continuation steps for alpha = {alpha_target}"
        )));
    }
    let lattice = crate::lattice::make_lattice((1, 1))?;
    let k0 = special_points(&lattice).k0;
    let k_probe = C64::new(0.43, 0.21);
    let space = PwSpace::chiral(lattice, n_trunc, false);

    // α = 0 closed forms: u1 = e^{i<z,i>}(1,0)^T, u2 = (0,1)^T
    let dim = space.dim();
    let mut u1 = Array1::<C64>::zeros(dim);
    let mut u2 = Array1::<C64>::zeros(dim);
    u1[space
        .index_of(0, 1, 0, 0)
        .expect("origin mode present")] = C64::new(1.0, 0.0);
    u2[space
        .index_of(1, 0, 0, 0)
        .expect("origin mode present")] = C64::new(1.0, 0.0);
    let (mut g1, mut g2) = (f64::INFINITY, f64::INFINITY);
    let (mut r1, mut r2) = (0.0f64, 0.0);
    for step in 1..=steps {
        let alpha = alpha_target * step as f64 / steps as f64;
        // crossing probe at a generic momentum
        let (dp, _) = chiral_dblock(&lattice, n_trunc, alpha, k_probe, 1.0, None)?;
        let (smin_probe, _) = linalg::smallest_singular(&dp, 12)?;
        if smin_probe < 1e-4 {
            return Err(Error::ContinuationCrossing { alpha });
        }
        let last = step == steps;
        for (kshift, vec, gap, res) in [
            (k0, &mut u1, &mut g1, &mut r1),
            (C64::new(0.0, 0.0), &mut u2, &mut g2, &mut r2),
        ] {
            let (d, _) = chiral_dblock(&lattice, n_trunc, alpha, kshift, 1.0, None)?;
            let (smin, mut vnew) = linalg::smallest_singular(&d, 16)?;
            let overlap: C64 = vec.iter().zip(vnew.iter()).map(|(a, b)| a.conj() * b).sum();
            if overlap.norm() < 0.5 {
                return Err(Error::ContinuationCrossing { alpha });
            }
            let phase = overlap / overlap.norm();
            for x in vnew.iter_mut() {
                *x /= phase;
            }
            *vec = vnew;
            *res = smin;
            if last {
                // simplicity certificate: second singular value at the end
                let s = linalg::singular_values(&d)?;
                *gap = s[1];
            }
        }
    }
    Ok(Seeds {
        alpha: alpha_target,
        u1,
        u2,
        space,
        residual1: r1,
        residual2: r2,
        gap1: g1,
        gap2: g2,
    })
}

/// Evaluates a seed coefficient vector as a two-component grid function on
/// the magnetic cell, with the B = 0 chiral twist.
pub fn seed_to_grid(seeds: &Seeds, coeffs: &Array1<C64>, lattice: &Lattice, n: usize) -> GridFunction {
    let twist = fd::chiral_twist(lattice, 0.0);
    let mut g = GridFunction::zeros(*lattice, n, 2, twist);
    for i1 in 0..n {
        for i2 in 0..n {
            let z = g.point(i1, i2);
            let (id0, id1) = (g.idx(0, i1, i2), g.idx(1, i1, i2));
            g.data[id0] = seeds.space.eval_component(coeffs, 0, z);
            g.data[id1] = seeds.space.eval_component(coeffs, 1, z);
        }
    }
    g
}

/// Flat-band kernel away from magic angles: the 2p states
/// u₁(α)·ker(a_{k−k₀}) ⊕ u₂(α)·ker(a_k), orthonormalized with residual
/// certificates from the FD fiber application.
pub fn flatband_kernel(
    lattice: &Lattice,
    flux: FluxSpec,
    alpha1: f64,
    k: C64,
    seeds: &Seeds,
    n: usize,
) -> Result<KernelBasis> {
    if (seeds.alpha - alpha1).abs() > 1e-12 {
        return Err(Error::InvalidParameter(
            "seeds were continued to a different alpha".into(),
        ));
    }
    if seeds.residual1 > 1e-8 || seeds.residual2 > 1e-8 {
        return Err(Error::ResidualTooLarge {
            context: "seed residual".into(),
            got: seeds.residual1.max(seeds.residual2),
            tol: 1e-8,
        });
    }
    let k0 = special_points(lattice).k0;
    let u1g = seed_to_grid(seeds, &seeds.u1, lattice, n);
    let u2g = seed_to_grid(seeds, &seeds.u2, lattice, n);
    let ker_shifted = kernel_a(lattice, flux, k - k0, n)?;
    let ker_plain = kernel_a(lattice, flux, k, n)?;
    let twist = fd::chiral_twist(lattice, flux.b);
    let mut states = Vec::with_capacity(2 * flux.p as usize);
    for (seed, ker) in [(&u1g, &ker_shifted), (&u2g, &ker_plain)] {
        for eta in &ker.states {
            let mut st = GridFunction::zeros(*lattice, n, 2, twist.clone());
            for c in 0..2 {
                for i in 0..n * n {
                    st.data[c * n * n + i] = seed.data[c * n * n + i] * eta.data[i];
                }
            }
            states.push(st.normalized());
        }
    }
    let gram = gram_min_sv_states(&states)?;
    orthonormalize_states(&mut states);
    let op = FdChiral::new(*lattice, n, flux.b, alpha1, k, None, DEFAULT_ORDER);
    let residuals: Vec<f64> = states
        .iter()
        .map(|s| op.apply(s).norm() / s.norm())
        .collect();
    Ok(KernelBasis {
        dim: states.len(),
        residuals,
        gram_min_sv: gram,
        boundary_err: ker_shifted.boundary_err.max(ker_plain.boundary_err),
        states,
    })
}

fn masked_multiply(
    u: &GridFunction,
    f: impl Fn(C64) -> Result<C64>,
) -> (GridFunction, Vec<bool>) {
    let n = u.n;
    let mut out = u.clone();
    let mut mask = vec![false; n * n];
    for i1 in 0..n {
        for i2 in 0..n {
            let z = u.point(i1, i2);
            match f(z) {
                Ok(v) => {
                    for c in 0..u.ncomp {
                        let id = u.idx(c, i1, i2);
                        out.data[id] = u.data[id] * v;
                    }
                }
                Err(_) => {
                    mask[i1 * n + i2] = true;
                }
            }
        }
    }
    // nearest-neighbour infill for masked points
    let masked: Vec<usize> = mask
        .iter()
        .enumerate()
        .filter_map(|(i, &m)| m.then_some(i))
        .collect();
    for p in masked {
        let (i1, i2) = (p / n, p % n);
        for c in 0..u.ncomp {
            let mut acc = C64::new(0.0, 0.0);
            let mut cnt = 0;
            for (d1, d2) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
                let j1 = (i1 as i64 + d1).rem_euclid(n as i64) as usize;
                let j2 = (i2 as i64 + d2).rem_euclid(n as i64) as usize;
                if !mask[j1 * n + j2] {
                    acc += out.data[out.idx(c, j1, j2)];
                    cnt += 1;
                }
            }
            if cnt > 0 {
                let id = out.idx(c, i1, i2);
                out.data[id] = acc / cnt as f64;
            }
        }
    }
    (out, mask)
}

fn residual_excluding(num: &GridFunction, den: &GridFunction, mask: &[bool], reach: usize) -> f64 {
    let n = num.n;
    let mut excluded = vec![false; n * n];
    for p in 0..n * n {
        if mask[p] {
            let (i1, i2) = (p / n, p % n);
            for d1 in -(reach as i64)..=reach as i64 {
                for d2 in -(reach as i64)..=reach as i64 {
                    let j1 = (i1 as i64 + d1).rem_euclid(n as i64) as usize;
                    let j2 = (i2 as i64 + d2).rem_euclid(n as i64) as usize;
                    excluded[j1 * n + j2] = true;
                }
            }
        }
    }
    let mut num_acc = 0.0f64;
    let mut den_acc = 0.0f64;
    for c in 0..num.ncomp {
        for p in 0..n * n {
            if !excluded[p] {
                num_acc += num.data[c * n * n + p].norm_sqr();
                den_acc += den.data[c * n * n + p].norm_sqr();
            }
        }
    }
    (num_acc / den_acc.max(1e-300)).sqrt()
}

/// The q translates u_𝐩(z) = g_𝐩(z+z_S) u₀(z) of a Γ-periodic magic zero
/// mode over 𝐩 ∈ Γ*_mag/Γ*, with measured translation eigenphase errors.
pub fn up_translates(
    u0: &GridFunction,
    lattice: &Lattice,
    flux: &FluxSpec,
) -> Result<(Vec<GridFunction>, Vec<f64>)> {
    if flux.lambda != lattice.lambda {
        return Err(Error::InvalidParameter(
            "flux and lattice scaling parameters disagree".into(),
        ));
    }
    let theta = ThetaParams::new(omega(), 40)?;
    let zs = special_points(lattice).z_s;
    let (l1, l2) = lattice.lambda;
    let mut translates = Vec::new();
    let mut phase_errors = Vec::new();
    for p1 in 0..l1 {
        for p2 in 0..l2 {
            let pvec = lattice.eta1 * p1 as f64 / l1 as f64 + lattice.eta2 * p2 as f64 / l2 as f64;
            let (up, mask) = masked_multiply(u0, |z| g_multiplier(z + zs, pvec, &theta));
            let up = up.normalized();
            // measured eigenphase of the Γ-translation with the chiral
            // component phases against the predicted value
            let mut worst = 0.0f64;
            for (a1, a2) in [(1u32, 0u32), (0, 1)] {
                let op = MagneticTranslationOp::gamma_step(
                    (a1 as i32, a2 as i32),
                    0.0,
                    vec![omega().powu(a1 + a2), C64::new(1.0, 0.0)],
                );
                let tu = op.apply(&up)?;
                let predicted = (2.0
                    * PI
                    * C64::i()
                    * (p1 as f64 * a1 as f64 / l1 as f64 + p2 as f64 * a2 as f64 / l2 as f64))
                    .exp();
                // compare on unmasked bulk points
                let mut err = 0.0f64;
                let n = up.n;
                for pidx in 0..n * n {
                    if !mask[pidx] {
                        for c in 0..up.ncomp {
                            let want = predicted * up.data[c * n * n + pidx];
                            let got = tu.data[c * n * n + pidx];
                            if want.norm() > 1e-6 {
                                err = err.max((got - want).norm());
                            }
                        }
                    }
                }
                worst = worst.max(err);
            }
            phase_errors.push(worst);
            translates.push(up);
        }
    }
    Ok((translates, phase_errors))
}

/// v_k(z) = F_k(z+z_S) u₀(z); masked near the multiplier poles, with the
/// fiber residual measured away from the masked zone.
pub fn vk_from_u0(
    u0: &GridFunction,
    lattice: &Lattice,
    alpha1: f64,
    k: C64,
) -> Result<(GridFunction, f64)> {
    let theta = ThetaParams::new(omega(), 40)?;
    let zs = special_points(lattice).z_s;
    let (vk, mask) = masked_multiply(u0, |z| {
        let f = f_multiplier(z + zs, k, &theta)?;
        Ok(f)
    });
    let vk = vk.normalized();
    let op = FdChiral::new(*lattice, u0.n, 0.0, alpha1, k, None, DEFAULT_ORDER);
    let img = op.apply(&vk);
    let res = residual_excluding(&img, &vk, &mask, 6);
    Ok((vk, res))
}

/// Zeros of one component of a grid function by plaquette winding numbers,
/// with sub-grid refinement by a local linear fit. Returns (position,
/// multiplicity) pairs and is exact on the total count by construction.
pub fn zero_locate(u: &GridFunction, comp: usize) -> Result<Vec<(C64, i32)>> {
    let n = u.n;
    let maxabs = u
        .data
        .iter()
        .skip(comp * n * n)
        .take(n * n)
        .map(|v| v.norm())
        .fold(0.0f64, f64::max);
    let tiny = 1e-9 * maxabs;
    let corner = |i1: usize, i2: usize, d1: i64, d2: i64| u.shifted_value(comp, i1, i2, d1, d2);
    let arg_step = |a: C64, b: C64| -> f64 {
        let mut d = (b / a).arg();
        if d <= -PI {
            d += 2.0 * PI;
        }
        d
    };
    // plaquettes touching a near-zero corner get merged into 2x2 blocks
    let bad = |i1: usize, i2: usize| u.data[u.idx(comp, i1, i2)].norm() < tiny;
    let mut zeros = Vec::new();
    let mut consumed = vec![false; n * n];
    for i1 in 0..n {
        for i2 in 0..n {
            if bad(i1, i2) {
                // winding around the 2x2 block centered at this grid point
                let path: [(i64, i64); 8] = [
                    (-1, -1),
                    (0, -1),
                    (1, -1),
                    (1, 0),
                    (1, 1),
                    (0, 1),
                    (-1, 1),
                    (-1, 0),
                ];
                let vals: Vec<C64> = path
                    .iter()
                    .map(|&(d1, d2)| corner(i1, i2, d1, d2))
                    .collect();
                if vals.iter().any(|v| v.norm() < tiny) {
                    return Err(Error::GridIncompatible(
                        "zero cluster too large for plaquette subdivision".into(),
                    ));
                }
                let mut wsum = 0.0;
                for e in 0..8 {
                    wsum += arg_step(vals[e], vals[(e + 1) % 8]);
                }
                let w = (wsum / (2.0 * PI)).round() as i32;
                if w != 0 {
                    zeros.push((u.point(i1, i2), w));
                }
                for (d1, d2) in [(0i64, 0i64), (-1, 0), (0, -1), (-1, -1)] {
                    let j1 = (i1 as i64 + d1).rem_euclid(n as i64) as usize;
                    let j2 = (i2 as i64 + d2).rem_euclid(n as i64) as usize;
                    consumed[j1 * n + j2] = true;
                }
            }
        }
    }
    for i1 in 0..n {
        for i2 in 0..n {
            if consumed[i1 * n + i2] {
                continue;
            }
            let c00 = corner(i1, i2, 0, 0);
            let c10 = corner(i1, i2, 1, 0);
            let c11 = corner(i1, i2, 1, 1);
            let c01 = corner(i1, i2, 0, 1);
            let wsum = arg_step(c00, c10) + arg_step(c10, c11) + arg_step(c11, c01)
                + arg_step(c01, c00);
            let w = (wsum / (2.0 * PI)).round() as i32;
            if w != 0 {
                // local linear model u ≈ a + b δz + c δz̄ about the center
                let h1 = u.lattice.v1 / n as f64;
                let h2 = u.lattice.v2 / n as f64;
                let zc = u.point(i1, i2) + 0.5 * (h1 + h2);
                let pts = [
                    (-0.5 * h1 - 0.5 * h2, c00),
                    (0.5 * h1 - 0.5 * h2, c10),
                    (0.5 * h1 + 0.5 * h2, c11),
                    (-0.5 * h1 + 0.5 * h2, c01),
                ];
                let mut m = Array2::<C64>::zeros((4, 3));
                let mut rhs = Array1::<C64>::zeros(4);
                for (r, (dz, val)) in pts.iter().enumerate() {
                    m[(r, 0)] = C64::new(1.0, 0.0);
                    m[(r, 1)] = *dz;
                    m[(r, 2)] = dz.conj();
                    rhs[r] = *val;
                }
                // normal equations (3x3)
                let mt = m.mapv(|x| x.conj()).reversed_axes().to_owned();
                let ata = mt.dot(&m);
                let atb = mt.dot(&rhs);
                use ndarray_linalg::Solve;
                let pos = match ata.solve(&atb) {
                    Ok(cf) => {
                        let (a, b, c) = (cf[0], cf[1], cf[2]);
                        // solve b δ + c δ̄ = −a
                        let m11 = b.re + c.re;
                        let m12 = -b.im + c.im;
                        let m21 = b.im + c.im;
                        let m22 = b.re - c.re;
                        let det = m11 * m22 - m12 * m21;
                        if det.abs() > 1e-14 {
                            let x = (-a.re * m22 + a.im * m12) / det;
                            let y = (-m11 * a.im + m21 * a.re) / det;
                            let d = C64::new(x, y);
                            if d.norm() < (h1.norm() + h2.norm()) {
                                zc + d
                            } else {
                                zc
                            }
                        } else {
                            zc
                        }
                    }
                    Err(_) => zc,
                };
                zeros.push((pos, w));
            }
        }
    }
    Ok(zeros)
}

/// Total winding (sum of multiplicities) of the located zeros.
pub fn total_winding(zeros: &[(C64, i32)]) -> i32 {
    zeros.iter().map(|(_, w)| w).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{flux_spec, make_lattice};

    #[test]
    fn zero_sum_and_gamma_closed_forms() {
        let lat = make_lattice((1, 1)).unwrap();
        let flux = flux_spec(1, &lat).unwrap();
        let zp = zero_sum(&flux, C64::new(0.0, 0.0));
        assert!((zp - C64::new(2.0 * PI / 3f64.sqrt(), 0.0)).norm() < 1e-12);
        assert!(gamma1(&flux, C64::new(0.0, 0.0)).norm() < 1e-13);
        let k = C64::new(0.3, -0.2);
        assert!((gamma1(&flux, k) - C64::i() * k / 2.0).norm() < 1e-13);
        // general-k closed form from the remark
        let want = C64::new(2.0 * PI / 3f64.sqrt(), 0.0)
            - 4.0 * PI * C64::i() * k / (3.0 * 3f64.sqrt());
        assert!((zero_sum(&flux, k) - want).norm() < 1e-10);
    }

    #[test]
    fn constraint_closure_both_directions() {
        for (lambda, p) in [((1u32, 1u32), 1u32), ((1, 1), 2), ((2, 1), 1), ((2, 1), 3)] {
            let lat = make_lattice(lambda).unwrap();
            let flux = flux_spec(p, &lat).unwrap();
            let params = SigmaParams::with_flux(lat, flux).unwrap();
            let k = C64::new(0.21, 0.13);
            for j in 0..p as usize {
                let cfg = ZeroConfig::canonical(&lat, flux, k, j, 0).unwrap();
                assert!(
                    cfg.constraint_residual(&params) < 1e-10,
                    "lambda {lambda:?} p {p} j {j}"
                );
            }
        }
    }

    #[test]
    fn kernel_state_residual_p1() {
        let lat = make_lattice((1, 1)).unwrap();
        let flux = flux_spec(1, &lat).unwrap();
        let kb = kernel_a(&lat, flux, C64::new(0.0, 0.0), 64).unwrap();
        assert_eq!(kb.dim, 1);
        assert!(kb.residuals[0] < 1e-6, "residual {}", kb.residuals[0]);
        assert!(kb.boundary_err < 1e-8, "boundary {}", kb.boundary_err);
        // unique zero at 2π/√3
        let zeros = zero_locate(&kb.states[0], 0).unwrap();
        assert_eq!(total_winding(&zeros), 1);
        let expected = C64::new(2.0 * PI / 3f64.sqrt(), 0.0);
        let diff = lat.reduce_to_cell(zeros[0].0 - expected);
        let cell_h = lat.v1.norm() / 64.0;
        assert!(
            diff.norm() < 2.0 * cell_h,
            "zero at {}, expected {expected} mod lattice",
            zeros[0].0
        );
        assert!(zeros.iter().all(|&(_, w)| w > 0), "z-type zeros");
    }

    #[test]
    fn kernel_negative_b_conjugation() {
        let lat = make_lattice((1, 1)).unwrap();
        let flux = flux_spec(1, &lat).unwrap();
        let k = C64::new(0.1, 0.2);
        let kb = kernel_a_negative_b(&lat, flux, k, 64).unwrap();
        assert!(kb.residuals[0] < 1e-6, "residual {}", kb.residuals[0]);
        // Q is an involution and reflects the zero
        let orig = kernel_a(&lat, flux, k, 64).unwrap();
        let zeros_q = zero_locate(&kb.states[0], 0).unwrap();
        let zeros = zero_locate(&orig.states[0], 0).unwrap();
        let zq = lat.reduce_to_cell(zeros_q[0].0);
        let z = lat.reduce_to_cell(-zeros[0].0);
        assert!((zq - z).norm() < 3.0 * lat.v1.norm() / 64.0);
    }

    #[test]
    fn kernel_p2_independent_pair() {
        let lat = make_lattice((1, 1)).unwrap();
        let flux = flux_spec(2, &lat).unwrap();
        let kb = kernel_a(&lat, flux, C64::new(0.15, -0.08), 64).unwrap();
        assert_eq!(kb.dim, 2);
        assert!(kb.gram_min_sv > 1e-6);
        for r in &kb.residuals {
            assert!(*r < 1e-6, "residual {r}");
        }
        // winding counts p zeros for each state
        for s in &kb.states {
            let zeros = zero_locate(s, 0).unwrap();
            assert_eq!(total_winding(&zeros), 2);
        }
    }

    #[test]
    fn q_involution_exact() {
        let lat = make_lattice((1, 1)).unwrap();
        let n = 16;
        let tw = Twist::magnetic(0.7, 1);
        let g = GridFunction::sample_scalar(lat, n, tw, |z| C64::new(z.re * 0.3 + 1.0, z.im));
        // Q(Qu) = u pointwise on the evaluator level
        let q = |f: &dyn Fn(C64) -> C64, z: C64| f(-z).conj();
        let f = |z: C64| C64::new(z.re * 0.3 + 1.0, z.im);
        for i1 in 0..n {
            for i2 in 0..n {
                let z = g.point(i1, i2);
                let qq = q(&|w| q(&f, w), z);
                assert!((qq - f(z)).norm() < 1e-15);
            }
        }
    }
}
