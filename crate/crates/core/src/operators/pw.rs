//! Plane-wave discretization on the moiré torus.
//!
//! Basis functions are e^{i⟨z,Q⟩} with Q = m₁η₁ + m₂η₂ + T·i, |m|∞ ≤ N. The
//! integer T encodes both the ω-graded boundary twist of each spinor
//! component (offset i for twisted components) and, when periodic potentials
//! with momenta outside Γ* are present, the extra cosets ±i of Γ*/3. The
//! identity 3i = −(η₁+η₂) folds coset overflow back into the m-indices.

use crate::lattice::{pairing, Lattice};
use crate::potentials::{tunneling_momenta, MagneticPotential, TunnelingKind};
use crate::{C64, Error, Result};
use ndarray::{Array1, Array2};
use ndarray_linalg::Solve;

/// One truncated momentum space with per-component twist offsets.
#[derive(Debug, Clone)]
pub struct PwSpace {
    pub lattice: Lattice,
    pub n: i64,
    pub cosets: Vec<i32>,
    pub comp_offsets: Vec<i32>,
}

impl PwSpace {
    pub fn new(lattice: Lattice, n_trunc: usize, cosets: Vec<i32>, comp_offsets: Vec<i32>) -> Self {
        Self {
            lattice,
            n: n_trunc as i64,
            cosets,
            comp_offsets,
        }
    }

    /// Chiral 2-spinor space: first component twisted (offset i).
    pub fn chiral(lattice: Lattice, n_trunc: usize, with_cosets: bool) -> Self {
        let cosets = if with_cosets { vec![-1, 0, 1] } else { vec![0] };
        Self::new(lattice, n_trunc, cosets, vec![1, 0])
    }

    pub fn side(&self) -> i64 {
        2 * self.n + 1
    }

    pub fn dim_comp(&self) -> usize {
        self.cosets.len() * (self.side() * self.side()) as usize
    }

    pub fn dim(&self) -> usize {
        self.comp_offsets.len() * self.dim_comp()
    }

    pub fn index(&self, comp: usize, ci: usize, m1: i64, m2: i64) -> usize {
        let s = self.side();
        comp * self.dim_comp()
            + ((ci as i64 * s + (m1 + self.n)) * s + (m2 + self.n)) as usize
    }

    /// Index of the element with physical momentum m·η + t_total·i, if inside
    /// the truncation. Coset overflow is folded through 3i = −(η₁+η₂).
    pub fn index_of(&self, comp: usize, t_total: i32, m1: i64, m2: i64) -> Option<usize> {
        let base = t_total - self.comp_offsets[comp];
        for r in [0i64, 1, -1] {
            let t = base - 3 * r as i32;
            if let Some(ci) = self.cosets.iter().position(|&c| c == t) {
                let mm1 = m1 - r;
                let mm2 = m2 - r;
                if mm1.abs() <= self.n && mm2.abs() <= self.n {
                    return Some(self.index(comp, ci, mm1, mm2));
                }
                return None;
            }
        }
        None
    }

    /// Physical momentum of a basis element.
    pub fn momentum(&self, comp: usize, ci: usize, m1: i64, m2: i64) -> C64 {
        let t = (self.cosets[ci] + self.comp_offsets[comp]) as f64;
        self.lattice.eta1 * m1 as f64 + self.lattice.eta2 * m2 as f64 + C64::new(0.0, t)
    }

    pub fn for_each(&self, comp: usize, mut f: impl FnMut(usize, usize, i64, i64, C64)) {
        for ci in 0..self.cosets.len() {
            for m1 in -self.n..=self.n {
                for m2 in -self.n..=self.n {
                    let idx = self.index(comp, ci, m1, m2);
                    f(idx, ci, m1, m2, self.momentum(comp, ci, m1, m2));
                }
            }
        }
    }

    /// Decomposes a momentum as m·η + T·i with integer coefficients,
    /// preferring the representative with smallest |T|.
    pub fn decompose(lattice: &Lattice, k: C64) -> Option<(i32, i64, i64)> {
        for t in [0i32, 1, -1, 2, -2] {
            let v = k - C64::new(0.0, t as f64);
            let s1 = pairing(lattice.zeta1, v) / (2.0 * std::f64::consts::PI);
            let s2 = pairing(lattice.zeta2, v) / (2.0 * std::f64::consts::PI);
            if (s1 - s1.round()).abs() < 1e-9 && (s2 - s2.round()).abs() < 1e-9 {
                return Some((t, s1.round() as i64, s2.round() as i64));
            }
        }
        None
    }

    /// Scatters a multiplication mode weight·e^{i⟨z,K⟩} mapping component
    /// `from` to component `to` into the sink as (row, col, weight) triplets.
    pub fn scatter_mode(
        &self,
        to: usize,
        from: usize,
        shift: C64,
        weight: C64,
        sink: &mut impl FnMut(usize, usize, C64),
    ) -> Result<()> {
        let (dt, dm1, dm2) = Self::decompose(&self.lattice, shift).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "mode momentum {shift} is not on the coset lattice"
            ))
        })?;
        self.for_each(from, |col, ci, m1, m2, _| {
            let t_total = self.cosets[ci] + self.comp_offsets[from] + dt;
            if let Some(row) = self.index_of(to, t_total, m1 + dm1, m2 + dm2) {
                sink(row, col, weight);
            }
        });
        Ok(())
    }

    /// Scatters a diagonal symbol f(Q) on one component.
    pub fn scatter_diag(
        &self,
        comp: usize,
        f: impl Fn(C64) -> C64,
        sink: &mut impl FnMut(usize, usize, C64),
    ) {
        self.for_each(comp, |idx, _, _, _, q| sink(idx, idx, f(q)));
    }

    /// Evaluates a coefficient vector on grid point z for one component.
    pub fn eval_component(&self, coeffs: &Array1<C64>, comp: usize, z: C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        self.for_each(comp, |idx, _, _, _, q| {
            acc += coeffs[idx] * (C64::i() * pairing(z, q)).exp();
        });
        acc
    }
}

/// Whether a periodic potential forces the extra ±i cosets.
pub fn needs_cosets(lattice: &Lattice, a_per: Option<&MagneticPotential>) -> bool {
    if let Some(a) = a_per {
        for &(k, _) in &a.per_coeffs {
            match PwSpace::decompose(lattice, k) {
                Some((0, _, _)) => {}
                _ => return true,
            }
        }
    }
    false
}

fn add_tunneling(
    space: &PwSpace,
    to: usize,
    from: usize,
    kind: TunnelingKind,
    coupling: C64,
    conjugated: bool,
    sink: &mut impl FnMut(usize, usize, C64),
) -> Result<()> {
    for (k, w) in tunneling_momenta(kind) {
        let (shift, weight) = if conjugated {
            (-k, w.conj())
        } else {
            (k, w)
        };
        space.scatter_mode(to, from, shift, coupling * weight, sink)?;
    }
    Ok(())
}

fn add_a_per(
    space: &PwSpace,
    comp: usize,
    a_per: Option<&MagneticPotential>,
    conjugated: bool,
    scale: C64,
    sink: &mut impl FnMut(usize, usize, C64),
) -> Result<()> {
    if let Some(a) = a_per {
        for &(k, c) in &a.per_coeffs {
            let (shift, coeff) = if conjugated { (-k, c.conj()) } else { (k, c) };
            space.scatter_mode(comp, comp, shift, -scale * coeff, sink)?;
        }
    }
    Ok(())
}

/// Emits the entries of the chiral D-block [[θ(a+k), αU],[αU₋, θ(a+k)]]
/// with a = 2D_z̄ − A_per into a sink; θ = 1 gives the plain chiral model,
/// θ < 1 the tight-binding/semiclassical scalings.
pub fn chiral_entries(
    space: &PwSpace,
    alpha1: f64,
    k: C64,
    theta: f64,
    a_per: Option<&MagneticPotential>,
    sink: &mut impl FnMut(usize, usize, C64),
) -> Result<()> {
    for comp in 0..2 {
        space.scatter_diag(comp, |q| theta * (q + k), sink);
        add_a_per(space, comp, a_per, false, C64::new(1.0, 0.0), sink)?;
    }
    let alpha = C64::new(alpha1, 0.0);
    add_tunneling(space, 0, 1, TunnelingKind::U, alpha, false, sink)?;
    add_tunneling(space, 1, 0, TunnelingKind::Uminus, alpha, false, sink)?;
    Ok(())
}

/// Dense chiral D-block; see `chiral_entries`.
pub fn chiral_dblock(
    lattice: &Lattice,
    n_trunc: usize,
    alpha1: f64,
    k: C64,
    theta: f64,
    a_per: Option<&MagneticPotential>,
) -> Result<(Array2<C64>, PwSpace)> {
    let space = PwSpace::chiral(*lattice, n_trunc, needs_cosets(lattice, a_per));
    let dim = space.dim();
    let mut m = Array2::<C64>::zeros((dim, dim));
    chiral_entries(&space, alpha1, k, theta, a_per, &mut |r, c, v| {
        m[(r, c)] += v
    })?;
    Ok((m, space))
}

/// Anti-chiral D-block [[α₀V, e^{iθ/2}(a+k)],[e^{iθ/2}(a*+k̄), α₀V̄]]; maps
/// the domain space (offsets 0, i) to the range space (offsets i, 0).
pub fn antichiral_dblock(
    lattice: &Lattice,
    n_trunc: usize,
    alpha0: f64,
    theta: f64,
    k: C64,
    a_per: Option<&MagneticPotential>,
) -> Result<(Array2<C64>, PwSpace, PwSpace)> {
    let with_cosets = needs_cosets(lattice, a_per);
    let cosets = if with_cosets { vec![-1, 0, 1] } else { vec![0] };
    let domain = PwSpace::new(*lattice, n_trunc, cosets.clone(), vec![0, 1]);
    let range = PwSpace::new(*lattice, n_trunc, cosets, vec![1, 0]);
    let dim = domain.dim();
    let mut m = Array2::<C64>::zeros((dim, dim));
    let phase = (C64::i() * theta / 2.0).exp();
    let alpha = C64::new(alpha0, 0.0);

    // rows live in `range`; map column elements of `domain` by momentum
    let mut add_block = |to: usize,
                         from: usize,
                         shift: C64,
                         weight_of: &dyn Fn(C64) -> C64|
     -> Result<()> {
        let (dt, dm1, dm2) = PwSpace::decompose(lattice, shift).ok_or_else(|| {
            Error::InvalidParameter(format!("mode momentum {shift} off-lattice"))
        })?;
        domain.for_each(from, |col, ci, m1, m2, q| {
            let t_total = domain.cosets[ci] + domain.comp_offsets[from] + dt;
            if let Some(row) = range.index_of(to, t_total, m1 + dm1, m2 + dm2) {
                m[(row, col)] += weight_of(q);
            }
        });
        Ok(())
    };

    // r1 = α₀ V g₁ + e^{iθ/2}(a+k) g₂
    for (kk, w) in tunneling_momenta(TunnelingKind::V) {
        add_block(0, 0, kk, &|_q| alpha * w)?;
    }
    add_block(0, 1, C64::new(0.0, 0.0), &|q| phase * (q + k))?;
    if let Some(a) = a_per {
        for &(kk, c) in &a.per_coeffs {
            add_block(0, 1, kk, &|_q| -phase * c)?;
        }
    }
    // r2 = e^{iθ/2}(a*+k̄) g₁ + α₀ V̄ g₂
    add_block(1, 0, C64::new(0.0, 0.0), &|q| phase * (q.conj() + k.conj()))?;
    if let Some(a) = a_per {
        for &(kk, c) in &a.per_coeffs {
            add_block(1, 0, -kk, &|_q| -phase * c.conj())?;
        }
    }
    for (kk, w) in tunneling_momenta(TunnelingKind::V) {
        add_block(1, 1, -kk, &|_q| alpha * w.conj())?;
    }
    Ok((m, domain, range))
}

/// Hermitian block [[0, D†],[D, 0]] from a D-block.
pub fn hermitian_from_dblock(d: &Array2<C64>) -> Array2<C64> {
    let n = d.nrows();
    let mut h = Array2::<C64>::zeros((2 * n, 2 * n));
    for i in 0..n {
        for j in 0..n {
            h[(n + i, j)] = d[(i, j)];
            h[(j, n + i)] = d[(i, j)].conj();
        }
    }
    h
}

pub fn hermitian_chiral(
    lattice: &Lattice,
    n_trunc: usize,
    alpha1: f64,
    k: C64,
    a_per: &MagneticPotential,
) -> Result<Array2<C64>> {
    let ap = if a_per.has_periodic() { Some(a_per) } else { None };
    let (d, _) = chiral_dblock(lattice, n_trunc, alpha1, k, 1.0, ap)?;
    Ok(hermitian_from_dblock(&d))
}

pub fn hermitian_antichiral(
    lattice: &Lattice,
    n_trunc: usize,
    alpha0: f64,
    theta: f64,
    k: C64,
    a_per: &MagneticPotential,
) -> Result<Array2<C64>> {
    let ap = if a_per.has_periodic() { Some(a_per) } else { None };
    let (d, _, _) = antichiral_dblock(lattice, n_trunc, alpha0, theta, k, ap)?;
    Ok(hermitian_from_dblock(&d))
}

/// Full 4-component Hamiltonian [[H_D, T],[T†, H_D]] with H_D = [[0,a*],[a,0]]
/// and T = [[α₀V, α₁Ū₋],[α₁U, α₀V]].
pub fn hermitian_full(
    lattice: &Lattice,
    n_trunc: usize,
    alpha0: f64,
    alpha1: f64,
    k: C64,
    a_per: &MagneticPotential,
) -> Result<Array2<C64>> {
    let ap = if a_per.has_periodic() { Some(a_per) } else { None };
    let with_cosets = needs_cosets(lattice, ap);
    let cosets = if with_cosets { vec![-1, 0, 1] } else { vec![0] };
    let space = PwSpace::new(*lattice, n_trunc, cosets, vec![1, 1, 0, 0]);
    let dim = space.dim();
    let mut m = Array2::<C64>::zeros((dim, dim));
    let a0 = C64::new(alpha0, 0.0);
    let a1 = C64::new(alpha1, 0.0);
    let w = crate::lattice::omega();

    // H_D blocks: (0<-1) a* + k̄, (1<-0) a + k, (2<-3) a* + k̄, (3<-2) a + k
    for (to, from, star) in [(0usize, 1usize, true), (1, 0, false), (2, 3, true), (3, 2, false)] {
        let mut diag_entries: Vec<(usize, usize, C64)> = Vec::new();
        space.for_each(from, |col, ci, m1, m2, q| {
            let t_total = space.cosets[ci] + space.comp_offsets[from];
            if let Some(row) = space.index_of(to, t_total, m1, m2) {
                let val = if star { q.conj() + k.conj() } else { q + k };
                diag_entries.push((row, col, val));
            }
        });
        for (r, c, v) in diag_entries {
            m[(r, c)] += v;
        }
        // periodic part couples the same component pair as the derivative
        if let Some(a) = ap {
            for &(kk2, c) in &a.per_coeffs {
                let (shift, coeff) = if star { (-kk2, c.conj()) } else { (kk2, c) };
                space.scatter_mode(to, from, shift, -coeff, &mut |r, c2, v| m[(r, c2)] += v)?;
            }
        }
    }
    // T block: rows (0,1) from cols (2,3)
    for (kk, wl) in tunneling_momenta(TunnelingKind::V) {
        space.scatter_mode(0, 2, kk, a0 * wl, &mut |r, c, v| m[(r, c)] += v)?;
        space.scatter_mode(1, 3, kk, a0 * wl, &mut |r, c, v| m[(r, c)] += v)?;
    }
    for l in 0..3u32 {
        let kl = C64::i() * w.powu(l);
        let wl = w.powu(l);
        space.scatter_mode(0, 3, kl, a1 * wl.conj(), &mut |r, c, v| m[(r, c)] += v)?; // α₁ conj(U₋)
        space.scatter_mode(1, 2, kl, a1 * wl, &mut |r, c, v| m[(r, c)] += v)?; // α₁ U
    }
    // T† block: rows (2,3) from cols (0,1)
    for (kk, wl) in tunneling_momenta(TunnelingKind::V) {
        space.scatter_mode(2, 0, -kk, a0 * wl.conj(), &mut |r, c, v| m[(r, c)] += v)?;
        space.scatter_mode(3, 1, -kk, a0 * wl.conj(), &mut |r, c, v| m[(r, c)] += v)?;
    }
    for l in 0..3u32 {
        let kl = C64::i() * w.powu(l);
        let wl = w.powu(l);
        space.scatter_mode(2, 1, -kl, a1 * wl.conj(), &mut |r, c, v| m[(r, c)] += v)?; // α₁ Ū
        space.scatter_mode(3, 0, -kl, a1 * wl, &mut |r, c, v| m[(r, c)] += v)?; // α₁ U₋
    }
    Ok(m)
}

/// Pure magnetic-free Dirac fiber [[0, a+k],[a*+k̄, 0]] on untwisted scalars.
pub fn hermitian_dirac(
    lattice: &Lattice,
    n_trunc: usize,
    k: C64,
    a_per: &MagneticPotential,
) -> Result<Array2<C64>> {
    let ap = if a_per.has_periodic() { Some(a_per) } else { None };
    let with_cosets = needs_cosets(lattice, ap);
    let cosets = if with_cosets { vec![-1, 0, 1] } else { vec![0] };
    let space = PwSpace::new(*lattice, n_trunc, cosets, vec![0]);
    let dim = space.dim();
    let mut d = Array2::<C64>::zeros((dim, dim));
    let mut sink = |r: usize, c: usize, v: C64| d[(r, c)] += v;
    space.scatter_diag(0, |q| q + k, &mut sink);
    add_a_per(&space, 0, ap, false, C64::new(1.0, 0.0), &mut sink)?;
    Ok(hermitian_from_dblock(&d))
}

/// Free-fiber eigenvalue oracle: ±|Q + k| over the chiral basis momenta.
pub fn free_dirac_spectrum(lattice: &Lattice, n_trunc: usize, k: C64) -> Vec<f64> {
    let space = PwSpace::chiral(*lattice, n_trunc, false);
    let mut vals = Vec::with_capacity(2 * space.dim());
    for comp in 0..2 {
        space.for_each(comp, |_, _, _, _, q| {
            let e = (q + k).norm();
            vals.push(e);
            vals.push(-e);
        });
    }
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

/// Full Birman–Schwinger matrix T_k = (2D_z̄ − A_per + k)⁻¹ (0 U; U₋ 0) on
/// the twisted 2-component space.
pub fn bs_matrix(
    lattice: &Lattice,
    n_trunc: usize,
    k: C64,
    a_per: Option<&MagneticPotential>,
) -> Result<Array2<C64>> {
    let space = PwSpace::chiral(*lattice, n_trunc, needs_cosets(lattice, a_per));
    let dim = space.dim();
    // tunneling block
    let mut tun = Array2::<C64>::zeros((dim, dim));
    let mut sink = |r: usize, c: usize, v: C64| tun[(r, c)] += v;
    add_tunneling(&space, 0, 1, TunnelingKind::U, C64::new(1.0, 0.0), false, &mut sink)?;
    add_tunneling(&space, 1, 0, TunnelingKind::Uminus, C64::new(1.0, 0.0), false, &mut sink)?;

    // resolvent factor
    let mut res_diag = Array1::<C64>::zeros(dim);
    let mut resonant: Option<C64> = None;
    for comp in 0..2 {
        space.for_each(comp, |idx, _, _, _, q| {
            let d = q + k;
            if d.norm() < 1e-8 && resonant.is_none() {
                resonant = Some(q);
            }
            res_diag[idx] = d;
        });
    }
    if let Some(q) = resonant {
        return Err(Error::Resonance(format!(
            "momentum {q} resonates with k = {k}"
        )));
    }
    if a_per.is_none() {
        for i in 0..dim {
            let ri = 1.0 / res_diag[i];
            for j in 0..dim {
                tun[(i, j)] *= ri;
            }
        }
        return Ok(tun);
    }
    // dense resolvent for periodic potentials: solve (deriv − A_per + k) T = tun
    let mut op = Array2::<C64>::zeros((dim, dim));
    for i in 0..dim {
        op[(i, i)] = res_diag[i];
    }
    let mut sink_op = |r: usize, c: usize, v: C64| op[(r, c)] += v;
    for comp in 0..2 {
        add_a_per(&space, comp, a_per, false, C64::new(1.0, 0.0), &mut sink_op)?;
    }
    let mut out = Array2::<C64>::zeros((dim, dim));
    for j in 0..dim {
        let col = tun.column(j).to_owned();
        let sol = op
            .solve(&col)
            .map_err(|e| Error::Linalg(format!("BS resolvent solve: {e}")))?;
        out.column_mut(j).assign(&sol);
    }
    Ok(out)
}

/// Half-size Birman–Schwinger product C = R₁ U R₂ U₋ acting on the first
/// spinor component; Spec(T_k) \ {0} = ±√Spec(C).
pub fn bs_product(
    lattice: &Lattice,
    n_trunc: usize,
    k: C64,
    a_per: Option<&MagneticPotential>,
) -> Result<Array2<C64>> {
    let with_cosets = needs_cosets(lattice, a_per);
    let space = PwSpace::chiral(*lattice, n_trunc, with_cosets);
    let dc = space.dim_comp();
    if a_per.is_none() {
        // sparse path composition: entry over tunneling mode pairs
        let modes_u = tunneling_momenta(TunnelingKind::U);
        let modes_um = tunneling_momenta(TunnelingKind::Uminus);
        let mut c = Array2::<C64>::zeros((dc, dc));
        // source element (comp0) -> U₋ -> comp1 intermediate -> U -> comp0
        space.for_each(0, |col, ci, m1, m2, q| {
            for (kb, wb) in &modes_um {
                let (dtb, d1b, d2b) = PwSpace::decompose(lattice, *kb).unwrap();
                let tmid = space.cosets[ci] + space.comp_offsets[0] + dtb;
                if space.index_of(1, tmid, m1 + d1b, m2 + d2b).is_some() {
                    let qmid = q + kb;
                    let rmid = qmid + k;
                    if rmid.norm() < 1e-8 {
                        continue;
                    }
                    for (ka, wa) in &modes_u {
                        let (dta, d1a, d2a) = PwSpace::decompose(lattice, *ka).unwrap();
                        let t_out = tmid + dta;
                        if let Some(row0) =
                            space.index_of(0, t_out, m1 + d1b + d1a, m2 + d2b + d2a)
                        {
                            let row = row0; // comp0 indices start at 0
                            let qout = qmid + ka;
                            let rout = qout + k;
                            if rout.norm() < 1e-8 {
                                continue;
                            }
                            c[(row, col)] += wa * wb / (rout * rmid);
                        }
                    }
                }
            }
        });
        return Ok(c);
    }
    // dense path with periodic potential in the resolvent
    let t = bs_matrix(lattice, n_trunc, k, a_per)?;
    // C = (top-left of T²) restricted to component 0
    let a = t.slice(ndarray::s![0..dc, dc..2 * dc]).to_owned();
    let b = t.slice(ndarray::s![dc..2 * dc, 0..dc]).to_owned();
    Ok(a.dot(&b))
}
