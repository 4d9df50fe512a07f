//! Thin wrappers around the dense LAPACK backend plus the small iterative
//! helpers (inverse-power smallest singular value, orthonormalization) used
//! across the crate.

use crate::{C64, Error, Result};
use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, Eigh, Factorize, Norm, Solve, SVD, UPLO};

/// Eigenvalues and eigenvectors of a Hermitian matrix, ascending.
pub fn eigh(m: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    let (w, v) = m.eigh(UPLO::Lower)?;
    Ok((w, v))
}

/// Eigenvalues of a general complex square matrix.
pub fn eigvals(m: &Array2<C64>) -> Result<Array1<C64>> {
    let (w, _) = m.eig()?;
    Ok(w)
}

/// Singular values, ascending.
pub fn singular_values(m: &Array2<C64>) -> Result<Array1<f64>> {
    let (_, mut s, _) = m.svd(false, false)?;
    s.as_slice_mut().unwrap().sort_by(|a, b| a.total_cmp(b));
    Ok(s)
}

/// Full SVD with singular values ascending and columns of `u`, `v`
/// reordered accordingly; returns (u, sigma, v) with m = u diag(sigma) v^H.
pub fn svd_ascending(m: &Array2<C64>) -> Result<(Array2<C64>, Array1<f64>, Array2<C64>)> {
    let (u, s, vt) = m.svd(true, true)?;
    let u = u.unwrap();
    let vt = vt.unwrap();
    let n = s.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let mut uo = Array2::zeros((u.nrows(), n));
    let mut vo = Array2::zeros((vt.ncols(), n));
    let mut so = Array1::zeros(n);
    for (col, &j) in idx.iter().enumerate() {
        so[col] = s[j];
        uo.column_mut(col).assign(&u.column(j));
        vo.column_mut(col)
            .assign(&vt.row(j).mapv(|x: C64| x.conj()));
    }
    Ok((uo, so, vo))
}

/// Hermiticity defect max |M - M^H|.
pub fn hermiticity_defect(m: &Array2<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// Smallest singular value of a square matrix together with the right
/// singular vector, by inverse power iteration on M^H M through one LU
/// factorization of M.
pub fn smallest_singular(m: &Array2<C64>, iters: usize) -> Result<(f64, Array1<C64>)> {
    let n = m.ncols();
    let lu = m.factorize()?;
    let mut v: Array1<C64> = Array1::from_iter(
        (0..n).map(|j| C64::new((j as f64 * 0.7391).sin() + 0.3, (j as f64 * 1.234).cos())),
    );
    let nv = v.norm_l2();
    v.mapv_inplace(|x| x / nv);
    let mut sigma = f64::INFINITY;
    for _ in 0..iters.max(2) {
        // w = M^{-H} v, u = M^{-1} w  =>  u = (M^H M)^{-1} v
        let w = lu
            .solve_h(&v)
            .map_err(|e| Error::Linalg(format!("solve_h: {e}")))?;
        let u = lu
            .solve(&w)
            .map_err(|e| Error::Linalg(format!("solve: {e}")))?;
        let nu = u.norm_l2();
        if !nu.is_finite() || nu == 0.0 {
            return Err(Error::Linalg("inverse iteration breakdown".into()));
        }
        v = u.mapv(|x| x / nu);
        sigma = 1.0 / nu.sqrt();
    }
    Ok((sigma, v))
}

/// Orthonormalizes the columns of `a` in place via modified Gram-Schmidt,
/// returning the smallest renormalization factor encountered (a linear
/// independence certificate).
pub fn orthonormalize_columns(a: &mut Array2<C64>) -> f64 {
    let (_, k) = a.dim();
    let mut min_norm = f64::INFINITY;
    for j in 0..k {
        for i in 0..j {
            let proj: C64 = a
                .column(i)
                .iter()
                .zip(a.column(j).iter())
                .map(|(x, y)| x.conj() * y)
                .sum();
            let ci = a.column(i).to_owned();
            a.column_mut(j).zip_mut_with(&ci, |y, x| *y -= proj * x);
        }
        let nj = a.column(j).norm_l2();
        min_norm = min_norm.min(nj);
        if nj > 0.0 {
            a.column_mut(j).mapv_inplace(|x| x / nj);
        }
    }
    min_norm
}

/// Gram matrix smallest singular value of a set of column vectors.
pub fn gram_min_sv(a: &Array2<C64>) -> Result<f64> {
    let k = a.ncols();
    let mut g = Array2::<C64>::zeros((k, k));
    for i in 0..k {
        for j in 0..k {
            g[(i, j)] = a
                .column(i)
                .iter()
                .zip(a.column(j).iter())
                .map(|(x, y)| x.conj() * y)
                .sum();
        }
    }
    let s = singular_values(&g)?;
    Ok(s[0])
}

/// Least-squares polynomial fit y ≈ Σ c_d x^d of given degree; returns
/// coefficients (ascending degree) and the coefficient of determination r².
pub fn polyfit(x: &[f64], y: &[f64], degree: usize) -> Result<(Vec<f64>, f64)> {
    if x.len() != y.len() || x.len() < degree + 1 {
        return Err(Error::InvalidParameter(
            "polyfit needs at least degree+1 samples".into(),
        ));
    }
    let n = x.len();
    let m = degree + 1;
    let mut a = Array2::<f64>::zeros((n, m));
    for i in 0..n {
        let mut p = 1.0;
        for d in 0..m {
            a[(i, d)] = p;
            p *= x[i];
        }
    }
    // normal equations; degree is tiny here
    let mut ata = Array2::<f64>::zeros((m, m));
    let mut aty = Array1::<f64>::zeros(m);
    for i in 0..m {
        for j in 0..m {
            ata[(i, j)] = (0..n).map(|r| a[(r, i)] * a[(r, j)]).sum();
        }
        aty[i] = (0..n).map(|r| a[(r, i)] * y[r]).sum();
    }
    let ata_c = ata.mapv(|x| C64::new(x, 0.0));
    let aty_c = aty.mapv(|x| C64::new(x, 0.0));
    let c = ata_c
        .solve(&aty_c)
        .map_err(|e| Error::Linalg(format!("polyfit solve: {e}")))?;
    let coeff: Vec<f64> = c.iter().map(|z| z.re).collect();
    let mean = y.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = (0..n)
        .map(|r| {
            let fit: f64 = coeff
                .iter()
                .enumerate()
                .map(|(d, c)| c * x[r].powi(d as i32))
                .sum();
            (y[r] - fit).powi(2)
        })
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok((coeff, r2))
}

/// Multiset comparison of complex spectra: sorts both by (re, im) and
/// returns the maximum pairwise distance.
pub fn spectrum_distance(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let key = |z: &C64| (z.re, z.im);
    let mut sa: Vec<C64> = a.to_vec();
    let mut sb: Vec<C64> = b.to_vec();
    sa.sort_by(|p, q| key(p).partial_cmp(&key(q)).unwrap());
    sb.sort_by(|p, q| key(p).partial_cmp(&key(q)).unwrap());
    sa.iter()
        .zip(sb.iter())
        .map(|(p, q)| (p - q).norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn smallest_singular_matches_svd() {
        let m = array![
            [C64::new(2.0, 0.0), C64::new(0.3, 0.4), C64::new(0.0, 0.1)],
            [C64::new(0.1, -0.2), C64::new(0.5, 0.0), C64::new(0.0, 0.0)],
            [C64::new(0.0, 0.0), C64::new(0.2, 0.1), C64::new(1.5, 0.3)],
        ];
        let s = singular_values(&m).unwrap();
        let (sig, v) = smallest_singular(&m, 30).unwrap();
        assert!((sig - s[0]).abs() < 1e-10 * s[2]);
        let mv = m.dot(&v);
        assert!((mv.norm_l2() - sig).abs() < 1e-8);
    }

    #[test]
    fn polyfit_recovers_quadratic() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|t| 3.0 * t * t - 2.0 * t + 1.0).collect();
        let (c, r2) = polyfit(&x, &y, 2).unwrap();
        assert!((c[2] - 3.0).abs() < 1e-9 && (c[1] + 2.0).abs() < 1e-9);
        assert!(r2 > 0.999999);
    }
}
