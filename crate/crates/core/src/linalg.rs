//! Small dense complex linear algebra on top of `nalgebra`.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex;
#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// The all-ones matrix 𝒥.
pub fn ones(n: usize) -> CMat {
    CMat::from_element(n, n, ONE)
}

/// Singular values sorted in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    jacobi_svd(m).sigma
}

/// Spectral norm.
pub fn op_norm(m: &CMat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// ‖U*U − I‖ in the spectral norm.
pub fn unitarity_defect(u: &CMat) -> f64 {
    let n = u.nrows();
    op_norm(&(u.adjoint() * u - identity(n)))
}

/// ‖M − M*‖ in the spectral norm.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    op_norm(&(m - m.adjoint()))
}

/// Reciprocal 2-norm condition number σ_min/σ_max (0 for the zero matrix).
pub fn rcond(m: &CMat) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if hi > 0.0 => lo / hi,
        _ => 0.0,
    }
}

/// Solves `m x = rhs`, refusing matrices whose reciprocal condition number
/// falls below `min_rcond`.
pub fn solve_checked(m: &CMat, rhs: &CMat, min_rcond: f64, what: &str) -> Result<CMat> {
    let rc = rcond(m);
    if !(rc >= min_rcond) {
        return Err(Error::IllConditioned {
            what: what.into(),
            rcond: rc,
        });
    }
    m.clone()
        .lu()
        .solve(rhs)
        .ok_or_else(|| Error::IllConditioned {
            what: what.into(),
            rcond: 0.0,
        })
}

/// SVD with singular triplets sorted by descending singular value.
pub struct SortedSvd {
    pub u: CMat,
    pub sigma: Vec<f64>,
    /// Columns are right singular vectors.
    pub v: CMat,
}

pub fn sorted_svd(m: &CMat) -> SortedSvd {
    jacobi_svd(m)
}

/// One-sided Jacobi SVD. Accurate left vectors for rank-deficient input,
/// where the bidiagonal routine in `nalgebra` can lose several digits.
/// Returns the thin factorization (`min(r, c)` triplets); left vectors of
/// zero singular values are completed to an orthonormal set.
fn jacobi_svd(m: &CMat) -> SortedSvd {
    let (r, c) = m.shape();
    if r < c {
        let t = jacobi_svd(&m.adjoint());
        return SortedSvd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        };
    }
    let mut a = m.clone();
    let mut v = identity(c);
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..c {
            for q in (p + 1)..c {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dotc(&a.column(q));
                let g = gamma.norm();
                if g <= f64::EPSILON * (alpha * beta).sqrt() || g == 0.0 {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for mat in [&mut a, &mut v] {
                    for i in 0..mat.nrows() {
                        let xp = mat[(i, p)];
                        let xq = mat[(i, q)] * phase.conj();
                        mat[(i, p)] = xp * cs - xq * sn;
                        mat[(i, q)] = xp * sn + xq * cs;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..c).map(|j| a.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let top = sigma.first().copied().unwrap_or(0.0);
    let cut = top * f64::EPSILON * (r.max(c) as f64);
    let mut u = CMat::zeros(r, c);
    let mut filled = 0;
    for (slot, &j) in order.iter().enumerate() {
        if sigma[slot] > cut && sigma[slot] > 0.0 {
            u.set_column(slot, &(a.column(j) / c64(sigma[slot], 0.0)));
            filled += 1;
        }
    }
    // Complete with standard basis vectors orthogonalized twice.
    let mut e = 0;
    while filled < c && e < r {
        let mut w = CVec::zeros(r);
        w[e] = ONE;
        e += 1;
        for _ in 0..2 {
            for k in 0..filled {
                let proj = u.column(k).dotc(&w);
                w -= u.column(k) * proj;
            }
        }
        let n = w.norm();
        if n > 0.5 {
            u.set_column(filled, &(w / c64(n, 0.0)));
            filled += 1;
        }
    }
    let v = CMat::from_fn(c, c, |i, k| v[(i, order[k])]);
    SortedSvd { u, sigma, v }
}

/// Numerical rank with an explicit ambiguity band.
///
/// Singular values at or below `tol·scale` count as zero, values at or
/// above `band·tol·scale` as nonzero; anything in between is reported as
/// [`Error::AmbiguousRank`].
pub fn numerical_rank(sigma: &[f64], scale: f64, tol: f64, band: f64) -> Result<usize> {
    let lo = tol * scale;
    let hi = band * tol * scale;
    let mut rank = 0;
    for &s in sigma {
        if s >= hi {
            rank += 1;
        } else if s > lo {
            return Err(Error::AmbiguousRank { value: s, lo, hi });
        }
    }
    Ok(rank)
}

/// Principal square root with a nonnegative imaginary part.
pub fn sqrt_upper(z: C64) -> C64 {
    let s = z.sqrt();
    if s.im < 0.0 {
        -s
    } else {
        s
    }
}

/// Hermitian positive definite inverse square root via eigendecomposition.
pub fn inv_sqrt_hpd(m: &CMat) -> Result<CMat> {
    let n = m.nrows();
    if n == 0 {
        return Ok(CMat::zeros(0, 0));
    }
    let h = (m + m.adjoint()) * c64(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let mut d = CMat::zeros(n, n);
    for i in 0..n {
        let l = eig.eigenvalues[i];
        if !(l > 0.0) {
            return Err(Error::Precondition("matrix is not positive definite".into()));
        }
        d[(i, i)] = c64(1.0 / l.sqrt(), 0.0);
    }
    Ok(&eig.eigenvectors * d * eig.eigenvectors.adjoint())
}

/// Real symmetric eigendecomposition sorted ascending.
pub fn sym_eigen_sorted(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let h = (m + m.transpose()) * 0.5;
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}
