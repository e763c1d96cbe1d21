//! Banded and sparse solvers used by the finite-difference code.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::{C64, ZERO};
use crate::{Error, Result};

/// LU factorization of a complex tridiagonal matrix with partial pivoting
/// (the `gttrf` scheme: one extra superdiagonal appears after row swaps).
#[derive(Debug, Clone)]
pub struct TridiagLu {
    dl: Vec<C64>,
    d: Vec<C64>,
    du: Vec<C64>,
    du2: Vec<C64>,
    swap: Vec<bool>,
}

fn cabs1(z: C64) -> f64 {
    z.re.abs() + z.im.abs()
}

impl TridiagLu {
    /// `sub[i] = M[i+1][i]`, `diag[i] = M[i][i]`, `sup[i] = M[i][i+1]`.
    pub fn new(sub: Vec<C64>, diag: Vec<C64>, sup: Vec<C64>) -> Result<Self> {
        let n = diag.len();
        debug_assert!(n == 0 || (sub.len() == n - 1 && sup.len() == n - 1));
        let (mut dl, mut d, mut du) = (sub, diag, sup);
        let mut du2 = vec![ZERO; n.saturating_sub(2)];
        let mut swap = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if cabs1(d[i]) >= cabs1(dl[i]) {
                if cabs1(d[i]) != 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swap[i] = true;
            }
        }
        if d.iter().any(|&x| cabs1(x) == 0.0 || !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::IllConditioned {
                what: "tridiagonal block".into(),
                rcond: 0.0,
            });
        }
        Ok(TridiagLu { dl, d, du, du2, swap })
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn solve_in_place(&self, b: &mut [C64]) {
        let n = self.d.len();
        if n == 0 {
            return;
        }
        for i in 0..n - 1 {
            if !self.swap[i] {
                b[i + 1] -= self.dl[i] * b[i];
            } else {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

/// Real symmetric matrix in compressed-row form (both triangles stored).
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0; n + 1];
        let mut cols: Vec<usize> = Vec::with_capacity(t.len());
        let mut vals: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *vals.last_mut().expect("entry") += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.n {
            let mut s = 0.0;
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[p] * x[self.cols[p]];
            }
            y[r] = s;
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        (self.row_ptr[r]..self.row_ptr[r + 1])
            .find(|&p| self.cols[p] == c)
            .map_or(0.0, |p| self.vals[p])
    }

    /// Largest `|M_ij − M_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.n {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                worst = worst.max((self.vals[p] - self.get(self.cols[p], r)).abs());
            }
        }
        worst
    }

    /// Gershgorin lower bound on the spectrum.
    pub fn gershgorin_lower(&self) -> f64 {
        let mut lo = f64::INFINITY;
        for r in 0..self.n {
            let mut diag = 0.0;
            let mut off = 0.0;
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.cols[p] == r {
                    diag += self.vals[p];
                } else {
                    off += self.vals[p].abs();
                }
            }
            lo = lo.min(diag - off);
        }
        lo
    }
}

/// Envelope (skyline) Cholesky factor `L Lᵀ` of a symmetric positive
/// definite matrix. Row `i` stores `L[i][first[i]..=i]`.
#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    first: Vec<usize>,
    start: Vec<usize>,
    vals: Vec<f64>,
}

impl SkylineCholesky {
    /// Factors `a + shift·I`.
    pub fn new(a: &CsrMatrix, shift: f64) -> Result<Self> {
        let n = a.n;
        let mut first = vec![0; n];
        for (r, f) in first.iter_mut().enumerate() {
            *f = (a.row_ptr[r]..a.row_ptr[r + 1])
                .map(|p| a.cols[p])
                .filter(|&c| c <= r)
                .min()
                .unwrap_or(r);
        }
        let mut start = vec![0; n + 1];
        for r in 0..n {
            start[r + 1] = start[r] + (r - first[r] + 1);
        }
        let mut vals = vec![0.0; start[n]];
        for r in 0..n {
            for p in a.row_ptr[r]..a.row_ptr[r + 1] {
                let c = a.cols[p];
                if c <= r {
                    vals[start[r] + c - first[r]] += a.vals[p];
                }
            }
            vals[start[r] + r - first[r]] += shift;
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let lo = fi.max(fj);
                let mut s = vals[start[i] + j - fi];
                let (ri, rj) = (start[i] - fi, start[j] - fj);
                for k in lo..j {
                    s -= vals[ri + k] * vals[rj + k];
                }
                if j == i {
                    if !(s > 0.0) {
                        return Err(Error::Precondition(
                            "shifted matrix is not positive definite".into(),
                        ));
                    }
                    vals[ri + i] = s.sqrt();
                } else {
                    vals[ri + j] = s / vals[rj + j];
                }
            }
        }
        Ok(SkylineCholesky { first, start, vals })
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.first.len();
        for i in 0..n {
            let ri = self.start[i] - self.first[i];
            let mut s = b[i];
            for k in self.first[i]..i {
                s -= self.vals[ri + k] * b[k];
            }
            b[i] = s / self.vals[ri + i];
        }
        for i in (0..n).rev() {
            let ri = self.start[i] - self.first[i];
            b[i] /= self.vals[ri + i];
            let bi = b[i];
            for k in self.first[i]..i {
                b[k] -= self.vals[ri + k] * bi;
            }
        }
    }

    pub fn stored_entries(&self) -> usize {
        self.vals.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;

    #[test]
    fn tridiagonal_solve_with_pivoting() {
        // Small leading diagonal forces row interchanges.
        let sub = vec![c64(2.0, 1.0), c64(-1.0, 0.0), c64(3.0, 0.0)];
        let diag = vec![c64(1e-3, 0.0), c64(0.5, 0.0), c64(1.0, -1.0), c64(2.0, 0.0)];
        let sup = vec![c64(1.0, 0.0), c64(4.0, 2.0), c64(-0.5, 0.0)];
        let x = [c64(1.0, 0.0), c64(-2.0, 1.0), c64(0.5, 0.5), c64(3.0, 0.0)];
        let mut b = vec![ZERO; 4];
        for i in 0..4 {
            b[i] = diag[i] * x[i];
            if i > 0 {
                b[i] += sub[i - 1] * x[i - 1];
            }
            if i < 3 {
                b[i] += sup[i] * x[i + 1];
            }
        }
        let lu = TridiagLu::new(sub, diag, sup).unwrap();
        lu.solve_in_place(&mut b);
        for i in 0..4 {
            assert!((b[i] - x[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn skyline_cholesky_solves_laplacian() {
        let n = 6;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, t);
        assert_eq!(a.asymmetry(), 0.0);
        let chol = SkylineCholesky::new(&a, 0.0).unwrap();
        let x: Vec<f64> = (0..n).map(|i| i as f64 - 2.0).collect();
        let mut b = vec![0.0; n];
        a.mul_vec(&x, &mut b);
        chol.solve_in_place(&mut b);
        for i in 0..n {
            assert!((b[i] - x[i]).abs() < 1e-12);
        }
    }
}
