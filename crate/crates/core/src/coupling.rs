//! Self-adjoint vertex couplings.
//!
//! A coupling of `n` edge ends constrains the boundary values
//! `Ψ = (ψ_1(0), …, ψ_n(0))` and outgoing derivatives `Ψ'` through
//! `AΨ + BΨ' = 0`. Three views are supported:
//!
//! * [`KsPair`]: any pair `(A, B)` with `rank(A|B) = n` and `AB*` self-adjoint,
//!   unique only up to left multiplication by an invertible matrix;
//! * [`UnitaryCoupling`]: the unique `U` with `A = U − I`, `B = i(U + I)`,
//!   which is the canonical representation used for equality;
//! * [`StForm`]: `(I T; 0 0)Ψ' = (S 0; −T* I)Ψ` after renumbering the edges.
//!
//! The unitary matrix doubles as the on-shell vertex scattering matrix at
//! `k = 1`; [`vertex_smatrix`] evaluates it at arbitrary momenta.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::{
    c64, hermiticity_defect, identity, max_abs, numerical_rank, ones, op_norm, singular_values,
    solve_checked, sorted_svd, unitarity_defect, CMat, C64, I, ONE,
};
use crate::{Error, Result};

/// Default relative tolerance for rank and eigenvalue-at-(−1) decisions.
pub const RANK_TOL: f64 = 1e-9;
/// Singular values within `[tol, RANK_BAND·tol]` (relative) are ambiguous.
pub const RANK_BAND: f64 = 1e3;
/// Tolerance on ‖U*U − I‖ accepted for user-supplied unitary matrices.
pub const UNITARY_TOL: f64 = 1e-9;

/// A coupling strength that may be infinite (decoupled edges).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strength {
    Finite(f64),
    Infinite,
}

/// The named coupling families.
#[derive(Debug, Clone, PartialEq)]
pub enum NamedForm {
    /// Continuity plus `Σψ'_j = αψ`; `Infinite` gives Dirichlet ends.
    Delta(Strength),
    /// Derivative continuity plus `Σψ_j = βψ'`; `Infinite` gives Neumann ends.
    DeltaPrime(Strength),
    /// Kirchhoff, i.e. δ with α = 0.
    Free,
    Dirichlet,
    Neumann,
    /// `U = a𝒥 + bI` with `|b| = 1` and `|b + a·n| = 1`.
    PermInvariant { a: C64, b: C64 },
}

/// `AΨ + BΨ' = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct KsPair {
    pub a: CMat,
    pub b: CMat,
}

/// The canonical unitary parametrization `A = U − I`, `B = i(U + I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryCoupling(CMat);

/// `(I T; 0 0)Ψ'_π = (S 0; −T* I)Ψ_π` where `Ψ_π[i] = Ψ[perm[i]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StForm {
    pub m: usize,
    /// `m × m`, self-adjoint.
    pub s: CMat,
    /// `m × (n − m)`.
    pub t: CMat,
    /// `perm[i]` is the original edge index placed at position `i`.
    pub perm: Vec<usize>,
}

/// Vertex or graph scattering matrix at momentum `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringMatrix {
    pub k: C64,
    pub s: CMat,
}

/// Any supported description of a coupling, as stored in graph files.
///
/// Named forms adapt to the degree of the vertex they are attached to;
/// matrix forms carry a fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub enum CouplingSpec {
    Named(NamedForm),
    Ks(KsPair),
    Unitary(UnitaryCoupling),
    St(StForm),
}

/// Outcome of [`validate_ks`].
#[derive(Debug, Clone, PartialEq)]
pub enum KsVerdict {
    Pass,
    Fail(String),
}

impl UnitaryCoupling {
    /// Wraps `u` after checking unitarity to `tol`.
    pub fn new(u: CMat, tol: f64) -> Result<Self> {
        if !u.is_square() {
            return Err(Error::InvalidCoupling("unitary matrix must be square".into()));
        }
        let defect = unitarity_defect(&u);
        if !(defect <= tol) {
            return Err(Error::InvalidCoupling(format!(
                "matrix is not unitary (‖U*U − I‖ = {defect:e})"
            )));
        }
        Ok(Self(u))
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

impl StForm {
    pub fn n(&self) -> usize {
        self.perm.len()
    }

    /// Checks shapes, self-adjointness of `S` and that `perm` is a bijection.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let n = self.n();
        if self.m > n {
            return Err(Error::InvalidCoupling(format!("m = {} exceeds n = {n}", self.m)));
        }
        if self.s.nrows() != self.m || self.s.ncols() != self.m {
            return Err(Error::InvalidCoupling(format!("S must be {0}×{0}", self.m)));
        }
        if self.t.nrows() != self.m || self.t.ncols() != n - self.m {
            return Err(Error::InvalidCoupling(format!(
                "T must be {}×{}",
                self.m,
                n - self.m
            )));
        }
        let mut seen = alloc::vec![false; n];
        for &p in &self.perm {
            if p >= n || seen[p] {
                return Err(Error::InvalidCoupling("perm is not a bijection".into()));
            }
            seen[p] = true;
        }
        let scale = 1.0 + max_abs(&self.s);
        if self.m > 0 && hermiticity_defect(&self.s) > tol * scale {
            return Err(Error::InvalidCoupling("S is not self-adjoint".into()));
        }
        Ok(())
    }
}

impl CouplingSpec {
    pub fn delta(alpha: f64) -> Self {
        CouplingSpec::Named(NamedForm::Delta(Strength::Finite(alpha)))
    }

    pub fn delta_prime(beta: f64) -> Self {
        CouplingSpec::Named(NamedForm::DeltaPrime(Strength::Finite(beta)))
    }

    /// Dimension imposed by the description itself, if any.
    pub fn fixed_dim(&self) -> Option<usize> {
        match self {
            CouplingSpec::Named(_) => None,
            CouplingSpec::Ks(ks) => Some(ks.a.nrows()),
            CouplingSpec::Unitary(u) => Some(u.dim()),
            CouplingSpec::St(st) => Some(st.n()),
        }
    }

    /// The canonical unitary matrix for a vertex of degree `n`.
    pub fn unitary(&self, n: usize) -> Result<UnitaryCoupling> {
        if let Some(d) = self.fixed_dim() {
            if d != n {
                return Err(Error::DimensionMismatch {
                    at: "coupling".into(),
                    expected: n,
                    found: d,
                });
            }
        }
        match self {
            CouplingSpec::Named(form) => make_named(form, n),
            CouplingSpec::Ks(ks) => {
                match validate_ks(&ks.a, &ks.b, RANK_TOL)? {
                    KsVerdict::Pass => {}
                    KsVerdict::Fail(reason) => return Err(Error::InvalidCoupling(reason)),
                }
                unitary_from_ks(ks)
            }
            CouplingSpec::Unitary(u) => Ok(u.clone()),
            CouplingSpec::St(st) => {
                st.validate(RANK_TOL)?;
                unitary_from_st(st)
            }
        }
    }
}

/// Builds the unitary matrix of a named coupling of `n` edges.
pub fn make_named(form: &NamedForm, n: usize) -> Result<UnitaryCoupling> {
    if n == 0 {
        return Err(Error::InvalidCoupling("vertex degree must be at least 1".into()));
    }
    let nf = n as f64;
    let u = match *form {
        NamedForm::Delta(Strength::Finite(alpha)) => {
            ones(n) * (c64(2.0, 0.0) / c64(nf, alpha)) - identity(n)
        }
        NamedForm::Delta(Strength::Infinite) | NamedForm::Dirichlet => -identity(n),
        NamedForm::Free => ones(n) * c64(2.0 / nf, 0.0) - identity(n),
        NamedForm::DeltaPrime(Strength::Finite(beta)) => {
            identity(n) - ones(n) * (c64(2.0, 0.0) / c64(nf, -beta))
        }
        NamedForm::DeltaPrime(Strength::Infinite) | NamedForm::Neumann => identity(n),
        NamedForm::PermInvariant { a, b } => {
            let tol = 1e-10;
            if (b.norm() - 1.0).abs() > tol || ((b + a * nf).norm() - 1.0).abs() > tol {
                return Err(Error::InvalidCoupling(format!(
                    "permutation-invariant coupling needs |b| = 1 and |b + a·n| = 1 \
                     (got |b| = {}, |b + a·n| = {})",
                    b.norm(),
                    (b + a * nf).norm()
                )));
            }
            ones(n) * a + identity(n) * b
        }
    };
    Ok(UnitaryCoupling(u))
}

/// Null space basis of an `r × c` matrix (columns), from singular values
/// below `tol·σ_max`.
fn null_space(m: &CMat, tol: f64) -> CMat {
    let (r, c) = m.shape();
    let padded = if r < c {
        let mut p = CMat::zeros(c, c);
        p.view_mut((0, 0), (r, c)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = sorted_svd(&padded);
    let smax = svd.sigma.first().copied().unwrap_or(0.0);
    let keep: Vec<usize> = (0..svd.sigma.len())
        .filter(|&i| svd.sigma[i] <= tol * smax)
        .collect();
    CMat::from_fn(c, keep.len(), |i, j| svd.v[(i, keep[j])])
}

/// Checks the two defining conditions of a KS pair, plus vanishing of the
/// boundary form `Σ(ψ̄_jψ'_j − ψ̄'_jψ_j)` on the constrained subspace as an
/// independent certificate.
pub fn validate_ks(a: &CMat, b: &CMat, tol: f64) -> Result<KsVerdict> {
    let n = a.nrows();
    if !a.is_square() || !b.is_square() || b.nrows() != n {
        return Err(Error::DimensionMismatch {
            at: "ks".into(),
            expected: n,
            found: b.nrows(),
        });
    }
    let mut ab = CMat::zeros(n, 2 * n);
    ab.view_mut((0, 0), (n, n)).copy_from(a);
    ab.view_mut((0, n), (n, n)).copy_from(b);
    let sigma = singular_values(&ab);
    let smax = sigma.first().copied().unwrap_or(0.0);
    let rank = sigma.iter().filter(|&&s| s > tol * smax).count();
    if smax == 0.0 || rank < n {
        return Ok(KsVerdict::Fail(format!("rank (A|B) = {rank} < n = {n}")));
    }
    let abh = a * b.adjoint();
    let scale = smax * smax;
    let defect = hermiticity_defect(&abh);
    if defect > tol.sqrt() * scale {
        return Ok(KsVerdict::Fail(format!(
            "AB* is not self-adjoint (defect {defect:e})"
        )));
    }
    // Boundary form on ker(A|B), an n-dimensional Lagrangian subspace.
    let ns = null_space(&ab, tol.sqrt());
    if ns.ncols() != n {
        return Ok(KsVerdict::Fail(format!(
            "constrained subspace has dimension {} ≠ n",
            ns.ncols()
        )));
    }
    let psi = ns.rows(0, n).into_owned();
    let dpsi = ns.rows(n, n).into_owned();
    let form = psi.adjoint() * &dpsi - dpsi.adjoint() * &psi;
    let fdef = max_abs(&form);
    if fdef > tol.sqrt() {
        return Ok(KsVerdict::Fail(format!(
            "boundary form does not vanish (max {fdef:e})"
        )));
    }
    Ok(KsVerdict::Pass)
}

/// `U = −(A + iB)⁻¹(A − iB)`.
pub fn unitary_from_ks(ks: &KsPair) -> Result<UnitaryCoupling> {
    let lhs = &ks.a + &ks.b * I;
    let rhs = &ks.a - &ks.b * I;
    let u = -solve_checked(&lhs, &rhs, 1e-12, "A + iB")?;
    UnitaryCoupling::new(u, 1e-8)
}

/// `A = U − I`, `B = i(U + I)`.
pub fn ks_from_unitary(u: &UnitaryCoupling) -> KsPair {
    let n = u.dim();
    KsPair {
        a: u.matrix() - identity(n),
        b: (u.matrix() + identity(n)) * I,
    }
}

/// Column selection by pivoted Gram–Schmidt: returns `rank` column indices
/// in pivot order (ties broken towards the lowest index).
fn pivot_columns(b: &CMat, rank: usize) -> Vec<usize> {
    let n = b.ncols();
    let mut work = b.clone();
    let mut chosen = Vec::with_capacity(rank);
    for _ in 0..rank {
        let mut best = None;
        let mut best_norm = -1.0;
        for j in 0..n {
            if chosen.contains(&j) {
                continue;
            }
            let nrm = work.column(j).norm();
            if nrm > best_norm * (1.0 + 1e-12) {
                best_norm = nrm;
                best = Some(j);
            }
        }
        let p = best.expect("rank does not exceed column count");
        chosen.push(p);
        let q = work.column(p) / c64(best_norm, 0.0);
        for j in 0..n {
            if !chosen.contains(&j) {
                let proj = q.dotc(&work.column(j));
                let upd = work.column(j) - &q * proj;
                work.set_column(j, &upd);
            }
        }
    }
    chosen
}

/// ST-form of the KS pair `(A, B)`.
///
/// `m` is the numerical rank of `B` (for a unitary pair, `n` minus the
/// multiplicity of the eigenvalue −1 of `U`). The edge numbering is chosen
/// by column pivoting on `B`.
pub fn st_from_ks(ks: &KsPair, tol: f64) -> Result<StForm> {
    let n = ks.a.nrows();
    let scale = op_norm(&ks.a).max(op_norm(&ks.b));
    let m = numerical_rank(&singular_values(&ks.b), scale, tol, RANK_BAND)?;
    let mut chosen = pivot_columns(&ks.b, m);
    chosen.sort_unstable();
    let mut perm = chosen.clone();
    perm.extend((0..n).filter(|j| !chosen.contains(j)));
    let ap = CMat::from_fn(n, n, |r, c| ks.a[(r, perm[c])]);
    let bp = CMat::from_fn(n, n, |r, c| ks.b[(r, perm[c])]);
    if m == 0 {
        return Ok(StForm {
            m,
            s: CMat::zeros(0, 0),
            t: CMat::zeros(0, n),
            perm,
        });
    }
    let b1 = bp.columns(0, m).into_owned();
    let b2 = bp.columns(m, n - m).into_owned();
    let gram = b1.adjoint() * &b1;
    let pinv = solve_checked(&gram, &b1.adjoint(), 1e-14, "selected columns of B")?;
    let t = &pinv * &b2;
    let upper = -(&pinv * &ap);
    let s_prime = upper.columns(0, m).into_owned();
    let r = upper.columns(m, n - m).into_owned();
    let s = if m < n {
        // Lower block: rows spanning the left null space of B.
        let svd = sorted_svd(&bp);
        let left_null = svd.u.columns(m, n - m).into_owned();
        let y = left_null.adjoint() * &ap;
        let y1 = y.columns(0, m).into_owned();
        let y2 = y.columns(m, n - m).into_owned();
        let z = solve_checked(&y2, &y1, 1e-12, "Dirichlet block")?;
        let mismatch = max_abs(&(&z + t.adjoint()));
        if mismatch > tol.sqrt() * (1.0 + max_abs(&t)) {
            return Err(Error::InvalidCoupling(format!(
                "pair is not self-adjoint (lower block off by {mismatch:e})"
            )));
        }
        s_prime + r * t.adjoint()
    } else {
        s_prime
    };
    let s = (&s + s.adjoint()) * c64(0.5, 0.0);
    Ok(StForm { m, s, t, perm })
}

pub fn st_from_unitary(u: &UnitaryCoupling, tol: f64) -> Result<StForm> {
    st_from_ks(&ks_from_unitary(u), tol)
}

/// KS pair of an ST-form expressed in the original edge numbering.
pub fn ks_from_st(st: &StForm) -> KsPair {
    let n = st.n();
    let m = st.m;
    let mut a = CMat::zeros(n, n);
    let mut b = CMat::zeros(n, n);
    for i in 0..m {
        for j in 0..m {
            a[(i, perm_col(st, j))] = -st.s[(i, j)];
        }
        b[(i, perm_col(st, i))] = ONE;
        for l in 0..(n - m) {
            b[(i, perm_col(st, m + l))] = st.t[(i, l)];
        }
    }
    for l in 0..(n - m) {
        for j in 0..m {
            a[(m + l, perm_col(st, j))] = st.t[(j, l)].conj();
        }
        a[(m + l, perm_col(st, m + l))] = -ONE;
    }
    KsPair { a, b }
}

#[inline]
fn perm_col(st: &StForm, i: usize) -> usize {
    st.perm[i]
}

pub fn unitary_from_st(st: &StForm) -> Result<UnitaryCoupling> {
    unitary_from_ks(&ks_from_st(st))
}

/// `S(k) = −(A + ikB)⁻¹(A − ikB)` with `A = U − I`, `B = i(U + I)`.
///
/// For real `k` the result is unitary and `S(1) = U`. Imaginary `k = iκ`
/// is accepted for bound-state analysis.
pub fn vertex_smatrix(u: &UnitaryCoupling, k: C64) -> Result<ScatteringMatrix> {
    let ks = ks_from_unitary(u);
    let lhs = &ks.a + &ks.b * (I * k);
    let rhs = &ks.a - &ks.b * (I * k);
    let s = solve_checked(&lhs, &rhs, 1e-13, "A + ikB").map_err(|_| Error::SingularMatching {
        re: k.re,
        im: k.im,
    })?;
    Ok(ScatteringMatrix { k, s: -s })
}

/// Entrywise comparison of the canonical unitary matrices.
pub fn couplings_equivalent(c1: &UnitaryCoupling, c2: &UnitaryCoupling, tol: f64) -> bool {
    c1.dim() == c2.dim() && max_abs(&(c1.matrix() - c2.matrix())) <= tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{ZERO, I as IM};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> UnitaryCoupling {
        let g = CMat::from_fn(n, n, |_, _| c64(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let qr = g.qr();
        let (q, r) = (qr.q(), qr.r());
        let mut d = CMat::zeros(n, n);
        for i in 0..n {
            d[(i, i)] = r[(i, i)] / c64(r[(i, i)].norm(), 0.0);
        }
        UnitaryCoupling::new(q * d, 1e-10).unwrap()
    }

    #[test]
    fn delta_zero_on_two_edges_is_the_swap() {
        let u = make_named(&NamedForm::Delta(Strength::Finite(0.0)), 2).unwrap();
        let expect = CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
        assert!(max_abs(&(u.matrix() - expect)) < 1e-15);
        let free = make_named(&NamedForm::Free, 2).unwrap();
        assert!(couplings_equivalent(&u, &free, 1e-15));
    }

    #[test]
    fn infinite_strengths_decouple() {
        for n in 1..5 {
            let d = make_named(&NamedForm::Delta(Strength::Infinite), n).unwrap();
            assert!(max_abs(&(d.matrix() + identity(n))) == 0.0);
            let np = make_named(&NamedForm::DeltaPrime(Strength::Infinite), n).unwrap();
            assert!(max_abs(&(np.matrix() - identity(n))) == 0.0);
        }
    }

    #[test]
    fn delta_prime_three_edges_is_unitary() {
        let u = make_named(&NamedForm::DeltaPrime(Strength::Finite(1.0)), 3).unwrap();
        let expect = identity(3) - ones(3) * (c64(2.0, 0.0) / c64(3.0, -1.0));
        assert!(max_abs(&(u.matrix() - expect)) < 1e-15);
        assert!(unitarity_defect(u.matrix()) <= 1e-12);
    }

    #[test]
    fn perm_invariant_rejects_bad_parameters() {
        let bad = NamedForm::PermInvariant { a: c64(0.3, 0.0), b: ONE };
        assert!(make_named(&bad, 3).is_err());
        // a = −2/n, b = 1 gives the δ' family member β = 0.
        let good = NamedForm::PermInvariant { a: c64(-2.0 / 3.0, 0.0), b: ONE };
        let u = make_named(&good, 3).unwrap();
        let dp = make_named(&NamedForm::DeltaPrime(Strength::Finite(0.0)), 3).unwrap();
        assert!(couplings_equivalent(&u, &dp, 1e-14));
    }

    #[test]
    fn ks_validation_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = random_unitary(4, &mut rng);
        let ks = ks_from_unitary(&u);
        assert_eq!(validate_ks(&ks.a, &ks.b, RANK_TOL).unwrap(), KsVerdict::Pass);
        // A = B = I: AB* = I is self-adjoint and rank(I|I) = n.
        assert_eq!(validate_ks(&identity(3), &identity(3), RANK_TOL).unwrap(), KsVerdict::Pass);
        let z = CMat::zeros(3, 3);
        match validate_ks(&z, &z, RANK_TOL).unwrap() {
            KsVerdict::Fail(r) => assert!(r.contains("rank")),
            KsVerdict::Pass => panic!("zero pair accepted"),
        }
        // AB* = iI is not self-adjoint.
        match validate_ks(&identity(2), &(identity(2) * IM), RANK_TOL).unwrap() {
            KsVerdict::Fail(r) => assert!(r.contains("self-adjoint")),
            KsVerdict::Pass => panic!("non-self-adjoint pair accepted"),
        }
        assert!(validate_ks(&identity(2), &identity(3), RANK_TOL).is_err());
    }

    #[test]
    fn dirichlet_ks_round_trip() {
        let u = make_named(&NamedForm::Dirichlet, 3).unwrap();
        let ks = ks_from_unitary(&u);
        assert!(max_abs(&(&ks.a + identity(3) * c64(2.0, 0.0))) == 0.0);
        assert!(max_abs(&ks.b) == 0.0);
        let back = unitary_from_ks(&KsPair { a: identity(3) * c64(-2.0, 0.0), b: CMat::zeros(3, 3) }).unwrap();
        assert!(couplings_equivalent(&back, &u, 1e-14));
    }

    #[test]
    fn row_transformed_pairs_give_the_same_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = random_unitary(3, &mut rng);
        let ks = ks_from_unitary(&u);
        let scaled = KsPair { a: &ks.a * c64(2.0, 0.0), b: &ks.b * c64(2.0, 0.0) };
        assert!(couplings_equivalent(&unitary_from_ks(&scaled).unwrap(), &u, 1e-12));
        let c = CMat::from_fn(3, 3, |i, j| c64((i + 2 * j) as f64 * 0.3 + if i == j { 2.0 } else { 0.0 }, 0.1 * i as f64));
        let rot = KsPair { a: &c * &ks.a, b: &c * &ks.b };
        assert!(couplings_equivalent(&unitary_from_ks(&rot).unwrap(), &u, 1e-10));
        // Permuted rows.
        let p = CMat::from_fn(3, 3, |i, j| if (i + 1) % 3 == j { ONE } else { ZERO });
        let swapped = KsPair { a: &p * &ks.a, b: &p * &ks.b };
        assert!(couplings_equivalent(&unitary_from_ks(&swapped).unwrap(), &u, 1e-12));
    }

    #[test]
    fn delta_st_form() {
        for n in 2..6 {
            let alpha = 0.7 - n as f64;
            let u = make_named(&NamedForm::Delta(Strength::Finite(alpha)), n).unwrap();
            let st = st_from_unitary(&u, RANK_TOL).unwrap();
            assert_eq!(st.m, 1);
            assert_eq!(st.perm, (0..n).collect::<Vec<_>>());
            assert!((st.s[(0, 0)] - c64(alpha, 0.0)).norm() < 1e-10);
            for l in 0..n - 1 {
                assert!((st.t[(0, l)] - ONE).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn delta_prime_st_form() {
        let beta = 0.8;
        let n = 3;
        let u = make_named(&NamedForm::DeltaPrime(Strength::Finite(beta)), n).unwrap();
        let st = st_from_unitary(&u, RANK_TOL).unwrap();
        assert_eq!(st.m, n);
        assert_eq!(st.t.ncols(), 0);
        assert!(max_abs(&(&st.s - ones(n) * c64(1.0 / beta, 0.0))) < 1e-10);
    }

    #[test]
    fn dirichlet_st_form_is_empty() {
        let u = make_named(&NamedForm::Dirichlet, 4).unwrap();
        let st = st_from_unitary(&u, RANK_TOL).unwrap();
        assert_eq!(st.m, 0);
        let back = unitary_from_st(&st).unwrap();
        assert!(couplings_equivalent(&back, &u, 1e-14));
    }

    #[test]
    fn st_rank_ambiguity_is_reported() {
        // Eigenvalue e^{i(π − 1e-7)} sits inside the ambiguity band.
        let phase = core::f64::consts::PI - 1e-7;
        let mut u = identity(2);
        u[(0, 0)] = c64(phase.cos(), phase.sin());
        let u = UnitaryCoupling::new(u, 1e-12).unwrap();
        assert!(matches!(st_from_unitary(&u, RANK_TOL), Err(Error::AmbiguousRank { .. })));
    }

    #[test]
    fn delta_two_edges_scattering_at_unit_momentum() {
        let u = make_named(&NamedForm::Delta(Strength::Finite(2.0)), 2).unwrap();
        let s = vertex_smatrix(&u, ONE).unwrap().s;
        let r = c64(-0.5, -0.5);
        let t = c64(0.5, -0.5);
        assert!((s[(0, 0)] - r).norm() < 1e-14 && (s[(1, 1)] - r).norm() < 1e-14);
        assert!((s[(0, 1)] - t).norm() < 1e-14 && (s[(1, 0)] - t).norm() < 1e-14);
        assert!((r.norm_sqr() + t.norm_sqr() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn free_two_edges_transmit_fully_at_all_momenta() {
        let u = make_named(&NamedForm::Free, 2).unwrap();
        for k in [0.1, 1.0, 7.5] {
            let s = vertex_smatrix(&u, c64(k, 0.0)).unwrap().s;
            let swap = CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
            assert!(max_abs(&(s - swap)) < 1e-14);
        }
    }

    #[test]
    fn equivalence_checks() {
        let n = 2;
        let d0 = make_named(&NamedForm::Delta(Strength::Finite(0.0)), n).unwrap();
        let dp0 = make_named(&NamedForm::DeltaPrime(Strength::Finite(0.0)), n).unwrap();
        assert!(!couplings_equivalent(&d0, &dp0, 1e-6));
        let alpha = -1.3;
        // δ(α) written by hand as a KS pair: ψ_1 − ψ_2 = 0, ψ'_1 + ψ'_2 − αψ_1 = 0.
        let a = CMat::from_row_slice(2, 2, &[ONE, -ONE, c64(-alpha, 0.0), ZERO]);
        let b = CMat::from_row_slice(2, 2, &[ZERO, ZERO, ONE, ONE]);
        let from_ks = CouplingSpec::Ks(KsPair { a, b }).unitary(2).unwrap();
        let named = make_named(&NamedForm::Delta(Strength::Finite(alpha)), 2).unwrap();
        assert!(couplings_equivalent(&from_ks, &named, 1e-12));
    }

    /// Möbius relation between unitary matrices describing the same
    /// conditions at length scales ℓ and ℓ'; used only as an oracle.
    fn rescale(u: &CMat, l: f64, lp: f64) -> CMat {
        let n = u.nrows();
        let num = u * c64(l + lp, 0.0) + identity(n) * c64(l - lp, 0.0);
        let den = u * c64(l - lp, 0.0) + identity(n) * c64(l + lp, 0.0);
        // U' = num · den⁻¹
        (den.transpose().lu().solve(&num.transpose()).unwrap()).transpose()
    }

    #[test]
    fn length_rescaling_yields_an_equivalent_coupling() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let u = random_unitary(3, &mut rng);
            for lp in [0.25, 2.0, 5.0] {
                let up = rescale(u.matrix(), 1.0, lp);
                assert!(unitarity_defect(&up) < 1e-10);
                // (U' − I)Ψ + iℓ'(U' + I)Ψ' = 0
                let ks = KsPair {
                    a: &up - identity(3),
                    b: (&up + identity(3)) * c64(0.0, lp),
                };
                let back = unitary_from_ks(&ks).unwrap();
                assert!(couplings_equivalent(&back, &u, 1e-9));
            }
        }
    }

    #[test]
    fn random_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for n in 1..6 {
            for _ in 0..40 {
                let u = random_unitary(n, &mut rng);
                let ks = ks_from_unitary(&u);
                assert!(couplings_equivalent(&unitary_from_ks(&ks).unwrap(), &u, 1e-10));
                let st = st_from_unitary(&u, RANK_TOL).unwrap();
                st.validate(1e-9).unwrap();
                assert!(couplings_equivalent(&unitary_from_st(&st).unwrap(), &u, 1e-8));
                let s1 = vertex_smatrix(&u, ONE).unwrap();
                assert!(max_abs(&(s1.s - u.matrix())) < 1e-10);
                for k in [0.5, 2.0] {
                    let s = vertex_smatrix(&u, c64(k, 0.0)).unwrap();
                    assert!(unitarity_defect(&s.s) < 1e-10);
                }
            }
        }
    }
}
