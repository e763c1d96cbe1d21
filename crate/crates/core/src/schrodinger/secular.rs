//! Amplitude-matching systems on a whole graph.
//!
//! Every finite edge is cut at its potential breakpoints and δ points into
//! constant-potential segments. On a segment of length `ℓ` with midpoint `m`
//! the unknowns are the coefficients of `cos(q(x − m))` and
//! `sin(q(x − m))/q`, with `q = √(k² − V)`, `Im q ≥ 0`, times the gauge
//! factor `e^{iAx}`. This even/odd pair stays independent for every `q`,
//! including `q = 0` and large imaginary `q`, so the matrix is singular
//! exactly at eigenvalues. A half-line is cut the same way up to the end of
//! its dressing and continued by one outgoing (or decaying) exponential.
//!
//! Rows are the vertex conditions `(U − I)Ψ + i(U + I)Ψ' = 0`, with `Ψ'`
//! the covariant derivative pointing into the edges, and continuity / jump
//! conditions at every cut. For undressed graphs this gives
//! `2·(#finite edges) + #half-lines` unknowns.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use super::transfer::sinc;
use crate::coupling::{ks_from_st, ks_from_unitary, st_from_unitary, KsPair, RANK_TOL};
use crate::graph::{End, GraphHamiltonian, Length};
use crate::linalg::{c64, sqrt_upper, sorted_svd, CMat, C64, I, ONE};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct Seg {
    pub x0: f64,
    pub len: f64,
    pub v: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct EdgeLayout {
    pub id: u32,
    pub segs: Vec<Seg>,
    /// δ strength at the cut after segment `i` (0 for a plain breakpoint).
    pub jumps: Vec<f64>,
    pub a: f64,
    pub col: usize,
    /// `Some(X)` for half-lines, where `X` is the end of the dressing.
    pub tail: Option<f64>,
    pub tail_jump: f64,
}

impl EdgeLayout {
    fn new(h: &GraphHamiltonian, id: u32, col: usize) -> Self {
        let e = h.graph().edge(id).expect("edge in layout");
        let d = &e.dressing;
        let end = match e.length {
            Length::Finite(l) => l,
            Length::Infinite => d.support_end(),
        };
        let mut cuts: Vec<f64> = d
            .potential
            .iter()
            .map(|p| p.0)
            .chain(d.delta_points.iter().map(|p| p.0))
            .filter(|&x| x > 0.0 && x < end)
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let strength_at = |x: f64| {
            d.delta_points
                .iter()
                .filter(|p| p.0 == x)
                .map(|p| p.1)
                .sum::<f64>()
        };
        let mut segs = Vec::new();
        let mut jumps = Vec::new();
        let mut prev = 0.0;
        for &c in cuts.iter().chain(core::iter::once(&end)) {
            if c > prev {
                segs.push(Seg {
                    x0: prev,
                    len: c - prev,
                    v: d.potential_at(prev),
                });
            }
            if c < end {
                jumps.push(strength_at(c));
            }
            prev = c;
        }
        let tail = e.is_half_line().then_some(end);
        EdgeLayout {
            id,
            segs,
            jumps,
            a: d.vector_potential,
            col,
            tail,
            tail_jump: if e.is_half_line() { strength_at(end) } else { 0.0 },
        }
    }

    /// Unknowns owned by this edge (tail amplitude included).
    fn width(&self) -> usize {
        2 * self.segs.len() + usize::from(self.tail.is_some())
    }

    fn tail_col(&self) -> usize {
        self.col + 2 * self.segs.len()
    }
}

/// `(ψ, Dψ)` of the two basis functions of `seg` at local offset `u` from
/// its midpoint, without the gauge factor: `cos(q u)` and
/// `max(1, |q|) sin(q u)/q`. Both are scaled by
/// `e^{−|Im q|ℓ/2}` so that steep exponentials do not overflow.
fn basis(k: C64, seg: &Seg, u: f64) -> [[C64; 2]; 2] {
    let q = sqrt_upper(k * k - seg.v);
    let z = q * u;
    let big = (q.im.abs() * seg.len * 0.5).max(0.0);
    let (a, b) = (z.re, z.im);
    let ep = (b - big).exp();
    let em = (-b - big).exp();
    let ch = 0.5 * (ep + em);
    let sh = 0.5 * (ep - em);
    let cos = c64(a.cos() * ch, -a.sin() * sh);
    let sin = c64(a.sin() * ch, a.cos() * sh);
    let sin_over_q = if (q * seg.len).norm() < 1e-3 {
        sinc(z) * u * (-big).exp()
    } else {
        sin / q
    };
    // Rescale the second function for large |q| so that values and
    // derivatives of both functions grow alike.
    let s = q.norm().max(1.0);
    [[cos, -q * sin], [sin_over_q * s, cos * s]]
}

fn gauge(a: f64, x: f64) -> C64 {
    (I * (a * x)).exp()
}

/// A boundary value as a combination of unknowns.
#[derive(Default)]
struct Expr {
    terms: Vec<(usize, C64, C64)>,
}

impl Expr {
    fn push(&mut self, col: usize, psi: C64, dpsi: C64) {
        self.terms.push((col, psi, dpsi));
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Tail {
    /// `e^{ik(x−X)}`: decaying for `Im k > 0`.
    Decaying,
    /// `e^{ikx}` outgoing; incoming `e^{−ikx}` goes to the right-hand side.
    Scattering,
}

/// The matching system of a [`GraphHamiltonian`].
#[derive(Debug, Clone)]
pub struct SecularSystem<'a> {
    h: &'a GraphHamiltonian,
    pub(crate) edges: Vec<EdgeLayout>,
    /// Vertex conditions `Aψ + BDψ = 0`, in vertex-id order.
    conditions: Vec<KsPair>,
    size: usize,
}

impl<'a> SecularSystem<'a> {
    pub fn new(h: &'a GraphHamiltonian) -> Self {
        let mut edges = Vec::new();
        let mut col = 0;
        for &id in h.graph().edges().keys() {
            let l = EdgeLayout::new(h, id, col);
            col += l.width();
            edges.push(l);
        }
        // The ST form keeps rows balanced when |k| is large, where the
        // rank-deficient B of the unitary form would dominate.
        let conditions = h
            .graph()
            .vertices()
            .keys()
            .map(|&v| {
                let u = h.unitary(v);
                st_from_unitary(u, RANK_TOL)
                    .map(|st| ks_from_st(&st))
                    .unwrap_or_else(|_| ks_from_unitary(u))
            })
            .collect();
        SecularSystem {
            h,
            edges,
            conditions,
            size: col,
        }
    }

    pub fn hamiltonian(&self) -> &GraphHamiltonian {
        self.h
    }

    pub fn size(&self) -> usize {
        self.size
    }

    fn layout(&self, id: u32) -> &EdgeLayout {
        self.edges
            .iter()
            .find(|l| l.id == id)
            .expect("edge id in layout")
    }

    /// Boundary value and inward derivative at one edge end.
    fn end_expr(&self, k: C64, edge: u32, end: End, tail: Tail, rhs: &mut Expr) -> Expr {
        let l = self.layout(edge);
        let mut e = Expr::default();
        match end {
            End::Start => {
                if let Some(seg) = l.segs.first() {
                    let b = basis(k, seg, -seg.len * 0.5);
                    for (j, st) in b.iter().enumerate() {
                        e.push(l.col + j, st[0], st[1]);
                    }
                } else {
                    // Bare half-line: the tail reaches the vertex.
                    self.tail_terms(k, l, 0.0, tail, &mut e, rhs, ONE);
                }
            }
            End::End => {
                let seg = l.segs.last().expect("finite edge has a segment");
                let x = seg.x0 + seg.len;
                let g = gauge(l.a, x);
                let b = basis(k, seg, seg.len * 0.5);
                let col = l.col + 2 * (l.segs.len() - 1);
                for (j, st) in b.iter().enumerate() {
                    e.push(col + j, g * st[0], -g * st[1]);
                }
            }
        }
        e
    }

    /// `(ψ, Dψ)` of the tail at `x = X`, scaled by `sign`.
    #[allow(clippy::too_many_arguments)]
    fn tail_terms(&self, k: C64, l: &EdgeLayout, x: f64, tail: Tail, e: &mut Expr, rhs: &mut Expr, sign: C64) {
        let g = gauge(l.a, x) * sign;
        match tail {
            Tail::Decaying => e.push(l.tail_col(), g, g * I * k),
            Tail::Scattering => {
                let out = (I * k * x).exp();
                let inc = (-I * k * x).exp();
                e.push(l.tail_col(), g * out, g * out * I * k);
                rhs.push(l.tail_col(), g * inc, -g * inc * I * k);
            }
        }
    }

    /// Assembles the system. Columns of `rhs` (scattering mode only) hold
    /// the incoming wave of each half-line, indexed like the tail columns.
    fn assemble(&self, k: C64, tail: Tail) -> (CMat, CMat) {
        let n = self.size;
        let mut m = CMat::zeros(n, n);
        let mut rhs = CMat::zeros(n, n);
        let mut row = 0;
        let g = self.h.graph();
        for (&v, cond) in g.vertices().keys().zip(&self.conditions) {
            let ends = g.ends_at(v);
            let (a, b) = (&cond.a, &cond.b);
            let mut exprs = Vec::with_capacity(ends.len());
            let mut incoming = Vec::with_capacity(ends.len());
            for er in &ends {
                let mut inc = Expr::default();
                exprs.push(self.end_expr(k, er.edge, er.end, tail, &mut inc));
                incoming.push(inc);
            }
            for r in 0..ends.len() {
                for (c, (ex, inc)) in exprs.iter().zip(&incoming).enumerate() {
                    for &(col, p, d) in &ex.terms {
                        m[(row + r, col)] += a[(r, c)] * p + b[(r, c)] * d;
                    }
                    for &(col, p, d) in &inc.terms {
                        rhs[(row + r, col)] += a[(r, c)] * p + b[(r, c)] * d;
                    }
                }
            }
            row += ends.len();
        }
        for l in &self.edges {
            for (i, w) in l.segs.windows(2).enumerate() {
                let x = w[1].x0;
                let gx = gauge(l.a, x);
                let left = basis(k, &w[0], w[0].len * 0.5);
                let right = basis(k, &w[1], -w[1].len * 0.5);
                let (cl, cr) = (l.col + 2 * i, l.col + 2 * i + 2);
                let c = c64(l.jumps[i], 0.0);
                for j in 0..2 {
                    m[(row, cl + j)] -= gx * left[j][0];
                    m[(row, cr + j)] += gx * right[j][0];
                    m[(row + 1, cl + j)] -= gx * (left[j][1] + c * left[j][0]);
                    m[(row + 1, cr + j)] += gx * right[j][1];
                }
                row += 2;
            }
            if let (Some(x), Some(seg)) = (l.tail, l.segs.last()) {
                let gx = gauge(l.a, x);
                let left = basis(k, seg, seg.len * 0.5);
                let cl = l.col + 2 * (l.segs.len() - 1);
                let c = c64(l.tail_jump, 0.0);
                for j in 0..2 {
                    m[(row, cl + j)] -= gx * left[j][0];
                    m[(row + 1, cl + j)] -= gx * (left[j][1] + c * left[j][0]);
                }
                let mut e = Expr::default();
                let mut inc = Expr::default();
                let xt = if tail == Tail::Decaying { 0.0 } else { x };
                self.tail_terms(k, l, xt, tail, &mut e, &mut inc, ONE);
                // The decaying tail is normalized at X itself.
                let fix = if tail == Tail::Decaying { gauge(l.a, x) } else { ONE };
                for &(col, p, d) in &e.terms {
                    m[(row, col)] += fix * p;
                    m[(row + 1, col)] += fix * d;
                }
                for &(col, p, d) in &inc.terms {
                    rhs[(row, col)] += p;
                    rhs[(row + 1, col)] += d;
                }
                row += 2;
            }
        }
        debug_assert_eq!(row, n);
        (m, rhs)
    }

    /// `M(k)` with decaying half-line tails (real `k` on compact graphs,
    /// `k = iκ` for bound states).
    pub fn matrix(&self, k: C64) -> CMat {
        self.assemble(k, Tail::Decaying).0
    }

    /// `σ_min/σ_max` of the row- and column-equilibrated `M(k)`.
    pub fn sigma_ratio(&self, k: C64) -> f64 {
        let (eq, _) = equilibrate(&self.matrix(k));
        let s = crate::linalg::singular_values(&eq);
        match (s.first(), s.last()) {
            (Some(&hi), Some(&lo)) if hi > 0.0 => lo / hi,
            _ => 0.0,
        }
    }

    /// Kernel dimension of the equilibrated `M(k)` at relative tolerance
    /// `tol`, and a kernel vector in the original column scaling.
    pub fn kernel(&self, k: C64, tol: f64) -> (usize, Vec<C64>) {
        let (eq, cs) = equilibrate(&self.matrix(k));
        let svd = sorted_svd(&eq);
        let top = svd.sigma.first().copied().unwrap_or(0.0);
        let dim = svd.sigma.iter().filter(|&&s| s <= tol * top).count();
        let last = svd.sigma.len().saturating_sub(1);
        let v = (0..self.size).map(|i| svd.v[(i, last)] * cs[i]).collect();
        (dim.max(1), v)
    }

    /// Scattering solution at real `k`: the matrix mapping incoming to
    /// outgoing amplitudes over half-lines in edge-id order.
    pub fn smatrix(&self, k: f64) -> Result<CMat> {
        let kc = c64(k, 0.0);
        let (m, rhs) = self.assemble(kc, Tail::Scattering);
        let (eq, cs) = equilibrate(&m);
        let rc = crate::linalg::rcond(&eq);
        if !(rc >= 1e-12) {
            return Err(Error::SingularMatching { re: k, im: 0.0 });
        }
        let tails: Vec<usize> = self
            .edges
            .iter()
            .filter(|l| l.tail.is_some())
            .map(|l| l.tail_col())
            .collect();
        // Recover the row scaling used by `equilibrate`.
        let rows = row_scales(&m);
        let mut b = CMat::zeros(self.size, tails.len());
        for (j, &c) in tails.iter().enumerate() {
            for r in 0..self.size {
                b[(r, j)] = -rhs[(r, c)] * rows[r];
            }
        }
        let x = eq
            .lu()
            .solve(&b)
            .ok_or(Error::SingularMatching { re: k, im: 0.0 })?;
        Ok(CMat::from_fn(tails.len(), tails.len(), |i, j| {
            x[(tails[i], j)] * cs[tails[i]]
        }))
    }

    /// Evaluates the function described by `coef` on edge `edge` at `x`.
    pub fn evaluate(&self, k: C64, coef: &[C64], edge: u32, x: f64) -> C64 {
        let l = self.layout(edge);
        let g = gauge(l.a, x);
        for (i, seg) in l.segs.iter().enumerate() {
            let last = i + 1 == l.segs.len();
            if x < seg.x0 + seg.len || (last && l.tail.is_none()) {
                let b = basis(k, seg, x - seg.x0 - seg.len * 0.5);
                let c = l.col + 2 * i;
                return g * (coef[c] * b[0][0] + coef[c + 1] * b[1][0]);
            }
        }
        let xt = l.tail.unwrap_or(0.0);
        coef[l.tail_col()] * g * (I * k * (x - xt)).exp()
    }
}

fn row_scales(m: &CMat) -> Vec<f64> {
    (0..m.nrows())
        .map(|r| {
            let n = m.row(r).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if n > 0.0 {
                1.0 / n
            } else {
                1.0
            }
        })
        .collect()
}

/// Normalizes rows, then columns, to unit 2-norm. Returns the scaled matrix
/// and the column factors (original solution = factor · scaled solution).
pub(crate) fn equilibrate(m: &CMat) -> (CMat, Vec<f64>) {
    let rows = row_scales(m);
    let mut out = m.clone();
    for r in 0..out.nrows() {
        for c in 0..out.ncols() {
            out[(r, c)] *= rows[r];
        }
    }
    let mut cols = vec![1.0; out.ncols()];
    for c in 0..out.ncols() {
        let n = out.column(c).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n > 0.0 {
            cols[c] = 1.0 / n;
            for r in 0..out.nrows() {
                out[(r, c)] *= cols[c];
            }
        }
    }
    (out, cols)
}
