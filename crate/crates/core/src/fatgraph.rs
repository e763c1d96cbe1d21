//! Fat stars: Neumann Laplacians on thin cross-shaped planar domains.
//!
//! The domain is a central square of side `ε` with up to four rectangular
//! arms of length `ℓ` and width `p_e·ε` leaving its sides (`+x`, `+y`, `−x`,
//! `−y` in arm order). It is discretized on a cell-centred grid of step
//! `h = ε/div`: the 5-point stencil with mirrored ghost cells, so every face
//! on the outer boundary carries zero flux.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};

use crate::builders::fat_delta_prime_lift_params;
use crate::coupling::{CouplingSpec, KsPair, NamedForm, Strength};
use crate::graph::{star, GraphHamiltonian};
use crate::linalg::{c64, CMat};
use crate::sparse::{CsrMatrix, SkylineCholesky};
use crate::{Error, Result};

/// Potential placed in the vertex region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FatMode {
    Free,
    /// `q/ε` on the central square; the graph limit is δ(q).
    Delta { q: f64 },
    /// The lifted Cheon–Shigehara scheme with `a_ε = ε^{α_exp}`; the graph
    /// limit is δ′ₛ(β).
    DeltaPrime { beta: f64, alpha_exp: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FatStarSpec {
    pub arms: usize,
    pub length: f64,
    pub eps: f64,
    /// Relative arm widths `p_e`; empty means all 1.
    pub rel_widths: Vec<f64>,
    /// Cells across the central square.
    pub div: usize,
    pub mode: FatMode,
}

impl FatStarSpec {
    pub fn new(arms: usize, length: f64, eps: f64, div: usize, mode: FatMode) -> Self {
        FatStarSpec {
            arms,
            length,
            eps,
            rel_widths: Vec::new(),
            div,
            mode,
        }
    }

    pub fn width(&self, arm: usize) -> f64 {
        self.rel_widths.get(arm).copied().unwrap_or(1.0)
    }

    pub fn step(&self) -> f64 {
        self.eps / self.div as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.arms) {
            return Err(Error::Unsupported(format!(
                "{} arms; axis-aligned fat stars have 1 to 4",
                self.arms
            )));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidParameter(format!("ε = {} must be positive", self.eps)));
        }
        if !(self.length > self.eps) {
            return Err(Error::InvalidParameter(format!(
                "arm length {} must exceed ε = {}",
                self.length, self.eps
            )));
        }
        if self.div < 4 {
            return Err(Error::InvalidParameter(format!("div = {} must be at least 4", self.div)));
        }
        if !self.rel_widths.is_empty() && self.rel_widths.len() != self.arms {
            return Err(Error::DimensionMismatch {
                at: "rel_widths".into(),
                expected: self.arms,
                found: self.rel_widths.len(),
            });
        }
        for a in 0..self.arms {
            let w = self.width(a);
            if !(w > 0.0 && w <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "rel_widths[{a}] = {w} must lie in (0, 1]"
                )));
            }
            cells_exact(w * self.div as f64, &format!("rel_widths[{a}]·div"))?;
        }
        cells_exact(self.length / self.step(), "length/h")?;
        if let FatMode::DeltaPrime { .. } = self.mode {
            if self.rel_widths.iter().any(|&w| w != 1.0) {
                return Err(Error::Unsupported(
                    "the δ′ₛ lift needs arms of full width".into(),
                ));
            }
        }
        Ok(())
    }
}

fn cells_exact(x: f64, what: &str) -> Result<usize> {
    let r = x.round();
    if r < 1.0 || (x - r).abs() > 1e-6 * r.max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "{what} = {x} must be a positive integer"
        )));
    }
    Ok(r as usize)
}

/// The assembled operator `−Δ_N + V` on the cell grid.
#[derive(Debug, Clone)]
pub struct FatOperator {
    pub matrix: CsrMatrix,
    /// Cell coordinates in units of `h`; the central square is `[0, div)²`.
    pub cells: Vec<(i64, i64)>,
    pub h: f64,
    pub eps: f64,
    /// Per arm, per cell along the arm (from the square outward), the cell
    /// indices across the width.
    pub arm_cells: Vec<Vec<Vec<usize>>>,
    pub square_cells: Vec<usize>,
    pub rel_widths: Vec<f64>,
}

const DIRS: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

impl FatOperator {
    pub fn assemble(spec: &FatStarSpec) -> Result<Self> {
        spec.validate()?;
        let div = spec.div as i64;
        let h = spec.step();
        let along = cells_exact(spec.length / h, "length/h")? as i64;
        let mut index: BTreeMap<(i64, i64), usize> = BTreeMap::new();
        let mut cells = Vec::new();
        let mut push = |c: (i64, i64), cells: &mut Vec<(i64, i64)>| {
            let i = cells.len();
            index.insert(c, i);
            cells.push(c);
            i
        };
        // Ordering: −x arm (tip first), square, +x arm, then the vertical
        // arms from the square outward. Keeps the skyline short.
        let mut arm_cells = vec![Vec::new(); spec.arms];
        let mut square_cells = Vec::new();
        let across = |arm: usize| -> (i64, i64) {
            let w = (spec.width(arm) * spec.div as f64).round() as i64;
            let lo = (div - w) / 2;
            (lo, lo + w)
        };
        let arm_cell = |arm: usize, k: i64, t: i64| -> (i64, i64) {
            match arm {
                0 => (div + k, t),
                1 => (t, div + k),
                2 => (-1 - k, t),
                _ => (t, -1 - k),
            }
        };
        if spec.arms > 2 {
            let (lo, hi) = across(2);
            let mut rows = vec![Vec::new(); along as usize];
            for k in (0..along).rev() {
                for t in lo..hi {
                    rows[k as usize].push(push(arm_cell(2, k, t), &mut cells));
                }
            }
            arm_cells[2] = rows;
        }
        for i in 0..div {
            for j in 0..div {
                square_cells.push(push((i, j), &mut cells));
            }
        }
        for arm in [0usize, 1, 3] {
            if arm >= spec.arms {
                continue;
            }
            let (lo, hi) = across(arm);
            let mut rows = Vec::new();
            for k in 0..along {
                rows.push((lo..hi).map(|t| push(arm_cell(arm, k, t), &mut cells)).collect());
            }
            arm_cells[arm] = rows;
        }
        let mut potential = vec![0.0; cells.len()];
        match spec.mode {
            FatMode::Free => {}
            FatMode::Delta { q } => {
                for &c in &square_cells {
                    potential[c] = q / spec.eps;
                }
            }
            FatMode::DeltaPrime { beta, alpha_exp } => {
                let p = fat_delta_prime_lift_params(beta, spec.eps, alpha_exp)?;
                for &c in &square_cells {
                    potential[c] = p.q0 / spec.eps;
                }
                // Edge squares of side ε centred at distance a along each arm:
                // the rows whose centres fall inside, with the value rescaled
                // so that the integral stays exactly q_e·ε.
                let (from, to) = (p.a - spec.eps / 2.0, p.a + spec.eps / 2.0);
                if from < h || to > spec.length - h {
                    let min_div = if from > 0.0 {
                        format!("div ≥ {}", (spec.eps / from).ceil())
                    } else {
                        "no grid can, since a < ε/2".to_string()
                    };
                    return Err(Error::InvalidParameter(format!(
                        "grid does not resolve the edge squares at a = {:.6} ({min_div}, \
                         and the square must end before the arm tip)",
                        p.a
                    )));
                }
                let rows: Vec<usize> = (0..along as usize)
                    .filter(|&k| {
                        let x = (k as f64 + 0.5) * h;
                        x >= from && x < to
                    })
                    .collect();
                let value = p.qe / spec.eps * (spec.eps / h) / rows.len() as f64;
                for arm in &arm_cells {
                    for &k in &rows {
                        for &c in &arm[k] {
                            potential[c] = value;
                        }
                    }
                }
            }
        }
        let inv_h2 = 1.0 / (h * h);
        let mut trip = Vec::with_capacity(cells.len() * 5);
        for (i, &(x, y)) in cells.iter().enumerate() {
            let mut deg = 0.0;
            for (dx, dy) in DIRS {
                if let Some(&j) = index.get(&(x + dx, y + dy)) {
                    trip.push((i, j, -inv_h2));
                    deg += 1.0;
                }
            }
            trip.push((i, i, deg * inv_h2 + potential[i]));
        }
        let rel_widths = (0..spec.arms).map(|a| spec.width(a)).collect();
        Ok(FatOperator {
            matrix: CsrMatrix::from_triplets(cells.len(), trip),
            cells,
            h,
            eps: spec.eps,
            arm_cells,
            square_cells,
            rel_widths,
        })
    }

    /// Neumann Laplacian on the rectangle `[0, nx·h] × [0, ny·h]`, used to
    /// check the stencil against separable eigenvalues.
    pub fn rectangle(nx: usize, ny: usize, h: f64) -> Self {
        let idx = |i: usize, j: usize| i * ny + j;
        let inv_h2 = 1.0 / (h * h);
        let mut trip = Vec::new();
        let mut cells = Vec::new();
        for i in 0..nx {
            for j in 0..ny {
                cells.push((i as i64, j as i64));
                let mut deg = 0.0;
                let nb = [
                    (i.wrapping_sub(1), j),
                    (i + 1, j),
                    (i, j.wrapping_sub(1)),
                    (i, j + 1),
                ];
                for (a, b) in nb {
                    if a < nx && b < ny {
                        trip.push((idx(i, j), idx(a, b), -inv_h2));
                        deg += 1.0;
                    }
                }
                trip.push((idx(i, j), idx(i, j), deg * inv_h2));
            }
        }
        FatOperator {
            matrix: CsrMatrix::from_triplets(nx * ny, trip),
            cells,
            h,
            eps: ny as f64 * h,
            arm_cells: Vec::new(),
            square_cells: Vec::new(),
            rel_widths: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.n
    }

    pub fn cell_area(&self) -> f64 {
        self.h * self.h
    }

    /// Arm coordinates of the cell centres along each arm, measured from
    /// the square.
    pub fn arm_grid(&self, arm: usize) -> Vec<f64> {
        (0..self.arm_cells[arm].len())
            .map(|k| (k as f64 + 0.5) * self.h)
            .collect()
    }
}

/// The star graph a fat star shrinks to: arms of length `ℓ` with Neumann
/// tips. Arm widths enter through the unitary rescaling `φ_e = p_e f_e`,
/// under which the weighted vertex conditions become `φ_e/p_e` continuous and
/// `Σ p_e φ′_e = q·φ_0/p_0`.
pub fn graph_reference(spec: &FatStarSpec) -> Result<GraphHamiltonian> {
    spec.validate()?;
    let n = spec.arms;
    let weights: Vec<f64> = (0..n).map(|a| spec.width(a)).collect();
    let uniform = weights.iter().all(|&w| w == 1.0);
    let centre = match spec.mode {
        FatMode::Free if uniform => CouplingSpec::Named(NamedForm::Free),
        FatMode::Delta { q } if uniform => CouplingSpec::Named(NamedForm::Delta(Strength::Finite(q))),
        FatMode::DeltaPrime { beta, .. } => {
            CouplingSpec::Named(NamedForm::DeltaPrime(Strength::Finite(beta)))
        }
        FatMode::Free | FatMode::Delta { .. } => {
            let q = match spec.mode {
                FatMode::Delta { q } => q,
                _ => 0.0,
            };
            let mut a = CMat::zeros(n, n);
            let mut b = CMat::zeros(n, n);
            for i in 0..n - 1 {
                a[(i, i)] = c64(1.0 / weights[i], 0.0);
                a[(i, i + 1)] = c64(-1.0 / weights[i + 1], 0.0);
            }
            for (e, &w) in weights.iter().enumerate() {
                b[(n - 1, e)] = c64(w, 0.0);
            }
            a[(n - 1, 0)] = c64(-q / weights[0], 0.0);
            CouplingSpec::Ks(KsPair { a, b })
        }
    };
    star(n, Some(spec.length), centre, Some(CouplingSpec::Named(NamedForm::Neumann)), &[])
}

/// Eigenpairs from [`lowest_eigs`]. Vectors are normalized in the discrete
/// `L²` norm `Σ h²|u|²`.
#[derive(Debug, Clone, PartialEq)]
pub struct FatEigs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// `‖Au − λu‖/‖u‖` per pair.
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

/// The `count` smallest eigenvalues by shift-invert block subspace
/// iteration with Rayleigh–Ritz.
///
/// Converged when every residual is at most `tol·max(|λ|, 1)`; the floor of
/// one keeps a zero eigenvalue from demanding an absolute residual of zero.
pub fn lowest_eigs(op: &FatOperator, count: usize, tol: f64, seed: u64) -> Result<FatEigs> {
    let a = &op.matrix;
    let n = a.n;
    if count == 0 || count > 10 || count > n {
        return Err(Error::InvalidParameter(format!(
            "count = {count} must lie in 1..=min(10, {n})"
        )));
    }
    let p = (count + count.max(4)).min(n);
    let shift = -(a.gershgorin_lower().min(0.0) - 1.0);
    let chol = SkylineCholesky::new(a, shift)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    orthonormalize(&mut x)?;
    let mut ax = vec![vec![0.0; n]; p];
    let max_iter = 3000;
    for it in 1..=max_iter {
        for v in x.iter_mut() {
            chol.solve_in_place(v);
        }
        orthonormalize(&mut x)?;
        for (v, av) in x.iter().zip(ax.iter_mut()) {
            a.mul_vec(v, av);
        }
        let mut hm = vec![0.0; p * p];
        for i in 0..p {
            for j in i..p {
                let s = dot(&x[i], &ax[j]);
                hm[i * p + j] = s;
                hm[j * p + i] = s;
            }
        }
        let (theta, w) = jacobi_eigen(&hm, p);
        let rotate = |src: &[Vec<f64>]| -> Vec<Vec<f64>> {
            (0..p)
                .map(|k| {
                    let mut out = vec![0.0; n];
                    for (i, s) in src.iter().enumerate() {
                        let c = w[i * p + k];
                        if c != 0.0 {
                            out.iter_mut().zip(s).for_each(|(o, v)| *o += c * v);
                        }
                    }
                    out
                })
                .collect()
        };
        x = rotate(&x);
        ax = rotate(&ax);
        let residuals: Vec<f64> = (0..count)
            .map(|k| {
                let r: f64 = ax[k]
                    .iter()
                    .zip(&x[k])
                    .map(|(av, v)| (av - theta[k] * v).powi(2))
                    .sum();
                r.sqrt()
            })
            .collect();
        if residuals
            .iter()
            .zip(&theta)
            .all(|(r, l)| *r <= tol * l.abs().max(1.0))
        {
            let scale = 1.0 / op.h;
            let vectors = x[..count]
                .iter()
                .map(|v| {
                    // Fix the sign so the largest entry is positive.
                    let big = v.iter().fold(0.0f64, |m, &c| if c.abs() > m.abs() { c } else { m });
                    let s = if big < 0.0 { -scale } else { scale };
                    v.iter().map(|c| c * s).collect()
                })
                .collect();
            return Ok(FatEigs {
                values: theta[..count].to_vec(),
                vectors,
                residuals,
                iterations: it,
            });
        }
    }
    Err(Error::NonConvergence {
        what: "fat-star subspace iteration".to_string(),
        iterations: max_iter,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Modified Gram–Schmidt, applied twice.
fn orthonormalize(x: &mut [Vec<f64>]) -> Result<()> {
    for i in 0..x.len() {
        for _ in 0..2 {
            for j in 0..i {
                let (head, tail) = x.split_at_mut(i);
                let c = dot(&head[j], &tail[0]);
                tail[0].iter_mut().zip(&head[j]).for_each(|(v, q)| *v -= c * q);
            }
        }
        let nrm = dot(&x[i], &x[i]).sqrt();
        if !(nrm > 0.0) {
            return Err(Error::Degenerate("subspace collapsed".into()));
        }
        x[i].iter_mut().for_each(|v| *v /= nrm);
    }
    Ok(())
}

/// Cyclic Jacobi for a small symmetric matrix (row-major `p×p`). Returns
/// ascending eigenvalues and the eigenvectors as columns.
fn jacobi_eigen(m: &[f64], p: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = m.to_vec();
    let mut v = vec![0.0; p * p];
    for i in 0..p {
        v[i * p + i] = 1.0;
    }
    for _ in 0..100 {
        let off: f64 = (0..p)
            .flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * p + j] * a[i * p + j])
            .sum();
        let diag: f64 = (0..p).map(|i| a[i * p + i] * a[i * p + i]).sum();
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for r in 0..p {
            for s in (r + 1)..p {
                let ars = a[r * p + s];
                if ars == 0.0 {
                    continue;
                }
                let theta = (a[s * p + s] - a[r * p + r]) / (2.0 * ars);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..p {
                    let akr = a[k * p + r];
                    let aks = a[k * p + s];
                    a[k * p + r] = c * akr - sn * aks;
                    a[k * p + s] = sn * akr + c * aks;
                }
                for k in 0..p {
                    let ark = a[r * p + k];
                    let ask = a[s * p + k];
                    a[r * p + k] = c * ark - sn * ask;
                    a[s * p + k] = sn * ark + c * ask;
                }
                for k in 0..p {
                    let vkr = v[k * p + r];
                    let vks = v[k * p + s];
                    v[k * p + r] = c * vkr - sn * vks;
                    v[k * p + s] = sn * vkr + c * vks;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| a[i * p + i].total_cmp(&a[j * p + j]));
    let vals = order.iter().map(|&i| a[i * p + i]).collect();
    let mut vecs = vec![0.0; p * p];
    for (c, &o) in order.iter().enumerate() {
        for r in 0..p {
            vecs[r * p + c] = v[r * p + o];
        }
    }
    (vals, vecs)
}

/// The identification `Jφ`: on each arm `ε^{−1/2} φ_e/p_e`, constant across
/// the width; zero on the square. `samples[e][k]` is `φ_e` at the `k`-th
/// cell centre of [`FatOperator::arm_grid`].
pub fn lift(op: &FatOperator, samples: &[Vec<f64>]) -> Result<Vec<f64>> {
    if samples.len() != op.arm_cells.len() {
        return Err(Error::Precondition(format!(
            "{} edge samples for {} arms",
            samples.len(),
            op.arm_cells.len()
        )));
    }
    let mut out = vec![0.0; op.dim()];
    let s = op.eps.powf(-0.5);
    for (arm, (rows, phi)) in op.arm_cells.iter().zip(samples).enumerate() {
        if rows.len() != phi.len() {
            return Err(Error::Precondition(format!(
                "arm {arm}: {} samples for a grid of {} cells",
                phi.len(),
                rows.len()
            )));
        }
        let w = op.rel_widths[arm];
        for (row, &f) in rows.iter().zip(phi) {
            for &c in row {
                out[c] = s * f / w;
            }
        }
    }
    Ok(out)
}

/// `‖Jφ − u‖` in the discrete `L²` norm, where `u` is eigenvector `index`
/// of `eigs` with its sign aligned to `Jφ`. The graph function is first
/// normalized so that `‖Jφ‖ = 1`.
pub fn lift_and_compare(op: &FatOperator, samples: &[Vec<f64>], eigs: &FatEigs, index: usize) -> Result<f64> {
    let lam = *eigs
        .values
        .get(index)
        .ok_or_else(|| Error::InvalidParameter(format!("no eigenpair {index}")))?;
    let gap_tol = 1e-3 * lam.abs().max(1.0);
    let close = |j: usize| eigs.values.get(j).is_some_and(|&m| (m - lam).abs() < gap_tol);
    if (index > 0 && close(index - 1)) || close(index + 1) {
        return Err(Error::Degenerate(format!(
            "eigenvalue {lam} is not simple; matching is ambiguous"
        )));
    }
    if index + 1 == eigs.values.len() {
        return Err(Error::Precondition(
            "compute at least one eigenvalue above the compared one to confirm it is simple".into(),
        ));
    }
    let j = lift(op, samples)?;
    let area = op.cell_area();
    let nj = (j.iter().map(|v| v * v).sum::<f64>() * area).sqrt();
    if !(nj > 0.0) {
        return Err(Error::Degenerate("graph function vanishes on the arms".into()));
    }
    let u = &eigs.vectors[index];
    let inner: f64 = j.iter().zip(u).map(|(a, b)| a * b).sum::<f64>() * area / nj;
    let sign = if inner < 0.0 { -1.0 } else { 1.0 };
    let d: f64 = j
        .iter()
        .zip(u)
        .map(|(a, b)| (a / nj - sign * b).powi(2))
        .sum::<f64>()
        * area;
    Ok(d.sqrt())
}
