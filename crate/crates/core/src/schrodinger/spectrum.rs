//! Eigenvalues, bound states and scattering matrices from the secular system.

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use super::secular::SecularSystem;
use crate::coupling::ScatteringMatrix;
use crate::graph::{GraphHamiltonian, Length};
use crate::linalg::{c64, C64};
use crate::{Error, Result};

/// Tuning of the root search on `σ_min/σ_max` of the secular matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootOptions {
    /// A refined minimum is a root when `σ_min ≤ tol·σ_max`.
    pub tol: f64,
    /// Singular values below `multiplicity_tol·σ_max` count toward the kernel.
    pub multiplicity_tol: f64,
    /// Scan step in `k`; `None` picks `π/(40·total length)`.
    pub step: Option<f64>,
    /// Grid points per decade of the logarithmic `κ` scan.
    pub per_decade: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        RootOptions {
            tol: 1e-8,
            multiplicity_tol: 1e-7,
            step: None,
            per_decade: 400,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenvalue {
    pub k: f64,
    pub multiplicity: usize,
}

impl Eigenvalue {
    pub fn energy(&self) -> f64 {
        self.k * self.k
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundState {
    pub kappa: f64,
    pub energy: f64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundStates {
    /// Ascending in `κ`, so the deepest state comes last.
    pub states: Vec<BoundState>,
    /// The determinant was still falling at `κ_max`: more roots may lie above.
    pub truncated: bool,
}

impl BoundStates {
    pub fn deepest(&self) -> Option<&BoundState> {
        self.states.last()
    }
}

const GOLDEN: f64 = 0.381_966_011_250_105_1;

/// Minimizes `f` on `[a, b]` by golden-section search.
fn golden_min(f: &mut impl FnMut(f64) -> f64, mut a: f64, mut b: f64, xtol: f64) -> (f64, f64) {
    let mut x1 = a + GOLDEN * (b - a);
    let mut x2 = b - GOLDEN * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if b - a <= xtol {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = a + GOLDEN * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = b - GOLDEN * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Scans `f` on the sorted grid `xs` and refines every local minimum.
/// Returns `(x, f(x))` for refined minima with `f ≤ tol`, and the smallest
/// rejected refined value that still looked like a near miss.
fn scan_roots(
    f: &mut impl FnMut(f64) -> f64,
    xs: &[f64],
    tol: f64,
    rel_xtol: f64,
) -> (Vec<(f64, f64)>, Option<(f64, f64)>) {
    let vals: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut roots: Vec<(f64, f64)> = Vec::new();
    let mut near_miss: Option<(f64, f64)> = None;
    let n = xs.len();
    for i in 0..n {
        let left_ok = i == 0 || vals[i] <= vals[i - 1];
        let right_ok = i + 1 == n || vals[i] < vals[i + 1];
        if !(left_ok && right_ok) {
            continue;
        }
        let lo = xs[i.saturating_sub(1)];
        let hi = xs[(i + 1).min(n - 1)];
        let (x, fx) = golden_min(f, lo, hi, rel_xtol * (1.0 + hi.abs()));
        // A minimum pinned to the end of the scan range is not a root there.
        let edge_gap = 1e-3 * (hi - lo);
        if (i == 0 && x - xs[0] <= edge_gap) || (i + 1 == n && xs[n - 1] - x <= edge_gap) {
            continue;
        }
        if fx <= tol {
            if !roots
                .iter()
                .any(|&(r, _)| (r - x).abs() <= 1e-9 * (1.0 + x.abs()))
            {
                roots.push((x, fx));
            }
        } else if fx < 1e-4 && near_miss.is_none_or(|m| fx < m.1) {
            near_miss = Some((x, fx));
        }
    }
    roots.sort_by(|a, b| a.0.total_cmp(&b.0));
    (roots, near_miss)
}

fn total_length(h: &GraphHamiltonian) -> f64 {
    h.graph()
        .edges()
        .values()
        .map(|e| match e.length {
            Length::Finite(l) => l,
            Length::Infinite => e.dressing.support_end(),
        })
        .sum::<f64>()
        .max(1e-12)
}

/// Eigenvalues `k²` of a compact graph with `k ∈ [kmin, kmax]`, ascending.
///
/// Stops once the collected multiplicities reach `max_count`.
pub fn eigenvalues(
    h: &GraphHamiltonian,
    kmin: f64,
    kmax: f64,
    max_count: usize,
    opts: &RootOptions,
) -> Result<Vec<Eigenvalue>> {
    if !h.graph().is_compact() {
        return Err(Error::Precondition(
            "eigenvalue search needs a compact graph (no half-lines)".into(),
        ));
    }
    if !(kmin >= 0.0 && kmax > kmin) {
        return Err(Error::InvalidParameter(format!(
            "k interval [{kmin}, {kmax}] must satisfy 0 ≤ kmin < kmax"
        )));
    }
    let sys = SecularSystem::new(h);
    let step = opts.step.unwrap_or(core::f64::consts::PI / (40.0 * total_length(h)));
    let mut f = |k: f64| sys.sigma_ratio(c64(k, 0.0));
    let npts = ((kmax - kmin) / step).ceil() as usize + 1;
    let xs: Vec<f64> = (0..npts)
        .map(|i| (kmin + i as f64 * step).min(kmax))
        .collect();
    let (mut roots, near_miss) = scan_roots(&mut f, &xs, opts.tol, 1e-14);
    if kmin == 0.0 && f(0.0) <= opts.tol {
        roots.retain(|r| r.0 > 1e-9);
        roots.insert(0, (0.0, 0.0));
    }
    if let Some((x, fx)) = near_miss {
        // Retry the suspicious bracket on a finer grid before giving up.
        let fine: Vec<f64> = (0..=64)
            .map(|i| (x - step + i as f64 * step / 32.0).clamp(kmin, kmax))
            .collect();
        let (extra, still) = scan_roots(&mut f, &fine, opts.tol, 1e-14);
        for r in extra {
            if !roots.iter().any(|q| (q.0 - r.0).abs() <= 1e-9 * (1.0 + r.0)) {
                roots.push(r);
            }
        }
        roots.sort_by(|a, b| a.0.total_cmp(&b.0));
        if let Some((x2, f2)) = still {
            if f2 < 1e-6 && !roots.iter().any(|q| (q.0 - x2).abs() < step) {
                return Err(Error::Bracketing(format!(
                    "σ_min/σ_max reaches only {fx:.2e} near k = {x:.6}; \
                     retry with a scan step below {:.3e}",
                    step / 8.0
                )));
            }
        }
    }
    let mut out = Vec::new();
    let mut total = 0;
    for (k, _) in roots {
        if total >= max_count {
            break;
        }
        let (mult, _) = sys.kernel(c64(k, 0.0), opts.multiplicity_tol);
        total += mult;
        out.push(Eigenvalue { k, multiplicity: mult });
    }
    Ok(out)
}

/// Negative eigenvalues `−κ²` with `κ ∈ (0, κ_max]`.
///
/// The scan runs on a logarithmic grid in `κ` starting at `10⁻⁴`.
/// Compact graphs are accepted as well.
pub fn bound_states(h: &GraphHamiltonian, kappa_max: f64, opts: &RootOptions) -> Result<BoundStates> {
    if !(kappa_max > 1e-4) {
        return Err(Error::InvalidParameter(format!(
            "kappa_max = {kappa_max} must exceed 1e-4"
        )));
    }
    let sys = SecularSystem::new(h);
    let lo: f64 = 1e-4;
    let decades = (kappa_max / lo).log10();
    let npts = (decades * opts.per_decade as f64).ceil() as usize + 1;
    let xs: Vec<f64> = (0..npts)
        .map(|i| (lo * 10f64.powf(i as f64 / opts.per_decade as f64)).min(kappa_max))
        .collect();
    let mut f = |kappa: f64| sys.sigma_ratio(c64(0.0, kappa));
    let (roots, _) = scan_roots(&mut f, &xs, opts.tol, 1e-13);
    let last = xs.len() - 1;
    let truncated = last > 0 && f(xs[last]) < f(xs[last - 1]) && f(xs[last]) > opts.tol;
    let states = roots
        .into_iter()
        .map(|(kappa, _)| {
            let (mult, _) = sys.kernel(c64(0.0, kappa), opts.multiplicity_tol);
            BoundState {
                kappa,
                energy: -kappa * kappa,
                multiplicity: mult,
            }
        })
        .collect();
    Ok(BoundStates { states, truncated })
}

/// Lowest eigenvalue: the deepest bound state if there is one, otherwise
/// (compact graphs) the lowest `k²`. `None` for a graph with half-lines and
/// no bound state.
pub fn ground_state(h: &GraphHamiltonian, kappa_max: f64, opts: &RootOptions) -> Result<Option<f64>> {
    let b = bound_states(h, kappa_max, opts)?;
    if let Some(s) = b.deepest() {
        return Ok(Some(s.energy));
    }
    if !h.graph().is_compact() {
        return Ok(None);
    }
    Ok(lowest_energies(h, 1, kappa_max, opts)?.first().map(|e| e.0))
}

/// The `count` lowest eigenvalues of a compact graph as `(energy,
/// multiplicity)`, negative ones included. The list is cut after the
/// cluster that reaches `count`, so it can hold a few more.
pub fn lowest_energies(
    h: &GraphHamiltonian,
    count: usize,
    kappa_max: f64,
    opts: &RootOptions,
) -> Result<Vec<(f64, usize)>> {
    if !h.graph().is_compact() {
        return Err(Error::Precondition(
            "eigenvalue search needs a compact graph (no half-lines)".into(),
        ));
    }
    let b = bound_states(h, kappa_max, opts)?;
    let mut out: Vec<(f64, usize)> = b.states.iter().rev().map(|s| (s.energy, s.multiplicity)).collect();
    let total: usize = out.iter().map(|e| e.1).sum();
    if total >= count {
        return Ok(out);
    }
    let mut kmax = 4.0 * core::f64::consts::PI / total_length(h);
    for _ in 0..16 {
        let ev = eigenvalues(h, 0.0, kmax, count - total, opts)?;
        let have: usize = ev.iter().map(|e| e.multiplicity).sum();
        if have >= count - total {
            out.extend(ev.iter().map(|e| (e.energy(), e.multiplicity)));
            return Ok(out);
        }
        kmax *= 2.0;
    }
    Err(Error::NonConvergence {
        what: "lowest eigenvalue search".into(),
        iterations: 16,
    })
}

/// Scattering matrix over the half-lines (edge-id order) at real `k > 0`,
/// for incoming waves `e^{−ikx}` and outgoing `e^{ikx}`.
pub fn global_smatrix(h: &GraphHamiltonian, k: f64) -> Result<ScatteringMatrix> {
    if !(k > 0.0) {
        return Err(Error::InvalidParameter(format!("momentum k = {k} must be positive")));
    }
    if h.graph().is_compact() {
        return Err(Error::Precondition("scattering needs at least one half-line".into()));
    }
    let s = SecularSystem::new(h).smatrix(k)?;
    Ok(ScatteringMatrix { k: c64(k, 0.0), s })
}

/// A kernel function of the secular system, evaluable anywhere on the graph.
pub struct Eigenfunction<'a> {
    sys: SecularSystem<'a>,
    k: C64,
    coef: Vec<C64>,
    pub multiplicity: usize,
}

impl<'a> Eigenfunction<'a> {
    pub fn value(&self, edge: u32, x: f64) -> C64 {
        self.sys.evaluate(self.k, &self.coef, edge, x)
    }

    pub fn sample(&self, edge: u32, xs: &[f64]) -> Vec<C64> {
        xs.iter().map(|&x| self.value(edge, x)).collect()
    }
}

/// Eigenfunction for momentum `k` (real, or `iκ` for a bound state), taken
/// from the right singular vector of the smallest singular value.
pub fn eigenfunction<'a>(h: &'a GraphHamiltonian, k: C64, opts: &RootOptions) -> Result<Eigenfunction<'a>> {
    let sys = SecularSystem::new(h);
    let ratio = sys.sigma_ratio(k);
    if ratio > opts.tol * 1e2 {
        return Err(Error::Precondition(format!(
            "k = {k} is not an eigenvalue (σ_min/σ_max = {ratio:.2e})"
        )));
    }
    let (multiplicity, coef) = sys.kernel(k, opts.multiplicity_tol);
    Ok(Eigenfunction {
        sys,
        k,
        coef,
        multiplicity,
    })
}
