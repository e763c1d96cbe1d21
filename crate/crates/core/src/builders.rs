//! Approximating families for singular vertex couplings.
//!
//! * [`scaled_potential_delta`]: Kirchhoff star with potentials
//!   `ε⁻¹W_j(x/ε)`, converging to δ(α) with `α = Σ∫W_j`.
//! * [`cs_delta_prime`]: the Cheon–Shigehara scheme for δ′ₛ(β): a central
//!   δ of strength `−β/a²` and δ's of strength `−1/a` at distance `a` on
//!   each edge.
//! * [`general_vertex`]: δ couplings at the ends of separated edges joined
//!   by short magnetic segments, for an arbitrary coupling in ST-form.
//! * [`fat_delta_prime_lift_params`]: the parameters used to lift the
//!   Cheon–Shigehara scheme to a fat graph.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::coupling::{
    make_named, st_from_unitary, unitary_from_st, CouplingSpec, NamedForm, StForm, Strength,
    RANK_TOL,
};
use crate::graph::{star, Edge, EdgeDressing, GraphHamiltonian, Length, MetricGraph, Vertex};
use crate::linalg::C64;
use crate::{Error, Result};

/// Shape of the edges carrying the coupling.
#[derive(Debug, Clone, PartialEq)]
pub enum StarGeometry {
    HalfLines,
    /// Edges of this length ending in vertices with the given coupling.
    Finite { length: f64, outer: CouplingSpec },
}

impl StarGeometry {
    fn arm(&self) -> Option<f64> {
        match self {
            StarGeometry::HalfLines => None,
            StarGeometry::Finite { length, .. } => Some(*length),
        }
    }

    fn outer(&self) -> Option<CouplingSpec> {
        match self {
            StarGeometry::HalfLines => None,
            StarGeometry::Finite { outer, .. } => Some(outer.clone()),
        }
    }

    fn check(&self) -> Result<()> {
        match self {
            StarGeometry::HalfLines => Ok(()),
            StarGeometry::Finite { length, .. } if *length > 0.0 && length.is_finite() => Ok(()),
            StarGeometry::Finite { length, .. } => Err(Error::NonPositiveLength {
                at: "geometry.length".into(),
                value: *length,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecipeKind {
    ScaledPotential,
    CheonShigehara,
    GeneralVertex,
}

impl RecipeKind {
    pub fn name(self) -> &'static str {
        match self {
            RecipeKind::ScaledPotential => "scaled_potential",
            RecipeKind::CheonShigehara => "cheon_shigehara",
            RecipeKind::GeneralVertex => "general_vertex",
        }
    }
}

/// Every parameter of a generated approximation, plus the graphs.
///
/// Edge indices in the maps refer to the original numbering of the target
/// coupling's edges (not the ST-form renumbering). The generated graph keeps
/// the original edges as edge ids `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxRecipe {
    pub kind: RecipeKind,
    /// `ε`, `a` or `d`.
    pub parameter: f64,
    pub target: StForm,
    /// The limit operator on the same geometry.
    pub limit: GraphHamiltonian,
    pub generated: GraphHamiltonian,
    /// Connection sets `N_j`.
    pub n_sets: BTreeMap<usize, BTreeSet<usize>>,
    /// δ strength at the end of edge `j` (general construction) or at the
    /// centre, keyed `0` (Cheon–Shigehara).
    pub v: BTreeMap<usize, f64>,
    /// δ strength at the midpoint of the segment joining `j < k`.
    pub w: BTreeMap<(usize, usize), f64>,
    /// Vector potential on the half of segment `{j, k}` next to `j`.
    pub a_vals: BTreeMap<(usize, usize), f64>,
    /// Interior δ points `(edge, position, strength)`.
    pub point_deltas: Vec<(u32, f64, f64)>,
    pub warnings: Vec<String>,
}

/// `⟨c⟩ = |c|` if `Re c ≥ 0`, `−|c|` otherwise.
pub fn bracket(c: C64) -> f64 {
    if c.re >= 0.0 {
        c.norm()
    } else {
        -c.norm()
    }
}

/// Piecewise-constant profile `W` given as `(breakpoint, value)` pairs with
/// the same convention as edge potentials.
pub type Profile = Vec<(f64, f64)>;

pub fn profile_integral(w: &Profile) -> f64 {
    let mut prev = 0.0;
    let mut s = 0.0;
    for &(x, v) in w {
        s += (x - prev) * v;
        prev = x;
    }
    s
}

fn st_of(spec: &CouplingSpec, n: usize) -> Result<StForm> {
    st_from_unitary(&spec.unitary(n)?, RANK_TOL)
}

/// Kirchhoff star carrying `ε⁻¹W_j(x/ε)` on edge `j`; the target is
/// δ(α) with `α = Σ_j ∫W_j`.
pub fn scaled_potential_delta(profiles: &[Profile], eps: f64, geometry: &StarGeometry) -> Result<ApproxRecipe> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("ε = {eps} must be positive")));
    }
    geometry.check()?;
    let n = profiles.len();
    if n == 0 {
        return Err(Error::InvalidParameter("at least one edge profile is needed".into()));
    }
    let dressings: Vec<EdgeDressing> = profiles
        .iter()
        .map(|p| {
            EdgeDressing {
                vector_potential: 0.0,
                potential: p.iter().map(|&(x, v)| (x * eps, v / eps)).collect(),
                delta_points: Vec::new(),
            }
            .canonical()
        })
        .collect();
    let alpha: f64 = profiles.iter().map(profile_integral).sum();
    let generated = star(n, geometry.arm(), CouplingSpec::delta(0.0), geometry.outer(), &dressings)?;
    let target_spec = CouplingSpec::delta(alpha);
    let limit = star(n, geometry.arm(), target_spec.clone(), geometry.outer(), &[])?;
    Ok(ApproxRecipe {
        kind: RecipeKind::ScaledPotential,
        parameter: eps,
        target: st_of(&target_spec, n)?,
        limit,
        generated,
        n_sets: BTreeMap::new(),
        v: BTreeMap::new(),
        w: BTreeMap::new(),
        a_vals: BTreeMap::new(),
        point_deltas: Vec::new(),
        warnings: Vec::new(),
    })
}

/// Central strength `b(a) = −β/a²` and edge strength `c(a) = −1/a`.
pub fn cs_strengths(beta: f64, a: f64) -> (f64, f64) {
    (-beta / (a * a), -1.0 / a)
}

/// Cheon–Shigehara approximation of δ′ₛ(β) on `n` edges.
pub fn cs_delta_prime(n: usize, beta: f64, a: f64, geometry: &StarGeometry) -> Result<ApproxRecipe> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::InvalidParameter(format!("spacing a = {a} must be positive")));
    }
    geometry.check()?;
    if let Some(l) = geometry.arm() {
        if a >= l {
            return Err(Error::InvalidParameter(format!(
                "spacing a = {a} must be below the edge length {l}"
            )));
        }
    }
    let (b, c) = cs_strengths(beta, a);
    let dressing = EdgeDressing::default().with_delta(a, c);
    let dressings = alloc::vec![dressing; n];
    let generated = star(n, geometry.arm(), CouplingSpec::delta(b), geometry.outer(), &dressings)?;
    let target_spec = CouplingSpec::delta_prime(beta);
    let limit = star(n, geometry.arm(), target_spec.clone(), geometry.outer(), &[])?;
    let mut v = BTreeMap::new();
    v.insert(0, b);
    Ok(ApproxRecipe {
        kind: RecipeKind::CheonShigehara,
        parameter: a,
        target: st_of(&target_spec, n)?,
        limit,
        generated,
        n_sets: BTreeMap::new(),
        v,
        w: BTreeMap::new(),
        a_vals: BTreeMap::new(),
        point_deltas: (0..n as u32).map(|e| (e, a, c)).collect(),
        warnings: Vec::new(),
    })
}

/// How the offset `μπ` enters the phase of a segment joining two edges
/// with index `≤ m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseOffset {
    /// `A = (arg z − μπ)/2d`, the same structure as for the other pairs.
    #[default]
    AfterArg,
    /// `A = arg(z − μπ)/2d`, the formula read literally.
    InsideArg,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralOptions {
    pub offset: PhaseOffset,
    /// Entries of `S` and `T` below this (relative to the largest entry)
    /// count as zero when deciding connections.
    pub zero_tol: f64,
}

impl Default for GeneralOptions {
    fn default() -> Self {
        GeneralOptions {
            offset: PhaseOffset::AfterArg,
            zero_tol: 1e-10,
        }
    }
}

/// Generic-vertex approximation of the coupling `st` by δ couplings and
/// magnetic connecting segments of length `2d`.
pub fn general_vertex(st: &StForm, d: f64, geometry: &StarGeometry, opts: &GeneralOptions) -> Result<ApproxRecipe> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::InvalidParameter(format!("d = {d} must be positive")));
    }
    geometry.check()?;
    st.validate(1e-8)?;
    let n = st.n();
    let m = st.m;
    let scale = st
        .s
        .iter()
        .chain(st.t.iter())
        .fold(0.0f64, |acc, z| acc.max(z.norm()))
        .max(1.0);
    let nz = |z: C64| z.norm() > opts.zero_tol * scale;
    // Entries in ST numbering: T is indexed (j, l) with l ≥ m.
    let t = |j: usize, l: usize| st.t[(j, l - m)];
    let tt = |j: usize, k: usize| -> C64 { (m..n).map(|l| t(j, l) * t(k, l).conj()).sum() };

    let mut nsets: Vec<BTreeSet<usize>> = alloc::vec![BTreeSet::new(); n];
    for j in 0..m {
        for k in 0..m {
            if k != j && (nz(st.s[(j, k)]) || (m..n).any(|l| nz(t(j, l)) && nz(t(k, l)))) {
                nsets[j].insert(k);
            }
        }
        for l in m..n {
            if nz(t(j, l)) {
                nsets[j].insert(l);
                nsets[l].insert(j);
            }
        }
    }

    // Per connected pair (j < k in ST numbering): w and A_(j,k).
    let mut pairs: Vec<(usize, usize, f64, f64)> = Vec::new();
    let mut warnings = Vec::new();
    for j in 0..n {
        for &k in nsets[j].iter().filter(|&&k| k > j) {
            if k >= m {
                // Case I (j ≤ m < k).
                let tjl = t(j, k);
                let br = bracket(tjl);
                let mut a = tjl.arg() / (2.0 * d);
                if tjl.re < 0.0 {
                    a -= core::f64::consts::PI / (2.0 * d);
                }
                let w = (-2.0 + 1.0 / br) / d;
                pairs.push((j, k, w, a));
            } else {
                // Case II (both ≤ m).
                let z = st.s[(j, k)] * d + tt(j, k);
                let br = bracket(z);
                if br == 0.0 || !nz(z) {
                    return Err(Error::Degenerate(format!(
                        "bracket argument vanishes for the pair ({}, {}) at d = {d}; retry with a smaller d",
                        st.perm[j], st.perm[k]
                    )));
                }
                let mu = if z.re >= 0.0 { 0.0 } else { core::f64::consts::PI };
                let a = match opts.offset {
                    PhaseOffset::AfterArg => (z.arg() - mu) / (2.0 * d),
                    PhaseOffset::InsideArg => (z - mu).arg() / (2.0 * d),
                };
                let w = -(2.0 + 1.0 / br) / d;
                pairs.push((j, k, w, a));
            }
        }
    }
    if opts.offset == PhaseOffset::InsideArg {
        warnings.push("phase offset applied inside arg (alternate reading)".to_string());
    }

    let mut v = alloc::vec![0.0; n];
    for l in m..n {
        let sum: f64 = (0..m).map(|h| bracket(t(h, l))).sum();
        v[l] = (1.0 - nsets[l].len() as f64 + sum) / d;
    }
    for j in 0..m {
        let mut val = st.s[(j, j)].re - nsets[j].len() as f64 / d;
        for k in (0..m).filter(|&k| k != j) {
            val -= bracket(st.s[(j, k)] + tt(j, k) / d);
        }
        for l in m..n {
            let b = bracket(t(j, l));
            val += (1.0 + b) * b / d;
        }
        v[j] = val;
    }

    // Assemble: vertex p (original numbering) sits at the end of edge p.
    let orig = |i: usize| st.perm[i];
    let mut vertices = BTreeMap::new();
    let mut edges = BTreeMap::new();
    let mut couplings = BTreeMap::new();
    for i in 0..n {
        let p = orig(i) as u32;
        let cid = format!("v{p}");
        vertices.insert(p, Vertex { coupling: cid.clone() });
        couplings.insert(cid, CouplingSpec::delta(v[i]));
    }
    for p in 0..n as u32 {
        let (to, length) = match geometry.arm() {
            Some(l) => {
                let outer = n as u32 + p;
                vertices.insert(outer, Vertex { coupling: "outer".into() });
                (Some(outer), Length::Finite(l))
            }
            None => (None, Length::Infinite),
        };
        edges.insert(
            p,
            Edge {
                from: p,
                to,
                length,
                dressing: EdgeDressing::default(),
            },
        );
    }
    if let Some(outer) = geometry.outer() {
        couplings.insert("outer".into(), outer);
    }
    let mut recipe_w = BTreeMap::new();
    let mut recipe_a = BTreeMap::new();
    let mut ordered: Vec<(usize, usize, f64, f64)> = pairs
        .iter()
        .map(|&(j, k, w, a)| {
            let (pj, pk) = (orig(j), orig(k));
            if pj < pk {
                (pj, pk, w, a)
            } else {
                (pk, pj, w, -a)
            }
        })
        .collect();
    ordered.sort_by_key(|x| (x.0, x.1));
    let mut next_edge = n as u32;
    for &(pj, pk, w, a) in &ordered {
        recipe_w.insert((pj, pk), w);
        recipe_a.insert((pj, pk), a);
        recipe_a.insert((pk, pj), -a);
        // Runs from the end of edge pj to the end of edge pk; the field
        // next to pj is A_(pj,pk) measured towards pj, hence the sign.
        edges.insert(
            next_edge,
            Edge {
                from: pj as u32,
                to: Some(pk as u32),
                length: Length::Finite(2.0 * d),
                dressing: EdgeDressing {
                    vector_potential: -a,
                    potential: Vec::new(),
                    delta_points: alloc::vec![(d, w)],
                },
            },
        );
        next_edge += 1;
    }
    let generated = GraphHamiltonian::new(MetricGraph::from_parts(vertices, edges)?, couplings)?;
    let target_u = unitary_from_st(st)?;
    let limit = star(n, geometry.arm(), CouplingSpec::Unitary(target_u), geometry.outer(), &[])?;
    let n_sets = (0..n)
        .map(|i| (orig(i), nsets[i].iter().map(|&k| orig(k)).collect()))
        .collect();
    let vmap = (0..n).map(|i| (orig(i), v[i])).collect();
    Ok(ApproxRecipe {
        kind: RecipeKind::GeneralVertex,
        parameter: d,
        target: st.clone(),
        limit,
        generated,
        n_sets,
        v: vmap,
        w: recipe_w,
        a_vals: recipe_a,
        point_deltas: Vec::new(),
        warnings,
    })
}

/// Parameters of the fat-graph lift of the Cheon–Shigehara scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftParams {
    /// Distance of the edge squares from the vertex, `ε^α`.
    pub a: f64,
    /// Vertex-square potential integral `−β ε^{−2α}`.
    pub q0: f64,
    /// Edge-square potential integral `−ε^{−α}`.
    pub qe: f64,
    pub warning: Option<String>,
}

pub fn fat_delta_prime_lift_params(beta: f64, eps: f64, alpha_exp: f64) -> Result<LiftParams> {
    if !(alpha_exp > 0.0 && alpha_exp < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "exponent {alpha_exp} must lie in (0, 1)"
        )));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("ε = {eps} must be positive")));
    }
    let a = eps.powf(alpha_exp);
    let (q0, qe) = cs_strengths(beta, a);
    let warning = (alpha_exp >= 1.0 / 13.0).then(|| {
        format!("exponent {alpha_exp} is not below 1/13; convergence is not guaranteed")
    });
    Ok(LiftParams { a, q0, qe, warning })
}

/// `U` of δ(α) or δ′ₛ(β) as an ST-form, convenient for tests and sweeps.
pub fn named_st(form: &NamedForm, n: usize) -> Result<StForm> {
    st_from_unitary(&make_named(form, n)?, RANK_TOL)
}

/// δ(α) target helper.
pub fn delta_st(alpha: f64, n: usize) -> Result<StForm> {
    named_st(&NamedForm::Delta(Strength::Finite(alpha)), n)
}

/// Builds an ST-form directly from `S`, `T` given in the identity numbering.
pub fn st_form(s: Vec<Vec<C64>>, t: Vec<Vec<C64>>) -> Result<StForm> {
    let m = s.len();
    let cols = t.first().map_or(0, |r| r.len());
    let n = m + cols;
    let smat = crate::linalg::CMat::from_fn(m, m, |i, j| s[i][j]);
    let tmat = crate::linalg::CMat::from_fn(m, cols, |i, j| t[i][j]);
    let st = StForm {
        m,
        s: smat,
        t: tmat,
        perm: (0..n).collect(),
    };
    st.validate(1e-12)?;
    Ok(st)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;

    #[test]
    fn bracket_branches() {
        assert_eq!(bracket(c64(3.0, 4.0)), 5.0);
        assert_eq!(bracket(c64(-1.0, 0.0)), -1.0);
        assert_eq!(bracket(c64(0.0, 2.0)), 2.0);
    }

    #[test]
    fn cs_parameters() {
        let r = cs_delta_prime(2, 1.0, 0.1, &StarGeometry::HalfLines).unwrap();
        assert!((r.v[&0] + 100.0).abs() < 1e-9);
        assert!((r.point_deltas[0].2 + 10.0).abs() < 1e-12);
        let (b, c) = cs_strengths(0.0, 0.25);
        assert_eq!(b, 0.0);
        assert_eq!(c, -4.0);
        assert!(cs_delta_prime(2, 1.0, 2.0, &StarGeometry::Finite {
            length: 1.0,
            outer: CouplingSpec::Named(NamedForm::Neumann)
        })
        .is_err());
    }

    #[test]
    fn lift_parameters() {
        let p = fat_delta_prime_lift_params(1.0, 0.1, 1.0 / 13.0).unwrap();
        assert!((p.a - 0.1f64.powf(1.0 / 13.0)).abs() < 1e-15);
        assert!((p.q0 + 0.1f64.powf(-2.0 / 13.0)).abs() < 1e-12);
        assert!((p.qe + 0.1f64.powf(-1.0 / 13.0)).abs() < 1e-12);
        assert!(p.warning.is_some());
        assert_eq!(fat_delta_prime_lift_params(0.0, 0.1, 0.05).unwrap().q0, 0.0);
        let p = fat_delta_prime_lift_params(2.0, 1.0, 0.05).unwrap();
        assert_eq!((p.a, p.q0, p.qe), (1.0, -2.0, -1.0));
        assert!(fat_delta_prime_lift_params(1.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn kirchhoff_case_one_values() {
        let n = 4;
        let st = delta_st(0.0, n).unwrap();
        let d = 0.01;
        let r = general_vertex(&st, d, &StarGeometry::HalfLines, &GeneralOptions::default()).unwrap();
        let hub = st.perm[0];
        for (&(j, k), &w) in &r.w {
            assert!(j == hub || k == hub);
            assert!((w + 1.0 / d).abs() < 1e-9);
        }
        for (&(_, _), &a) in &r.a_vals {
            assert_eq!(a, 0.0);
        }
        for p in 0..n {
            let expect = if p == hub { (n - 1) as f64 / d } else { 1.0 / d };
            assert!((r.v[&p] - expect).abs() < 1e-7, "{p}: {}", r.v[&p]);
        }
    }

    #[test]
    fn negative_entry_case_one() {
        let st = st_form(alloc::vec![alloc::vec![c64(0.0, 0.0)]], alloc::vec![alloc::vec![c64(-1.0, 0.0)]]).unwrap();
        let d = 0.1;
        let r = general_vertex(&st, d, &StarGeometry::HalfLines, &GeneralOptions::default()).unwrap();
        assert!(r.a_vals[&(0, 1)].abs() < 1e-12);
        assert!((r.w[&(0, 1)] + 3.0 / d).abs() < 1e-9);
    }

    #[test]
    fn complex_t_parameters() {
        let i = c64(0.0, 1.0);
        let st = st_form(
            alloc::vec![alloc::vec![c64(0.0, 0.0), c64(0.0, 0.0)], alloc::vec![c64(0.0, 0.0), c64(0.0, 0.0)]],
            alloc::vec![alloc::vec![i], alloc::vec![c64(1.0, 0.0)]],
        )
        .unwrap();
        let d = 0.01;
        let r = general_vertex(&st, d, &StarGeometry::HalfLines, &GeneralOptions::default()).unwrap();
        let pi = core::f64::consts::PI;
        assert!((r.a_vals[&(0, 1)] - pi / (4.0 * d)).abs() < 1e-9);
        assert!((r.a_vals[&(0, 2)] - pi / (4.0 * d)).abs() < 1e-9);
        assert!(r.a_vals[&(1, 2)].abs() < 1e-12);
        assert!((r.a_vals[&(2, 1)] + r.a_vals[&(1, 2)]).abs() == 0.0);
        assert!((r.w[&(0, 1)] + 3.0 / d).abs() < 1e-9);
        assert!((r.w[&(0, 2)] + 1.0 / d).abs() < 1e-9);
        assert!((r.w[&(1, 2)] + 1.0 / d).abs() < 1e-9);
        assert!((r.v[&0] + 1.0 / d).abs() < 1e-9);
        assert!((r.v[&1] + 1.0 / d).abs() < 1e-9);
        assert!((r.v[&2] - 1.0 / d).abs() < 1e-9);
    }
}
