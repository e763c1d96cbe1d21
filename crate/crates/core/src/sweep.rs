//! Parameter sweeps: observables, error metrics and log-log rate fits.
//!
//! The core evaluates single points; running them (in parallel, with wall
//! times) is left to the caller, which then assembles a [`SweepReport`].

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::builders::{
    cs_delta_prime, general_vertex, scaled_potential_delta, ApproxRecipe, GeneralOptions, Profile,
    StarGeometry,
};
use crate::coupling::StForm;
use crate::graph::GraphHamiltonian;
use crate::linalg::{op_norm, CMat, C64};
use crate::schrodinger::{
    discretize_pair, global_smatrix, ground_state, lowest_energies, resolvent_distance, RootOptions,
};
use crate::{Error, Result};

/// Eigenvalues closer than this are treated as one degenerate cluster.
pub const CLUSTER_TOL: f64 = 1e-6;

/// An approximating family with every argument but the swept parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum Builder {
    /// Swept parameter: `ε`.
    ScaledPotential {
        profiles: Vec<Profile>,
        geometry: StarGeometry,
    },
    /// Swept parameter: `a`.
    CheonShigehara {
        n: usize,
        beta: f64,
        geometry: StarGeometry,
    },
    /// Swept parameter: `d`.
    GeneralVertex {
        st: StForm,
        geometry: StarGeometry,
        options: GeneralOptions,
    },
}

impl Builder {
    pub fn build(&self, param: f64) -> Result<ApproxRecipe> {
        match self {
            Builder::ScaledPotential { profiles, geometry } => {
                scaled_potential_delta(profiles, param, geometry)
            }
            Builder::CheonShigehara { n, beta, geometry } => cs_delta_prime(*n, *beta, param, geometry),
            Builder::GeneralVertex {
                st,
                geometry,
                options,
            } => general_vertex(st, param, geometry, options),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observable {
    /// Global S-matrix at momentum `k`; spectral-norm distance.
    SMatrixAt { k: f64 },
    /// The `count` lowest eigenvalues of a compact graph; max abs distance.
    Eigenvalues { count: usize },
    /// Discrete resolvent distance at `z` with grid step `h = h_factor·param`.
    ResolventDistance { z: C64, h_factor: f64 },
    /// Lowest eigenvalue; absolute distance.
    GroundState,
}

/// What the approximants are compared against.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    /// The limit Hamiltonian reported by the builder itself.
    RecipeLimit,
    Hamiltonian(GraphHamiltonian),
    /// Analytic S-matrix at the observable's momentum.
    SMatrix(CMat),
    /// Analytic eigenvalues (energies), ascending, multiplicities expanded.
    Energies(Vec<f64>),
}

/// Acceptance window, checked after the fit.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Window {
    pub slope_min: Option<f64>,
    pub slope_max: Option<f64>,
    pub r2_min: Option<f64>,
    /// Errors must strictly decrease along the (decreasing) parameters.
    pub decreasing: bool,
    /// Bound on the error at the last (smallest) parameter.
    pub final_below: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub builder: Builder,
    /// Strictly decreasing and positive, at least three values.
    pub params: Vec<f64>,
    pub observable: Observable,
    pub target: Target,
    pub window: Option<Window>,
    /// Seed for the start vectors of iterative estimates.
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.params.len() < 3 {
            return Err(Error::InvalidParameter(format!(
                "a sweep needs at least 3 parameter values, got {}",
                self.params.len()
            )));
        }
        if self.params.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::InvalidParameter("sweep parameters must be positive".into()));
        }
        if self.params.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidParameter(
                "sweep parameters must be strictly decreasing".into(),
            ));
        }
        match (&self.observable, &self.target) {
            (Observable::SMatrixAt { k }, _) if !(*k > 0.0) => {
                Err(Error::InvalidParameter(format!("momentum k = {k} must be positive")))
            }
            (Observable::Eigenvalues { count: 0 }, _) => {
                Err(Error::InvalidParameter("eigenvalue count must be positive".into()))
            }
            (Observable::ResolventDistance { h_factor, .. }, _) if !(*h_factor > 0.0) => {
                Err(Error::InvalidParameter("h_factor must be positive".into()))
            }
            (Observable::ResolventDistance { .. }, Target::SMatrix(_) | Target::Energies(_)) => Err(
                Error::Precondition("resolvent distance needs a Hamiltonian target".into()),
            ),
            (Observable::SMatrixAt { .. }, Target::Energies(_))
            | (Observable::Eigenvalues { .. } | Observable::GroundState, Target::SMatrix(_)) => Err(
                Error::Precondition("target kind does not match the observable".into()),
            ),
            _ => Ok(()),
        }
    }

    /// Error of the observable at one parameter value.
    pub fn evaluate(&self, param: f64) -> Result<f64> {
        let recipe = self.builder.build(param)?;
        let target_h = match &self.target {
            Target::RecipeLimit => Some(&recipe.limit),
            Target::Hamiltonian(h) => Some(h),
            _ => None,
        };
        let opts = RootOptions::default();
        // Approximants of δ′-type couplings bind at κ ~ 1/param², so the
        // bound-state scan must reach past that.
        let kappa_max = (10.0 / (param * param)).max(1e3);
        match self.observable {
            Observable::SMatrixAt { k } => {
                let s = global_smatrix(&recipe.generated, k)?.s;
                let t = match (&self.target, target_h) {
                    (Target::SMatrix(m), _) => m.clone(),
                    (_, Some(h)) => global_smatrix(h, k)?.s,
                    _ => unreachable!("validated"),
                };
                if s.shape() != t.shape() {
                    return Err(Error::DimensionMismatch {
                        at: "target S-matrix".into(),
                        expected: s.nrows(),
                        found: t.nrows(),
                    });
                }
                Ok(op_norm(&(s - t)))
            }
            Observable::Eigenvalues { count } => {
                let got = flatten(&lowest_energies(&recipe.generated, count, kappa_max, &opts)?);
                let want = match (&self.target, target_h) {
                    (Target::Energies(e), _) => e.clone(),
                    (_, Some(h)) => flatten(&lowest_energies(h, count, 1e3, &opts)?),
                    _ => unreachable!("validated"),
                };
                eigenvalue_distance(&got, &want, count)
            }
            Observable::GroundState => {
                let got = ground_state(&recipe.generated, kappa_max, &opts)?
                    .ok_or_else(|| Error::Degenerate("approximant has no ground state".into()))?;
                let want = match (&self.target, target_h) {
                    (Target::Energies(e), _) => *e
                        .first()
                        .ok_or_else(|| Error::InvalidParameter("empty energy target".into()))?,
                    (_, Some(h)) => ground_state(h, 1e3, &opts)?
                        .ok_or_else(|| Error::Degenerate("target has no ground state".into()))?,
                    _ => unreachable!("validated"),
                };
                Ok((got - want).abs())
            }
            Observable::ResolventDistance { z, h_factor } => {
                let h = target_h.expect("validated");
                let (d1, d2) = discretize_pair(&recipe.generated, h, h_factor * param)?;
                Ok(resolvent_distance(&d1, &d2, z, self.seed)?.value)
            }
        }
    }
}

/// Expands multiplicities and sorts.
pub fn flatten(values: &[(f64, usize)]) -> Vec<f64> {
    let mut out: Vec<f64> = values
        .iter()
        .flat_map(|&(e, m)| core::iter::repeat_n(e, m))
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Max absolute difference between the first `count` entries of two sorted,
/// multiplicity-expanded eigenvalue lists.
///
/// Sorting makes members of a degenerate cluster pair up in order, which is
/// the multiset comparison within the cluster tolerance.
pub fn eigenvalue_distance(got: &[f64], want: &[f64], count: usize) -> Result<f64> {
    if got.len() < count || want.len() < count {
        return Err(Error::Degenerate(format!(
            "need {count} eigenvalues, have {} and {}",
            got.len(),
            want.len()
        )));
    }
    Ok(got
        .iter()
        .zip(want)
        .take(count)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares of `log error` against `log parameter`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<Fit> {
    if points.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "rate fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some(&(p, e)) = points.iter().find(|&&(p, e)| !(p > 0.0 && e > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "rate fit needs positive parameters and errors, got ({p:e}, {e:e})"
        )));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all parameters are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(Fit { slope, intercept, r2 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub param: f64,
    /// The error, or the message of the failure at this point.
    pub error: core::result::Result<f64, String>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    pub fit: Option<Fit>,
    /// Why there is no fit, when there is none.
    pub fit_note: Option<String>,
    /// Window violations; empty when the window holds or none was set.
    pub violations: Vec<String>,
}

impl SweepReport {
    /// Fits the rate and checks the window. `points` must follow the order
    /// of the spec's parameters.
    pub fn new(points: Vec<SweepPoint>, window: Option<&Window>) -> Self {
        let ok: Vec<(f64, f64)> = points
            .iter()
            .filter_map(|p| p.error.as_ref().ok().map(|&e| (p.param, e)))
            .collect();
        let (fit, fit_note) = if ok.len() < points.len() {
            (None, Some("slope undefined: some points failed".to_string()))
        } else if ok.iter().any(|&(_, e)| e <= 0.0) {
            (None, Some("slope undefined: zero error".to_string()))
        } else {
            match fit_rate(&ok) {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(format!("slope undefined: {e}"))),
            }
        };
        let mut violations = Vec::new();
        if let Some(w) = window {
            if ok.len() < points.len() {
                violations.push("failed points".to_string());
            }
            match &fit {
                Some(f) => {
                    if w.slope_min.is_some_and(|m| f.slope < m) || w.slope_max.is_some_and(|m| f.slope > m) {
                        violations.push(format!(
                            "slope {:.4} outside [{}, {}]",
                            f.slope,
                            w.slope_min.map_or("-inf".into(), |v| format!("{v}")),
                            w.slope_max.map_or("inf".into(), |v| format!("{v}"))
                        ));
                    }
                    if let Some(m) = w.r2_min {
                        if f.r2 < m {
                            violations.push(format!("R² {:.4} below {m}", f.r2));
                        }
                    }
                }
                None if w.slope_min.is_some() || w.slope_max.is_some() || w.r2_min.is_some() => {
                    violations.push("no fit for the rate window".to_string());
                }
                None => {}
            }
            if w.decreasing && !strictly_decreasing(&ok) {
                violations.push("errors do not strictly decrease".to_string());
            }
            if let Some(b) = w.final_below {
                match points.last().map(|p| &p.error) {
                    Some(Ok(e)) if *e < b => {}
                    Some(Ok(e)) => violations.push(format!("final error {e:e} not below {b:e}")),
                    _ => violations.push("final point failed".to_string()),
                }
            }
        }
        SweepReport {
            points,
            fit,
            fit_note,
            violations,
        }
    }

    pub fn accepted(&self) -> bool {
        self.violations.is_empty()
    }
}

fn strictly_decreasing(points: &[(f64, f64)]) -> bool {
    points.windows(2).all(|w| w[1].1 < w[0].1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn power_laws_are_recovered_exactly() {
        for p in [1.0, 2.0] {
            let pts: Vec<(f64, f64)> = [0.1, 0.01, 0.001].iter().map(|&a| (a, 3.0 * a.powf(p))).collect();
            let f = fit_rate(&pts).unwrap();
            assert!((f.slope - p).abs() < 1e-12);
            assert!((f.r2 - 1.0).abs() < 1e-12);
            assert!((f.intercept - 3f64.ln()).abs() < 1e-10);
        }
    }

    #[test]
    fn noisy_slope_one() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<(f64, f64)> = (0..9)
            .map(|i| {
                let a = 10f64.powf(-1.0 - i as f64 * 0.25);
                (a, 2.0 * a * (1.0 + rng.random_range(-0.1..0.1)))
            })
            .collect();
        let f = fit_rate(&pts).unwrap();
        assert!((0.9..=1.1).contains(&f.slope), "{f:?}");
        assert!(f.r2 > 0.95);
    }

    #[test]
    fn bad_points_are_rejected() {
        assert!(fit_rate(&[(0.1, 1.0), (0.01, 0.0), (0.001, 1.0)]).is_err());
        assert!(fit_rate(&[(0.1, 1.0), (0.01, 0.1)]).is_err());
    }

    #[test]
    fn clusters_compare_as_multisets() {
        let got = flatten(&[(2.0, 3), (1.0, 1)]);
        assert_eq!(got, [1.0, 2.0, 2.0, 2.0]);
        let want = [1.0, 2.0 + 1e-7, 2.0 - 1e-7, 2.0];
        assert!(eigenvalue_distance(&got, &want, 4).unwrap() <= 1e-6);
        assert!(eigenvalue_distance(&got, &want[..2], 3).is_err());
    }

    #[test]
    fn identical_target_gives_undefined_slope() {
        let geometry = StarGeometry::HalfLines;
        let builder = Builder::ScaledPotential {
            profiles: alloc::vec![Vec::new(), Vec::new()],
            geometry: geometry.clone(),
        };
        let spec = SweepSpec {
            builder,
            params: alloc::vec![0.1, 0.01, 0.001],
            observable: Observable::SMatrixAt { k: 1.0 },
            target: Target::RecipeLimit,
            window: None,
            seed: 1,
        };
        spec.validate().unwrap();
        let points = spec
            .params
            .iter()
            .map(|&p| SweepPoint {
                param: p,
                error: spec.evaluate(p).map_err(|e| e.to_string()),
                seconds: 0.0,
            })
            .collect::<Vec<_>>();
        assert!(points.iter().all(|p| *p.error.as_ref().unwrap() < 1e-12));
        let r = SweepReport::new(points, None);
        assert!(r.fit.is_none());
        assert!(r.fit_note.unwrap().contains("undefined"));
    }

    #[test]
    fn spec_validation() {
        let spec = SweepSpec {
            builder: Builder::CheonShigehara {
                n: 2,
                beta: 1.0,
                geometry: StarGeometry::HalfLines,
            },
            params: alloc::vec![0.1, 0.1, 0.01],
            observable: Observable::SMatrixAt { k: 1.0 },
            target: Target::RecipeLimit,
            window: None,
            seed: 1,
        };
        assert!(spec.validate().is_err());
        let spec = SweepSpec {
            params: alloc::vec![0.1, 0.05, 0.01],
            observable: Observable::ResolventDistance {
                z: crate::linalg::c64(-1.0, 0.0),
                h_factor: 0.05,
            },
            target: Target::Energies(alloc::vec![1.0]),
            ..spec
        };
        assert!(matches!(spec.validate(), Err(Error::Precondition(_))));
    }

    #[test]
    fn window_violations_are_listed() {
        let pts = [(0.1, 0.1), (0.01, 0.02), (0.001, 0.03)]
            .iter()
            .map(|&(p, e)| SweepPoint {
                param: p,
                error: Ok(e),
                seconds: 0.0,
            })
            .collect();
        let w = Window {
            slope_min: Some(0.8),
            slope_max: Some(1.2),
            decreasing: true,
            ..Window::default()
        };
        let r = SweepReport::new(pts, Some(&w));
        assert!(!r.accepted());
        assert_eq!(r.violations.len(), 2);
    }
}
