//! `approx`: reads a target star, builds an approximating family member and
//! serializes the recipe.

use qgraph_core::builders::{
    cs_delta_prime, general_vertex, profile_integral, scaled_potential_delta, ApproxRecipe, GeneralOptions, Profile, StarGeometry,
};
use qgraph_core::coupling::{st_from_unitary, CouplingSpec, NamedForm, Strength, RANK_TOL};
use qgraph_core::graph::{GraphHamiltonian, Length};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::graph_file::{graph_to_value, st_to_value};
use crate::json::{real, to_canonical};

/// A star read back from a graph file: the centre coupling (resolved for
/// its degree) and the shape of the arms.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetStar {
    pub n: usize,
    pub centre: CouplingSpec,
    pub geometry: StarGeometry,
}

/// Accepts a graph whose highest-degree vertex is the start of every edge, with either only half-lines or equal finite arms
/// ending in vertices that share one coupling.
pub fn target_star(h: &GraphHamiltonian) -> Result<TargetStar> {
    let g = h.graph();
    let not_star = |why: &str| Error::format("target", format!("not a star graph: {why}"));
    let (&centre, _) = g
        .vertices()
        .iter()
        .max_by_key(|(&v, _)| (g.degree(v), std::cmp::Reverse(v)))
        .ok_or_else(|| not_star("no vertices"))?;
    let edges: Vec<_> = g.edges().values().collect();
    if edges.iter().any(|e| e.from != centre) {
        return Err(not_star("every edge must start at the centre"));
    }
    if edges.iter().any(|e| !e.dressing.is_bare()) {
        return Err(not_star("edges must carry no potential or δ points"));
    }
    let n = edges.len();
    let geometry = if edges.iter().all(|e| e.is_half_line()) {
        StarGeometry::HalfLines
    } else {
        let length = match edges[0].length {
            Length::Finite(l) if edges.iter().all(|e| e.length == Length::Finite(l)) => l,
            _ => return Err(not_star("arms must be all half-lines or all of one length")),
        };
        let outer_ids: Vec<&String> = edges
            .iter()
            .map(|e| &g.vertices()[&e.to.expect("finite edge")].coupling)
            .collect();
        if outer_ids.iter().any(|c| *c != outer_ids[0]) || outer_ids.len() != g.vertices().len() - 1 {
            return Err(not_star("arm ends must be distinct vertices sharing one coupling"));
        }
        StarGeometry::Finite {
            length,
            outer: h.couplings()[outer_ids[0]].clone(),
        }
    };
    let spec = h.couplings()[&g.vertices()[&centre].coupling].clone();
    Ok(TargetStar {
        n,
        centre: spec,
        geometry,
    })
}

pub enum Family {
    /// Swept parameter `a`; the centre must be δ′ₛ(β).
    CheonShigehara { a: f64 },
    /// Swept parameter `d`; any centre coupling.
    General { d: f64, options: GeneralOptions },
    /// Swept parameter `ε`; the centre must be δ(α). Without profiles every
    /// edge gets the well `α/n` on `[0, 1]`.
    Potential { eps: f64, profiles: Option<Vec<Profile>> },
}

pub fn build(target: &TargetStar, family: &Family) -> Result<ApproxRecipe> {
    let finite = |s: &Strength, what: &str| match s {
        Strength::Finite(x) => Ok(*x),
        Strength::Infinite => Err(Error::format("target", format!("{what} strength must be finite"))),
    };
    match family {
        Family::CheonShigehara { a } => {
            let beta = match &target.centre {
                CouplingSpec::Named(NamedForm::DeltaPrime(s)) => finite(s, "δ′")?,
                _ => return Err(Error::format("target", "Cheon–Shigehara needs a delta_prime centre")),
            };
            Ok(cs_delta_prime(target.n, beta, *a, &target.geometry)?)
        }
        Family::General { d, options } => {
            let u = target.centre.unitary(target.n)?;
            let st = st_from_unitary(&u, RANK_TOL)?;
            Ok(general_vertex(&st, *d, &target.geometry, options)?)
        }
        Family::Potential { eps, profiles } => {
            let alpha = match &target.centre {
                CouplingSpec::Named(NamedForm::Delta(s)) => finite(s, "δ")?,
                CouplingSpec::Named(NamedForm::Free) => 0.0,
                _ => return Err(Error::format("target", "scaled potentials need a delta centre")),
            };
            let profiles = match profiles {
                Some(p) => p.clone(),
                None => vec![vec![(1.0, alpha / target.n as f64)]; target.n],
            };
            let got: f64 = profiles.iter().map(profile_integral).sum();
            if (got - alpha).abs() > 1e-9 * alpha.abs().max(1.0) {
                return Err(Error::format(
                    "profile",
                    format!("profiles integrate to {got}, the target has α = {alpha}"),
                ));
            }
            Ok(scaled_potential_delta(&profiles, *eps, &target.geometry)?)
        }
    }
}

/// Every recipe field, with the limit and generated graphs inline.
pub fn recipe_to_value(r: &ApproxRecipe) -> Value {
    let n_sets: Map<String, Value> = r
        .n_sets
        .iter()
        .map(|(j, set)| (j.to_string(), json!(set.iter().collect::<Vec<_>>())))
        .collect();
    let v: Map<String, Value> = r.v.iter().map(|(j, x)| (j.to_string(), real(*x))).collect();
    let pair_list = |m: &std::collections::BTreeMap<(usize, usize), f64>| -> Value {
        m.iter().map(|(&(j, k), &x)| json!([j, k, real(x)])).collect()
    };
    json!({
        "kind": r.kind.name(),
        "parameter": real(r.parameter),
        "target": st_to_value(&r.target),
        "n_sets": n_sets,
        "v": v,
        "w": pair_list(&r.w),
        "a": pair_list(&r.a_vals),
        "point_deltas": r.point_deltas.iter().map(|&(e, x, c)| json!([e, real(x), real(c)])).collect::<Vec<_>>(),
        "warnings": r.warnings,
        "limit": graph_to_value(&r.limit),
        "generated": graph_to_value(&r.generated),
    })
}

pub fn serialize_recipe(r: &ApproxRecipe) -> String {
    to_canonical(&recipe_to_value(r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use qgraph_core::graph::star;

    #[test]
    fn cs_from_a_delta_prime_star() {
        let h = star(3, None, CouplingSpec::delta_prime(1.0), None, &[]).unwrap();
        let t = target_star(&h).unwrap();
        assert_eq!(t.n, 3);
        let r = build(&t, &Family::CheonShigehara { a: 0.1 }).unwrap();
        assert_eq!(r.point_deltas.len(), 3);
        let v = recipe_to_value(&r);
        assert_eq!(v["kind"], "cheon_shigehara");
        assert!((v["v"]["0"].as_f64().unwrap() + 100.0).abs() < 1e-9);
    }

    #[test]
    fn default_profile_matches_alpha() {
        let h = star(2, Some(1.0), CouplingSpec::delta(-1.5), Some(CouplingSpec::Named(NamedForm::Neumann)), &[])
            .unwrap();
        let t = target_star(&h).unwrap();
        assert!(build(&t, &Family::Potential { eps: 0.01, profiles: None }).is_ok());
        let wrong = Some(vec![vec![(1.0, 1.0)]; 2]);
        assert!(build(&t, &Family::Potential { eps: 0.01, profiles: wrong }).is_err());
    }

    #[test]
    fn wrong_centre_is_rejected() {
        let h = star(2, None, CouplingSpec::delta(1.0), None, &[]).unwrap();
        let t = target_star(&h).unwrap();
        assert!(build(&t, &Family::CheonShigehara { a: 0.1 }).is_err());
    }
}
