//! The `qgraph-v1` graph description format.
//!
//! ```json
//! {
//!   "version": "qgraph-v1",
//!   "vertices": [{"id": 0, "coupling": "c"}],
//!   "edges": [{"id": 0, "from": 0, "to": null, "length": "inf",
//!              "potential": [[x, v]], "vector_potential": 0.0,
//!              "delta_points": [[x, c]]}],
//!   "couplings": {"c": {"form": "delta", "alpha": 0.0}}
//! }
//! ```
//!
//! Potential breakpoints follow the core convention: `[x_i, v_i]` sets the
//! value `v_i` on `[x_{i−1}, x_i)`, and the potential vanishes past the last
//! breakpoint.

use std::collections::BTreeMap;

use qgraph_core::coupling::{CouplingSpec, KsPair, NamedForm, StForm, Strength, UnitaryCoupling, UNITARY_TOL};
use qgraph_core::graph::{Edge, EdgeDressing, GraphHamiltonian, Length, MetricGraph, Vertex};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::json::{
    as_array, as_cmatrix, as_complex, as_pairs, as_u64, cmatrix, complex, obj, pairs, parse, path, real,
    to_canonical,
};

pub const VERSION: &str = "qgraph-v1";

pub fn parse_graph(text: &str) -> Result<GraphHamiltonian> {
    graph_from_value(&parse(text)?, "")
}

pub fn serialize_graph(h: &GraphHamiltonian) -> String {
    to_canonical(&graph_to_value(h))
}

pub fn read_graph(file: &str) -> Result<GraphHamiltonian> {
    let text = std::fs::read_to_string(file).map_err(|source| Error::Io {
        path: file.to_string(),
        source,
    })?;
    parse_graph(&text).map_err(|e| match e {
        Error::Format { at, msg } => Error::Format {
            at: format!("{file}: {at}"),
            msg,
        },
        Error::Core(c) => Error::Format {
            at: file.to_string(),
            msg: c.to_string(),
        },
        other => other,
    })
}

pub fn graph_to_value(h: &GraphHamiltonian) -> Value {
    let g = h.graph();
    let vertices: Vec<Value> = g
        .vertices()
        .iter()
        .map(|(id, v)| json!({"id": id, "coupling": v.coupling}))
        .collect();
    let edges: Vec<Value> = g
        .edges()
        .iter()
        .map(|(id, e)| {
            let length = match e.length {
                Length::Finite(l) => real(l),
                Length::Infinite => Value::String("inf".into()),
            };
            json!({
                "id": id,
                "from": e.from,
                "to": e.to,
                "length": length,
                "potential": pairs(&e.dressing.potential),
                "vector_potential": real(e.dressing.vector_potential),
                "delta_points": pairs(&e.dressing.delta_points),
            })
        })
        .collect();
    let couplings: Map<String, Value> = h
        .couplings()
        .iter()
        .map(|(id, c)| (id.clone(), coupling_to_value(c)))
        .collect();
    json!({
        "version": VERSION,
        "vertices": vertices,
        "edges": edges,
        "couplings": couplings,
    })
}

fn strength_value(s: Strength) -> Value {
    match s {
        Strength::Finite(x) => real(x),
        Strength::Infinite => Value::String("inf".into()),
    }
}

pub fn coupling_to_value(c: &CouplingSpec) -> Value {
    match c {
        CouplingSpec::Named(NamedForm::Delta(s)) => json!({"form": "delta", "alpha": strength_value(*s)}),
        CouplingSpec::Named(NamedForm::DeltaPrime(s)) => {
            json!({"form": "delta_prime", "beta": strength_value(*s)})
        }
        CouplingSpec::Named(NamedForm::Free) => json!({"form": "free"}),
        CouplingSpec::Named(NamedForm::Dirichlet) => json!({"form": "dirichlet"}),
        CouplingSpec::Named(NamedForm::Neumann) => json!({"form": "neumann"}),
        CouplingSpec::Named(NamedForm::PermInvariant { a, b }) => {
            json!({"form": "perm_invariant", "a": complex(*a), "b": complex(*b)})
        }
        CouplingSpec::Ks(p) => json!({"form": "ks", "A": cmatrix(&p.a), "B": cmatrix(&p.b)}),
        CouplingSpec::Unitary(u) => json!({"form": "unitary", "U": cmatrix(u.matrix())}),
        CouplingSpec::St(st) => st_to_value(st),
    }
}

pub fn st_to_value(st: &StForm) -> Value {
    json!({
        "form": "st",
        "m": st.m,
        "S": cmatrix(&st.s),
        "T": cmatrix(&st.t),
        "perm": st.perm,
    })
}

fn strength(v: &Value, at: &str) -> Result<Strength> {
    match v {
        Value::String(s) if s == "inf" => Ok(Strength::Infinite),
        _ => v
            .as_f64()
            .map(Strength::Finite)
            .ok_or_else(|| Error::format(at, "expected a number or \"inf\"")),
    }
}

pub fn coupling_from_value(v: &Value, at: &str) -> Result<CouplingSpec> {
    let o = obj(v, at)?;
    let form = o.str("form")?;
    let named = |f: NamedForm| Ok(CouplingSpec::Named(f));
    match form {
        "delta" => {
            o.only(&["form", "alpha"])?;
            named(NamedForm::Delta(strength(o.get("alpha")?, &path(at, "alpha"))?))
        }
        "delta_prime" => {
            o.only(&["form", "beta"])?;
            named(NamedForm::DeltaPrime(strength(o.get("beta")?, &path(at, "beta"))?))
        }
        "free" => {
            o.only(&["form"])?;
            named(NamedForm::Free)
        }
        "dirichlet" => {
            o.only(&["form"])?;
            named(NamedForm::Dirichlet)
        }
        "neumann" => {
            o.only(&["form"])?;
            named(NamedForm::Neumann)
        }
        "perm_invariant" => {
            o.only(&["form", "a", "b"])?;
            named(NamedForm::PermInvariant {
                a: as_complex(o.get("a")?, &path(at, "a"))?,
                b: as_complex(o.get("b")?, &path(at, "b"))?,
            })
        }
        "ks" => {
            o.only(&["form", "A", "B"])?;
            Ok(CouplingSpec::Ks(KsPair {
                a: as_cmatrix(o.get("A")?, &path(at, "A"))?,
                b: as_cmatrix(o.get("B")?, &path(at, "B"))?,
            }))
        }
        "unitary" => {
            o.only(&["form", "U"])?;
            let u = as_cmatrix(o.get("U")?, &path(at, "U"))?;
            let u = UnitaryCoupling::new(u, UNITARY_TOL).map_err(|e| Error::format(path(at, "U"), e))?;
            Ok(CouplingSpec::Unitary(u))
        }
        "st" => {
            o.only(&["form", "m", "S", "T", "perm"])?;
            let st = st_from_value(v, at)?;
            Ok(CouplingSpec::St(st))
        }
        other => Err(Error::format(path(at, "form"), format!("unknown coupling form \"{other}\""))),
    }
}

/// ST-form from `{"S", "T", "perm"?, "m"?}`; `m` defaults to the size of
/// `S` and `perm` to the identity.
pub fn st_from_value(v: &Value, at: &str) -> Result<StForm> {
    let o = obj(v, at)?;
    let s = as_cmatrix(o.get("S")?, &path(at, "S"))?;
    let m = match o.opt("m") {
        Some(x) => as_u64(x, &path(at, "m"))? as usize,
        None => s.nrows(),
    };
    let t_raw = o.get("T")?;
    let mut t = as_cmatrix(t_raw, &path(at, "T"))?;
    if t.nrows() == 0 && m > 0 {
        return Err(Error::format(path(at, "T"), "T needs m rows"));
    }
    if m == 0 {
        // T is 0 × n; the number of edges comes from perm.
        let n = o.opt("perm").map_or(Ok(0), |p| as_array(p, &path(at, "perm")).map(|a| a.len()))?;
        t = qgraph_core::CMat::zeros(0, n);
    }
    let n = m + t.ncols();
    let perm = match o.opt("perm") {
        Some(p) => as_array(p, &path(at, "perm"))?
            .iter()
            .enumerate()
            .map(|(i, x)| as_u64(x, &format!("{}[{i}]", path(at, "perm"))).map(|u| u as usize))
            .collect::<Result<Vec<_>>>()?,
        None => (0..n).collect(),
    };
    let st = StForm { m, s, t, perm };
    st.validate(1e-10).map_err(|e| Error::format(at, e))?;
    Ok(st)
}

pub fn graph_from_value(v: &Value, at: &str) -> Result<GraphHamiltonian> {
    let o = obj(v, at)?;
    o.only(&["version", "vertices", "edges", "couplings"])?;
    let version = o.str("version")?;
    if version != VERSION {
        return Err(Error::format(
            path(at, "version"),
            format!("unsupported version \"{version}\" (expected \"{VERSION}\")"),
        ));
    }
    let mut vertices = BTreeMap::new();
    let vat = path(at, "vertices");
    for (i, x) in as_array(o.get("vertices")?, &vat)?.iter().enumerate() {
        let here = format!("{vat}[{i}]");
        let vo = obj(x, &here)?;
        vo.only(&["id", "coupling"])?;
        let id = vo.u64("id")?;
        let id = u32::try_from(id).map_err(|_| Error::format(path(&here, "id"), "id out of range"))?;
        let coupling = vo.str("coupling")?.to_string();
        if vertices.insert(id, Vertex { coupling }).is_some() {
            return Err(Error::format(path(&here, "id"), format!("duplicate vertex id {id}")));
        }
    }
    let mut edges = BTreeMap::new();
    let eat = path(at, "edges");
    for (i, x) in as_array(o.get("edges")?, &eat)?.iter().enumerate() {
        let here = format!("{eat}[{i}]");
        let eo = obj(x, &here)?;
        eo.only(&["id", "from", "to", "length", "potential", "vector_potential", "delta_points"])?;
        let id = u32::try_from(eo.u64("id")?)
            .map_err(|_| Error::format(path(&here, "id"), "id out of range"))?;
        let from = u32::try_from(eo.u64("from")?)
            .map_err(|_| Error::format(path(&here, "from"), "id out of range"))?;
        let to = match eo.opt("to") {
            None => None,
            Some(t) => Some(
                u32::try_from(as_u64(t, &path(&here, "to"))?)
                    .map_err(|_| Error::format(path(&here, "to"), "id out of range"))?,
            ),
        };
        let length = match eo.get("length")? {
            Value::String(s) if s == "inf" => Length::Infinite,
            other => {
                let l = other
                    .as_f64()
                    .ok_or_else(|| Error::format(path(&here, "length"), "expected a number or \"inf\""))?;
                if !(l > 0.0 && l.is_finite()) {
                    return Err(Error::format(path(&here, "length"), format!("non-positive length {l}")));
                }
                Length::Finite(l)
            }
        };
        if to.is_none() != matches!(length, Length::Infinite) {
            return Err(Error::format(
                &here,
                "half-lines have \"to\": null and \"length\": \"inf\"; finite edges need both ends",
            ));
        }
        let dressing = EdgeDressing {
            vector_potential: eo.opt_f64("vector_potential")?.unwrap_or(0.0),
            potential: eo
                .opt("potential")
                .map_or(Ok(Vec::new()), |p| as_pairs(p, &path(&here, "potential")))?,
            delta_points: eo
                .opt("delta_points")
                .map_or(Ok(Vec::new()), |p| as_pairs(p, &path(&here, "delta_points")))?,
        };
        dressing.validate(length, &here)?;
        let edge = Edge {
            from,
            to,
            length,
            dressing,
        };
        if edges.insert(id, edge).is_some() {
            return Err(Error::format(path(&here, "id"), format!("duplicate edge id {id}")));
        }
    }
    let mut couplings = BTreeMap::new();
    let cat = path(at, "couplings");
    let cobj = obj(o.get("couplings")?, &cat)?;
    for (id, c) in cobj.map {
        couplings.insert(id.clone(), coupling_from_value(c, &path(&cat, id))?);
    }
    let graph = MetricGraph::from_parts(vertices, edges)?;
    Ok(GraphHamiltonian::new(graph, couplings)?)
}
