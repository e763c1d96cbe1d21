//! Sweep specifications in JSON, a parallel runner and the CSV/JSON reports.
//!
//! ```json
//! {
//!   "builder": {"kind": "cs", "n": 2, "beta": 1.0, "geometry": "half_lines"},
//!   "params": {"log_from": 0.1, "log_to": 0.001, "count": 9},
//!   "observable": {"kind": "smatrix", "k": 1.0},
//!   "target": "limit",
//!   "window": {"slope_min": 0.8, "slope_max": 1.15, "r2_min": 0.98},
//!   "seed": 7
//! }
//! ```
//!
//! Builders: `cs` (`n`, `beta`), `potential` (`profiles`: one list of
//! `[x, w]` breakpoints per edge), `general` (`st`: `{"S", "T", "perm"?}`,
//! optional `"offset": "after_arg" | "inside_arg"`). Geometry is
//! `"half_lines"` or `{"length": ℓ, "outer": coupling}`.
//!
//! Observables: `smatrix` (`k`), `eigenvalues` (`count`), `ground_state`,
//! `resolvent` (`z` as `[re, im]`, `h_factor`: grid step over parameter).
//!
//! Targets: `"limit"`, `{"graph": graph}`, `{"smatrix": matrix}`,
//! `{"energies": [..]}`.

use std::fmt::Write as _;
use std::time::Instant;

use qgraph_core::builders::{GeneralOptions, PhaseOffset, StarGeometry};
use qgraph_core::sweep::{Builder, Observable, SweepPoint, SweepReport, SweepSpec, Target, Window};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::graph_file::{coupling_from_value, graph_from_value, st_from_value};
use crate::json::{as_array, as_cmatrix, as_complex, as_pairs, as_reals, obj, parse, path, real, to_canonical};

pub fn parse_sweep(text: &str) -> Result<SweepSpec> {
    let v = parse(text)?;
    let o = obj(&v, "")?;
    o.only(&["builder", "params", "observable", "target", "window", "seed"])?;
    let spec = SweepSpec {
        builder: builder(o.get("builder")?)?,
        params: params(o.get("params")?)?,
        observable: observable(o.get("observable")?)?,
        target: target(o.opt("target"))?,
        window: o.opt("window").map(window).transpose()?,
        seed: o.opt("seed").map_or(Ok(0), |_| o.u64("seed"))?,
    };
    spec.validate().map_err(|e| Error::format("sweep", e))?;
    Ok(spec)
}

fn geometry(v: Option<&Value>, at: &str) -> Result<StarGeometry> {
    match v {
        None => Ok(StarGeometry::HalfLines),
        Some(Value::String(s)) if s == "half_lines" => Ok(StarGeometry::HalfLines),
        Some(g) => {
            let o = obj(g, at)?;
            o.only(&["length", "outer"])?;
            Ok(StarGeometry::Finite {
                length: o.f64("length")?,
                outer: coupling_from_value(o.get("outer")?, &path(at, "outer"))?,
            })
        }
    }
}

fn builder(v: &Value) -> Result<Builder> {
    let at = "builder";
    let o = obj(v, at)?;
    let geometry = geometry(o.opt("geometry"), &path(at, "geometry"))?;
    match o.str("kind")? {
        "cs" => {
            o.only(&["kind", "n", "beta", "geometry"])?;
            Ok(Builder::CheonShigehara {
                n: o.u64("n")? as usize,
                beta: o.f64("beta")?,
                geometry,
            })
        }
        "potential" => {
            o.only(&["kind", "profiles", "geometry"])?;
            let pat = path(at, "profiles");
            let profiles = as_array(o.get("profiles")?, &pat)?
                .iter()
                .enumerate()
                .map(|(i, p)| as_pairs(p, &format!("{pat}[{i}]")))
                .collect::<Result<Vec<_>>>()?;
            Ok(Builder::ScaledPotential { profiles, geometry })
        }
        "general" => {
            o.only(&["kind", "st", "offset", "geometry"])?;
            let offset = match o.opt("offset").map(|_| o.str("offset")).transpose()? {
                None | Some("after_arg") => PhaseOffset::AfterArg,
                Some("inside_arg") => PhaseOffset::InsideArg,
                Some(other) => {
                    return Err(Error::format(path(at, "offset"), format!("unknown offset \"{other}\"")))
                }
            };
            Ok(Builder::GeneralVertex {
                st: st_from_value(o.get("st")?, &path(at, "st"))?,
                geometry,
                options: GeneralOptions {
                    offset,
                    ..GeneralOptions::default()
                },
            })
        }
        other => Err(Error::format(path(at, "kind"), format!("unknown builder \"{other}\""))),
    }
}

/// A list, or `{"log_from", "log_to", "count"}` for log-spaced values with
/// exact endpoints.
pub fn params(v: &Value) -> Result<Vec<f64>> {
    let at = "params";
    if v.is_array() {
        return as_reals(v, at);
    }
    let o = obj(v, at)?;
    o.only(&["log_from", "log_to", "count"])?;
    let (from, to, count) = (o.f64("log_from")?, o.f64("log_to")?, o.u64("count")? as usize);
    if !(from > 0.0 && to > 0.0) || count < 2 {
        return Err(Error::format(at, "log spacing needs positive endpoints and count ≥ 2"));
    }
    Ok(log_spaced(from, to, count))
}

pub fn log_spaced(from: f64, to: f64, count: usize) -> Vec<f64> {
    let (a, b) = (from.ln(), to.ln());
    (0..count)
        .map(|i| match i {
            0 => from,
            _ if i + 1 == count => to,
            _ => (a + (b - a) * i as f64 / (count - 1) as f64).exp(),
        })
        .collect()
}

fn observable(v: &Value) -> Result<Observable> {
    let at = "observable";
    let o = obj(v, at)?;
    match o.str("kind")? {
        "smatrix" => {
            o.only(&["kind", "k"])?;
            Ok(Observable::SMatrixAt { k: o.f64("k")? })
        }
        "eigenvalues" => {
            o.only(&["kind", "count"])?;
            Ok(Observable::Eigenvalues {
                count: o.u64("count")? as usize,
            })
        }
        "ground_state" => {
            o.only(&["kind"])?;
            Ok(Observable::GroundState)
        }
        "resolvent" => {
            o.only(&["kind", "z", "h_factor"])?;
            Ok(Observable::ResolventDistance {
                z: as_complex(o.get("z")?, &path(at, "z"))?,
                h_factor: o.f64("h_factor")?,
            })
        }
        other => Err(Error::format(path(at, "kind"), format!("unknown observable \"{other}\""))),
    }
}

fn target(v: Option<&Value>) -> Result<Target> {
    let at = "target";
    let v = match v {
        None => return Ok(Target::RecipeLimit),
        Some(Value::String(s)) if s == "limit" => return Ok(Target::RecipeLimit),
        Some(v) => v,
    };
    let o = obj(v, at)?;
    o.only(&["graph", "smatrix", "energies"])?;
    if o.map.len() != 1 {
        return Err(Error::format(at, "expected exactly one of graph, smatrix, energies"));
    }
    if let Some(g) = o.opt("graph") {
        return Ok(Target::Hamiltonian(graph_from_value(g, &path(at, "graph"))?));
    }
    if let Some(s) = o.opt("smatrix") {
        return Ok(Target::SMatrix(as_cmatrix(s, &path(at, "smatrix"))?));
    }
    let mut e = as_reals(o.get("energies")?, &path(at, "energies"))?;
    e.sort_by(f64::total_cmp);
    Ok(Target::Energies(e))
}

fn window(v: &Value) -> Result<Window> {
    let o = obj(v, "window")?;
    o.only(&["slope_min", "slope_max", "r2_min", "decreasing", "final_below"])?;
    Ok(Window {
        slope_min: o.opt_f64("slope_min")?,
        slope_max: o.opt_f64("slope_max")?,
        r2_min: o.opt_f64("r2_min")?,
        decreasing: o.bool_or("decreasing", false)?,
        final_below: o.opt_f64("final_below")?,
    })
}

/// Evaluates every point on a pool of `jobs` threads. Points come back in
/// parameter order whatever the scheduling.
pub fn run_sweep(spec: &SweepSpec, jobs: usize) -> Result<SweepReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::format("jobs", e))?;
    let points: Vec<SweepPoint> = pool.install(|| {
        spec.params
            .par_iter()
            .map(|&param| {
                let t = Instant::now();
                let error = spec.evaluate(param).map_err(|e| e.to_string());
                SweepPoint {
                    param,
                    error,
                    seconds: t.elapsed().as_secs_f64(),
                }
            })
            .collect()
    });
    Ok(SweepReport::new(points, spec.window.as_ref()))
}

/// `param,error,seconds`; a failed point has an empty error field.
pub fn sweep_csv(report: &SweepReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["param", "error", "seconds"]).expect("in-memory write");
    for p in &report.points {
        let err = p.error.as_ref().map_or(String::new(), |e| format!("{e:.16e}"));
        w.write_record([format!("{:.16e}", p.param), err, format!("{:.6}", p.seconds)])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii")
}

/// The report without timings, so that identical runs give identical bytes.
pub fn sweep_report_json(report: &SweepReport) -> String {
    let points: Vec<Value> = report
        .points
        .iter()
        .map(|p| match &p.error {
            Ok(e) => json!({"param": real(p.param), "error": real(*e)}),
            Err(msg) => json!({"param": real(p.param), "failure": msg}),
        })
        .collect();
    let fit = report.fit.map_or(Value::Null, |f| {
        json!({"slope": real(f.slope), "intercept": real(f.intercept), "r2": real(f.r2)})
    });
    to_canonical(&json!({
        "points": points,
        "fit": fit,
        "fit_note": report.fit_note,
        "violations": report.violations,
        "accepted": report.accepted(),
    }))
}

/// One line for stderr.
pub fn sweep_summary(report: &SweepReport) -> String {
    let mut s = String::new();
    match (&report.fit, &report.fit_note) {
        (Some(f), _) => write!(s, "slope {:.4}, R² {:.4}", f.slope, f.r2).unwrap(),
        (None, Some(note)) => s.push_str(note),
        (None, None) => s.push_str("no fit"),
    }
    if report.accepted() {
        s.push_str("; window ok");
    } else {
        write!(s, "; violations: {}", report.violations.join("; ")).unwrap();
    }
    s
}
