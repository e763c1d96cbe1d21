//! Fat-star experiments: a JSON spec, an ε sweep against the graph limit and
//! the eigenvalue table and comparison report.
//!
//! ```json
//! {
//!   "arms": 4, "length": 1.0, "eps": [0.2, 0.1, 0.05], "div": 8,
//!   "mode": {"kind": "delta", "q": -1.0},
//!   "count": 5, "tol": 1e-8,
//!   "lift": {"index": 4},
//!   "require_decreasing": [1, 2, 3, 4]
//! }
//! ```
//!
//! Indices are 0-based. `mode` is `free`, `delta` (`q`) or `delta_prime`
//! (`beta`, `alpha_exp`). `escape_margin` drops fat eigenvalues more than
//! that far below the lowest graph eigenvalue before matching; the lifted
//! δ′ construction produces such states at coarse ε.

use qgraph_core::fatgraph::{graph_reference, lift_and_compare, lowest_eigs, FatMode, FatOperator, FatStarSpec};
use qgraph_core::linalg::c64;
use qgraph_core::schrodinger::{eigenfunction, lowest_energies, RootOptions};
use qgraph_core::sweep::{fit_rate, flatten, Fit};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::json::{as_array, as_reals, as_u64, obj, parse, path, real, reals, to_canonical};

#[derive(Debug, Clone, PartialEq)]
pub struct FatExperiment {
    /// Geometry and mode; `eps` is replaced by each entry of `eps_values`.
    pub base: FatStarSpec,
    /// Strictly decreasing.
    pub eps_values: Vec<f64>,
    pub count: usize,
    pub tol: f64,
    pub seed: u64,
    pub escape_margin: Option<f64>,
    pub lift_index: Option<usize>,
    pub require_decreasing: Vec<usize>,
}

impl FatExperiment {
    pub fn new(base: FatStarSpec, eps_values: Vec<f64>, count: usize) -> Self {
        FatExperiment {
            base,
            eps_values,
            count,
            tol: 1e-8,
            seed: 1,
            escape_margin: None,
            lift_index: None,
            require_decreasing: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps_values.is_empty() {
            return Err(Error::format("eps", "at least one width is needed"));
        }
        if self.eps_values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::format("eps", "widths must be strictly decreasing"));
        }
        if !(1..=8).contains(&self.count) {
            return Err(Error::format("count", "must lie in 1..=8"));
        }
        if let Some(i) = self.lift_index {
            if i >= self.count {
                return Err(Error::format("lift.index", "must be below count"));
            }
        }
        if let Some(&i) = self.require_decreasing.iter().find(|&&i| i >= self.count) {
            return Err(Error::format("require_decreasing", format!("index {i} is not below count")));
        }
        for &eps in &self.eps_values {
            self.spec_at(eps).validate().map_err(|e| Error::format(format!("eps {eps}"), e))?;
        }
        Ok(())
    }

    pub fn spec_at(&self, eps: f64) -> FatStarSpec {
        FatStarSpec { eps, ..self.base.clone() }
    }
}

pub fn parse_fat(text: &str) -> Result<FatExperiment> {
    let v = parse(text)?;
    let o = obj(&v, "")?;
    o.only(&[
        "arms",
        "length",
        "eps",
        "div",
        "rel_widths",
        "mode",
        "count",
        "tol",
        "seed",
        "escape_margin",
        "lift",
        "require_decreasing",
    ])?;
    let eps_values = match o.get("eps")? {
        Value::Array(_) => as_reals(o.get("eps")?, "eps")?,
        x => vec![x.as_f64().ok_or_else(|| Error::format("eps", "expected a number or a list"))?],
    };
    let mo = obj(o.get("mode")?, "mode")?;
    let mode = match mo.str("kind")? {
        "free" => {
            mo.only(&["kind"])?;
            FatMode::Free
        }
        "delta" => {
            mo.only(&["kind", "q"])?;
            FatMode::Delta { q: mo.f64("q")? }
        }
        "delta_prime" => {
            mo.only(&["kind", "beta", "alpha_exp"])?;
            FatMode::DeltaPrime {
                beta: mo.f64("beta")?,
                alpha_exp: mo.f64("alpha_exp")?,
            }
        }
        other => return Err(Error::format("mode.kind", format!("unknown mode \"{other}\""))),
    };
    let mut base = FatStarSpec::new(
        o.u64("arms")? as usize,
        o.f64("length")?,
        eps_values[0],
        o.u64("div")? as usize,
        mode,
    );
    if let Some(w) = o.opt("rel_widths") {
        base.rel_widths = as_reals(w, "rel_widths")?;
    }
    let mut exp = FatExperiment::new(base, eps_values, o.opt("count").map_or(Ok(5), |_| o.u64("count"))? as usize);
    if let Some(t) = o.opt_f64("tol")? {
        exp.tol = t;
    }
    if o.opt("seed").is_some() {
        exp.seed = o.u64("seed")?;
    }
    exp.escape_margin = o.opt_f64("escape_margin")?;
    if let Some(l) = o.opt("lift") {
        let lo = obj(l, "lift")?;
        lo.only(&["index"])?;
        exp.lift_index = Some(lo.u64("index")? as usize);
    }
    if let Some(r) = o.opt("require_decreasing") {
        exp.require_decreasing = as_array(r, "require_decreasing")?
            .iter()
            .enumerate()
            .map(|(i, x)| as_u64(x, &path("require_decreasing", &i.to_string())).map(|u| u as usize))
            .collect::<Result<_>>()?;
    }
    exp.validate()?;
    Ok(exp)
}

/// One width of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct FatPoint {
    pub eps: f64,
    pub dim: usize,
    /// The matched fat eigenvalues (escaped states removed).
    pub fat: Vec<f64>,
    pub graph: Vec<f64>,
    pub errors: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Fat eigenvalues dropped as escaped states.
    pub escaped: Vec<f64>,
    pub lift: Option<std::result::Result<f64, String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FatReport {
    pub points: Vec<FatPoint>,
    /// Per index: whether the error strictly decreases along the sweep.
    pub decreasing: Vec<bool>,
    pub lift_decreasing: Option<bool>,
    /// Per index: log-log fit of error against ε, when defined.
    pub fits: Vec<Option<Fit>>,
    pub violations: Vec<String>,
}

impl FatReport {
    pub fn accepted(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Extra eigenpairs computed beyond `count`, so that escaped states and the
/// simplicity check of the lifted pair have room.
const HEADROOM: usize = 3;

fn run_point(exp: &FatExperiment, eps: f64, graph: &[f64]) -> Result<FatPoint> {
    let spec = exp.spec_at(eps);
    let op = FatOperator::assemble(&spec)?;
    let eigs = lowest_eigs(&op, (exp.count + HEADROOM).min(10), exp.tol, exp.seed)?;
    let floor = exp.escape_margin.map_or(f64::NEG_INFINITY, |m| graph[0] - m);
    let skip = eigs.values.iter().take_while(|&&v| v < floor).count();
    if eigs.values.len() < skip + exp.count {
        return Err(Error::Core(qgraph_core::Error::Degenerate(format!(
            "ε = {eps}: {skip} escaped states leave fewer than {} eigenvalues",
            exp.count
        ))));
    }
    let fat: Vec<f64> = eigs.values[skip..skip + exp.count].to_vec();
    let errors = fat.iter().zip(graph).map(|(a, b)| (a - b).abs()).collect();
    let lift = exp.lift_index.map(|i| {
        lifted_difference(&spec, &op, &eigs, graph[i], skip + i).map_err(|e| e.to_string())
    });
    Ok(FatPoint {
        eps,
        dim: op.dim(),
        fat,
        graph: graph.to_vec(),
        errors,
        residuals: eigs.residuals[skip..skip + exp.count].to_vec(),
        escaped: eigs.values[..skip].to_vec(),
        lift,
    })
}

/// Samples the graph eigenfunction of energy `energy` on the arm grids and
/// compares its lift with fat eigenvector `index`.
fn lifted_difference(
    spec: &FatStarSpec,
    op: &FatOperator,
    eigs: &qgraph_core::fatgraph::FatEigs,
    energy: f64,
    index: usize,
) -> Result<f64> {
    let g = graph_reference(spec)?;
    let k = if energy >= 0.0 {
        c64(energy.sqrt(), 0.0)
    } else {
        c64(0.0, (-energy).sqrt())
    };
    let f = eigenfunction(&g, k, &RootOptions::default())?;
    if f.multiplicity != 1 {
        return Err(Error::Core(qgraph_core::Error::Degenerate(format!(
            "graph eigenvalue {energy} has multiplicity {}",
            f.multiplicity
        ))));
    }
    let complex: Vec<Vec<_>> = (0..spec.arms).map(|a| f.sample(a as u32, &op.arm_grid(a))).collect();
    // The secular kernel vector carries an arbitrary phase; remove it.
    let peak = complex
        .iter()
        .flatten()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or(c64(1.0, 0.0));
    let phase = if peak.norm() > 0.0 { peak.conj() / peak.norm() } else { c64(1.0, 0.0) };
    let samples: Vec<Vec<f64>> = complex.iter().map(|arm| arm.iter().map(|z| (z * phase).re).collect()).collect();
    Ok(lift_and_compare(op, &samples, eigs, index)?)
}

pub fn run_fat(exp: &FatExperiment, jobs: usize) -> Result<FatReport> {
    exp.validate()?;
    let g = graph_reference(&exp.base)?;
    let graph = flatten(&lowest_energies(&g, exp.count, 1e3, &RootOptions::default())?);
    let graph = graph[..exp.count].to_vec();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::format("jobs", e))?;
    let points = pool.install(|| {
        exp.eps_values
            .par_iter()
            .map(|&eps| run_point(exp, eps, &graph))
            .collect::<Result<Vec<_>>>()
    })?;
    let strictly = |xs: &[f64]| xs.windows(2).all(|w| w[1] < w[0]);
    let series = |i: usize| points.iter().map(|p| p.errors[i]).collect::<Vec<_>>();
    let decreasing: Vec<bool> = (0..exp.count).map(|i| strictly(&series(i))).collect();
    let fits = (0..exp.count)
        .map(|i| {
            let pts: Vec<(f64, f64)> = exp.eps_values.iter().copied().zip(series(i)).collect();
            fit_rate(&pts).ok()
        })
        .collect();
    let lift_values: Option<Vec<f64>> = exp.lift_index.map(|_| {
        points
            .iter()
            .filter_map(|p| p.lift.as_ref().and_then(|l| l.as_ref().ok().copied()))
            .collect()
    });
    let lift_decreasing = lift_values
        .as_ref()
        .map(|v| v.len() == points.len() && strictly(v));
    let mut violations = Vec::new();
    for &i in &exp.require_decreasing {
        if !decreasing[i] {
            violations.push(format!("error of eigenvalue {i} does not strictly decrease"));
        }
    }
    if lift_decreasing == Some(false) {
        violations.push("lift difference does not strictly decrease".into());
    }
    Ok(FatReport {
        points,
        decreasing,
        lift_decreasing,
        fits,
        violations,
    })
}

/// `eps,index,fat,graph,error,residual`.
pub fn fat_csv(report: &FatReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["eps", "index", "fat", "graph", "error", "residual"])
        .expect("in-memory write");
    for p in &report.points {
        for i in 0..p.fat.len() {
            w.write_record([
                format!("{:.16e}", p.eps),
                i.to_string(),
                format!("{:.16e}", p.fat[i]),
                format!("{:.16e}", p.graph[i]),
                format!("{:.16e}", p.errors[i]),
                format!("{:.3e}", p.residuals[i]),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii")
}

pub fn fat_report_json(report: &FatReport) -> String {
    let points: Vec<Value> = report
        .points
        .iter()
        .map(|p| {
            let lift = match &p.lift {
                None => Value::Null,
                Some(Ok(d)) => real(*d),
                Some(Err(msg)) => json!({"failure": msg}),
            };
            json!({
                "eps": real(p.eps),
                "dim": p.dim,
                "fat": reals(&p.fat),
                "graph": reals(&p.graph),
                "errors": reals(&p.errors),
                "escaped": reals(&p.escaped),
                "lift": lift,
            })
        })
        .collect();
    let fits: Vec<Value> = report
        .fits
        .iter()
        .map(|f| {
            f.map_or(Value::Null, |f| {
                json!({"slope": real(f.slope), "intercept": real(f.intercept), "r2": real(f.r2)})
            })
        })
        .collect();
    to_canonical(&json!({
        "points": points,
        "decreasing": report.decreasing,
        "lift_decreasing": report.lift_decreasing,
        "fits": fits,
        "violations": report.violations,
        "accepted": report.accepted(),
    }))
}
