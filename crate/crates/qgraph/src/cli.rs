//! Command-line front end.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use qgraph_core::builders::{GeneralOptions, PhaseOffset, Profile};
use qgraph_core::coupling::{ks_from_unitary, st_from_unitary, CouplingSpec, RANK_TOL};
use qgraph_core::graph::{GraphHamiltonian, MetricGraph, Vertex};
use qgraph_core::linalg::c64;
use qgraph_core::schrodinger::{
    bound_states, discretize_pair, eigenvalues, global_smatrix, resolvent_distance, RootOptions,
};
use serde_json::json;

use crate::approx::{build, serialize_recipe, target_star, Family};
use crate::error::{Error, Result};
use crate::fat_file::{fat_csv, fat_report_json, parse_fat, run_fat};
use crate::graph_file::{graph_to_value, read_graph, serialize_graph};
use crate::json::{cmatrix, real, to_canonical};
use crate::sweep_file::{parse_sweep, run_sweep, sweep_csv, sweep_report_json, sweep_summary};

#[derive(Debug, Parser)]
#[command(name = "qgraph", version, about = "Quantum graphs with general vertex couplings")]
pub struct Cli {
    /// Seed for the start vectors of iterative routines.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for `sweep` and `fat`.
    #[arg(long, global = true, env = "QG_JOBS")]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Form {
    Ks,
    Unitary,
    St,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyKind {
    Cs,
    General,
    Potential,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a graph file.
    Validate { graph: PathBuf },
    /// Rewrite every coupling in one matrix form.
    Convert {
        #[arg(long = "to", value_enum)]
        to: Form,
        graph: PathBuf,
    },
    /// Global scattering matrix at momentum k.
    Scatter {
        #[arg(long, allow_negative_numbers = true)]
        k: f64,
        graph: PathBuf,
    },
    /// Eigenvalues k² with k in [kmin, kmax] of a compact graph (CSV).
    Eig {
        #[arg(long, default_value_t = 0.0)]
        kmin: f64,
        #[arg(long)]
        kmax: f64,
        #[arg(long, default_value_t = 20)]
        count: usize,
        graph: PathBuf,
    },
    /// Negative eigenvalues −κ² with κ up to kappa-max.
    Bound {
        #[arg(long = "kappa-max")]
        kappa_max: f64,
        graph: PathBuf,
    },
    /// Build one member of an approximating family for a target star.
    Approx {
        #[arg(value_enum)]
        family: FamilyKind,
        /// Spacing of the Cheon–Shigehara δ's.
        #[arg(long)]
        a: Option<f64>,
        /// Half-length of the connecting segments.
        #[arg(long)]
        d: Option<f64>,
        /// Scaling of the potentials.
        #[arg(long)]
        eps: Option<f64>,
        /// Profile used on every edge, as `x:w` breakpoints, e.g. `0.5:-1`.
        #[arg(long, value_delimiter = ',')]
        profile: Vec<String>,
        /// Read the phase offset inside the argument (general family).
        #[arg(long)]
        inside_arg: bool,
        /// Writes PREFIX.recipe.json and PREFIX.graph.json instead of
        /// printing the recipe.
        #[arg(long)]
        out: Option<PathBuf>,
        target: PathBuf,
    },
    /// Run a convergence sweep.
    Sweep {
        spec: PathBuf,
        /// CSV destination (stdout by default).
        #[arg(long)]
        csv: Option<PathBuf>,
        /// JSON report destination.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Timing log (defaults to the CSV path with `.log` appended).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Run a fat-star experiment.
    Fat {
        spec: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Discrete ‖(H_A − z)⁻¹ − J(H_B − z)⁻¹J*‖ on a shared grid.
    ResolventDist {
        /// `re,im` or `re`.
        #[arg(long, allow_hyphen_values = true)]
        z: String,
        #[arg(long)]
        h: f64,
        graph_a: PathBuf,
        graph_b: PathBuf,
    },
}

fn graph(p: &Path) -> Result<GraphHamiltonian> {
    read_graph(&p.display().to_string())
}

fn read(p: &Path) -> Result<String> {
    std::fs::read_to_string(p).map_err(|source| Error::Io {
        path: p.display().to_string(),
        source,
    })
}

fn write_file(p: &Path, text: &str) -> Result<()> {
    std::fs::write(p, text).map_err(|source| Error::Io {
        path: p.display().to_string(),
        source,
    })
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|source| Error::Io {
        path: "stdout".into(),
        source,
    })
}

fn at_file(p: &Path, e: Error) -> Error {
    match e {
        Error::Format { at, msg } => Error::Format {
            at: format!("{}: {at}", p.display()),
            msg,
        },
        other => other,
    }
}

fn jobs(cli: &Cli) -> usize {
    cli.jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}

fn parse_z(s: &str) -> Result<qgraph_core::C64> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |t: &str| t.parse::<f64>().map_err(|_| Error::format("--z", format!("bad number \"{t}\"")));
    match parts[..] {
        [re] => Ok(c64(num(re)?, 0.0)),
        [re, im] => Ok(c64(num(re)?, num(im)?)),
        _ => Err(Error::format("--z", "expected re,im")),
    }
}

fn parse_profile(items: &[String]) -> Result<Option<Profile>> {
    if items.is_empty() {
        return Ok(None);
    }
    items
        .iter()
        .map(|item| {
            let (x, w) = item
                .split_once(':')
                .ok_or_else(|| Error::format("--profile", format!("expected x:w, got \"{item}\"")))?;
            let num = |t: &str| t.trim().parse::<f64>().map_err(|_| Error::format("--profile", format!("bad number \"{t}\"")));
            Ok((num(x)?, num(w)?))
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

/// Every vertex gets its coupling in the requested matrix form. Named
/// couplings shared by vertices of different degree are split, one id per
/// degree.
pub fn convert(h: &GraphHamiltonian, to: Form) -> Result<GraphHamiltonian> {
    let g = h.graph();
    let mut degrees: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (&v, vx) in g.vertices() {
        let d = g.degree(v);
        let list = degrees.entry(&vx.coupling).or_default();
        if !list.contains(&d) {
            list.push(d);
        }
    }
    let mut vertices = BTreeMap::new();
    let mut couplings = BTreeMap::new();
    for (&v, vx) in g.vertices() {
        let d = g.degree(v);
        let id = if degrees[vx.coupling.as_str()].len() > 1 {
            format!("{}_deg{d}", vx.coupling)
        } else {
            vx.coupling.clone()
        };
        if !couplings.contains_key(&id) {
            let u = h.unitary(v).clone();
            let spec = match to {
                Form::Unitary => CouplingSpec::Unitary(u),
                Form::Ks => CouplingSpec::Ks(ks_from_unitary(&u)),
                Form::St => CouplingSpec::St(st_from_unitary(&u, RANK_TOL)?),
            };
            couplings.insert(id.clone(), spec);
        }
        vertices.insert(v, Vertex { coupling: id });
    }
    let graph = MetricGraph::from_parts(vertices, g.edges().clone())?;
    Ok(GraphHamiltonian::new(graph, couplings)?)
}

/// Runs one invocation, writing data to `out` and diagnostics to `err`.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let opts = RootOptions::default();
    let seed = cli.seed;
    match &cli.command {
        Command::Validate { graph: p } => {
            let h = graph(p)?;
            let g = h.graph();
            emit(
                out,
                &format!(
                    "ok: {} vertices, {} edges, {} couplings{}\n",
                    g.vertices().len(),
                    g.edges().len(),
                    h.couplings().len(),
                    if g.is_compact() { ", compact" } else { "" }
                ),
            )
        }
        Command::Convert { to, graph: p } => {
            let h = graph(p)?;
            emit(out, &serialize_graph(&convert(&h, *to)?))
        }
        Command::Scatter { k, graph: p } => {
            let h = graph(p)?;
            let s = global_smatrix(&h, *k)?;
            emit(out, &to_canonical(&json!({"k": real(*k), "S": cmatrix(&s.s)})))
        }
        Command::Eig {
            kmin,
            kmax,
            count,
            graph: p,
        } => {
            let h = graph(p)?;
            let ev = eigenvalues(&h, *kmin, *kmax, *count, &opts)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["index", "k", "energy", "multiplicity"]).expect("in-memory write");
            for (i, e) in ev.iter().enumerate() {
                w.write_record([
                    i.to_string(),
                    format!("{:.16e}", e.k),
                    format!("{:.16e}", e.energy()),
                    e.multiplicity.to_string(),
                ])
                .expect("in-memory write");
            }
            emit(out, &String::from_utf8(w.into_inner().expect("flush")).expect("ascii"))
        }
        Command::Bound { kappa_max, graph: p } => {
            let h = graph(p)?;
            let b = bound_states(&h, *kappa_max, &opts)?;
            let states: Vec<_> = b
                .states
                .iter()
                .map(|s| json!({"kappa": real(s.kappa), "energy": real(s.energy), "multiplicity": s.multiplicity}))
                .collect();
            if b.truncated {
                writeln!(err, "warning: more bound states may lie above kappa-max").ok();
            }
            emit(out, &to_canonical(&json!({"states": states, "truncated": b.truncated})))
        }
        Command::Approx {
            family,
            a,
            d,
            eps,
            profile,
            inside_arg,
            out: prefix,
            target,
        } => {
            let t = target_star(&graph(target)?)?;
            let need = |v: &Option<f64>, flag: &str| v.ok_or_else(|| Error::format(flag, "required for this family"));
            let fam = match family {
                FamilyKind::Cs => Family::CheonShigehara { a: need(a, "--a")? },
                FamilyKind::General => Family::General {
                    d: need(d, "--d")?,
                    options: GeneralOptions {
                        offset: if *inside_arg { PhaseOffset::InsideArg } else { PhaseOffset::AfterArg },
                        ..GeneralOptions::default()
                    },
                },
                FamilyKind::Potential => Family::Potential {
                    eps: need(eps, "--eps")?,
                    profiles: parse_profile(profile)?.map(|p| vec![p; t.n]),
                },
            };
            let recipe = build(&t, &fam)?;
            for w in &recipe.warnings {
                writeln!(err, "warning: {w}").ok();
            }
            match prefix {
                None => emit(out, &serialize_recipe(&recipe)),
                Some(pre) => {
                    let base = pre.display().to_string();
                    write_file(Path::new(&format!("{base}.recipe.json")), &serialize_recipe(&recipe))?;
                    write_file(
                        Path::new(&format!("{base}.graph.json")),
                        &to_canonical(&graph_to_value(&recipe.generated)),
                    )
                }
            }
        }
        Command::Sweep { spec, csv, report, log } => {
            let started = SystemTime::now();
            let clock = Instant::now();
            let mut s = parse_sweep(&read(spec)?).map_err(|e| at_file(spec, e))?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            let r = run_sweep(&s, jobs(cli))?;
            let csv_text = sweep_csv(&r);
            match csv {
                Some(p) => write_file(p, &csv_text)?,
                None => emit(out, &csv_text)?,
            }
            if let Some(p) = report {
                write_file(p, &sweep_report_json(&r))?;
            }
            let log_path = log.clone().or_else(|| csv.as_ref().map(|p| PathBuf::from(format!("{}.log", p.display()))));
            if let Some(p) = log_path {
                let mut text = format!(
                    "started_unix {:.3}\nelapsed_s {:.3}\njobs {}\n",
                    started.duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64()),
                    clock.elapsed().as_secs_f64(),
                    jobs(cli)
                );
                for pt in &r.points {
                    text.push_str(&format!("point {:.6e} {:.6}\n", pt.param, pt.seconds));
                }
                write_file(&p, &text)?;
            }
            writeln!(err, "{}", sweep_summary(&r)).ok();
            if r.accepted() {
                Ok(())
            } else {
                Err(Error::Acceptance(r.violations.join("; ")))
            }
        }
        Command::Fat { spec, csv, report } => {
            let mut exp = parse_fat(&read(spec)?).map_err(|e| at_file(spec, e))?;
            if let Some(seed) = seed {
                exp.seed = seed;
            }
            let r = run_fat(&exp, jobs(cli))?;
            let table = fat_csv(&r);
            match csv {
                Some(p) => write_file(p, &table)?,
                None => emit(out, &table)?,
            }
            if let Some(p) = report {
                write_file(p, &fat_report_json(&r))?;
            }
            if r.accepted() {
                Ok(())
            } else {
                Err(Error::Acceptance(r.violations.join("; ")))
            }
        }
        Command::ResolventDist { z, h, graph_a, graph_b } => {
            let z = parse_z(z)?;
            let (a, b) = (graph(graph_a)?, graph(graph_b)?);
            let (d1, d2) = discretize_pair(&a, &b, *h)?;
            let est = resolvent_distance(&d1, &d2, z, seed.unwrap_or(0))?;
            emit(
                out,
                &to_canonical(&json!({
                    "z": [real(z.re), real(z.im)],
                    "h": real(*h),
                    "distance": real(est.value),
                    "iterations": est.iterations,
                    "last_change": real(est.last_change),
                })),
            )
        }
    }
}
