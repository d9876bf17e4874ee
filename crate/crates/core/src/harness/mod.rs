//! Experiment runner: presets, sweeps and flat-file artifacts.
//!
//! A run writes `timeseries.csv` (one row per recorded state, fixed column
//! order [`TIMESERIES_COLUMNS`]) and `report.txt` (structured text with a
//! provenance block, the fully-defaulted spec and one block per check id)
//! into the spec's `output_dir`. A sweep writes one such directory per point
//! plus `sweep.csv` and `sweep_report.txt`.

pub mod config;
pub mod scenario;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

pub use config::{load_spec, logspace, parse_spec, ExperimentSpec, SweepVariable};
pub use scenario::Scenario;

use crate::error::{Error, Result};
use crate::flow::{run, FlowState, Trajectory};
use crate::geometry::{curvature_bounds, diameter, volume, Grid};
use crate::monitors::{evaluate, log_linear_rate, CheckReport, TrajectoryReport, Verdict};
use crate::potential::calabi_energy;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Bumped whenever [`TIMESERIES_COLUMNS`] changes.
pub const SCHEMA_VERSION: u32 = 1;

pub const TIMESERIES_COLUMNS: [&str; 17] = [
    "t",
    "dt",
    "volume",
    "diam",
    "K_min",
    "K_max",
    "a",
    "Y",
    "Z",
    "osc_u",
    "c0_u_minus_a",
    "grad_u_c0",
    "lambda_g",
    "holo_band_min",
    "holo_band_max",
    "class_residual",
    "phi_c0",
];

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn exit_code_for(error: &Error) -> i32 {
    match error.root() {
        Error::Config { .. } | Error::Io(_) => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

/// SHA-256 of the canonical spec text.
pub fn spec_hash(spec: &ExperimentSpec) -> String {
    hex::encode(Sha256::digest(spec.to_string().as_bytes()))
}

/// Number of concurrent sweep points: `KRFLOW_WORKERS`, then the spec, then
/// the machine's parallelism.
pub fn worker_count(spec: &ExperimentSpec) -> usize {
    std::env::var("KRFLOW_WORKERS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|w| *w > 0)
        .or(spec.workers)
        .unwrap_or_else(rayon::current_num_threads)
}

fn fmt_f(x: f64) -> String {
    format!("{x:e}")
}

pub fn timeseries_row(s: &FlowState) -> Vec<String> {
    let (kmin, kmax) = curvature_bounds(&s.metric);
    let f = &s.funcs;
    let band_min = s.holo_band.iter().cloned().fold(f64::INFINITY, f64::min);
    let band_max = s.holo_band.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    [
        s.t,
        s.dt,
        volume(&s.metric),
        diameter(&s.metric),
        kmin,
        kmax,
        f.a,
        f.y,
        f.z,
        f.osc_u,
        f.c0_u_minus_a,
        f.grad_u_c0,
        s.lambda_g,
        band_min,
        band_max,
        s.class_residual(),
        s.phi.sup_norm(),
    ]
    .into_iter()
    .map(fmt_f)
    .collect()
}

pub fn write_timeseries(path: &Path, states: &[FlowState]) -> Result<()> {
    let io = |e: csv::Error| Error::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(TIMESERIES_COLUMNS).map_err(io)?;
    for s in states {
        w.write_record(timeseries_row(s)).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

fn render_check(out: &mut String, id: &str, r: &CheckReport, verdict: Verdict, index: Option<usize>) {
    let _ = writeln!(out, "\n[check.{id}]");
    let _ = writeln!(out, "anchor = {}", r.paper_anchor);
    let _ = writeln!(out, "verdict = {verdict}");
    let _ = writeln!(out, "gate = {}", r.gate_satisfied);
    let _ = writeln!(out, "margin = {}", fmt_f(r.margin));
    let _ = writeln!(out, "tolerance = {}", fmt_f(r.tolerance));
    if let Some(i) = index {
        let _ = writeln!(out, "state_index = {i}");
    }
    for (k, v) in &r.aux {
        let _ = writeln!(out, "aux.{k} = {}", fmt_f(*v));
    }
    for n in &r.notes {
        let _ = writeln!(out, "note = {n}");
    }
}

/// Check blocks of a monitor report. Per-state checks report the state with
/// the smallest margin inside the gate (or the first state if none is).
pub fn render_checks(rep: &TrajectoryReport) -> String {
    let mut out = String::new();
    for (id, reps) in &rep.series {
        let verdict = Verdict::aggregate(reps.iter().map(|r| r.verdict));
        let worst = reps
            .iter()
            .enumerate()
            .filter(|(_, r)| r.gate_satisfied)
            .min_by(|a, b| a.1.margin.total_cmp(&b.1.margin))
            .or_else(|| reps.iter().enumerate().next());
        match worst {
            Some((i, r)) => render_check(&mut out, id, r, verdict, Some(i)),
            None => {
                let _ = writeln!(out, "\n[check.{id}]\nverdict = {verdict}\nnote = no states");
            }
        }
    }
    for r in &rep.summary {
        render_check(&mut out, &r.check_id, r, r.verdict, None);
    }
    out
}

fn provenance(spec: &ExperimentSpec, traj: Option<&Trajectory>) -> String {
    let mut out = String::from("[provenance]\n");
    let h = std::f64::consts::PI / spec.grid_n as f64;
    let _ = writeln!(out, "code_version = {CODE_VERSION}");
    let _ = writeln!(out, "schema_version = {SCHEMA_VERSION}");
    let _ = writeln!(out, "spec_hash = {}", spec_hash(spec));
    let _ = writeln!(out, "grid_n = {}", spec.grid_n);
    let _ = writeln!(out, "h = {}", fmt_f(h));
    let _ = writeln!(out, "scheme = {}", spec.flow.scheme.name());
    if let Some(t) = traj {
        let hist: Vec<String> =
            t.dt_history.iter().map(|(t, dt)| format!("{}:{}", fmt_f(*t), fmt_f(*dt))).collect();
        let _ = writeln!(out, "dt_history = {}", hist.join(", "));
        let _ = writeln!(out, "states = {}", t.states.len());
        let _ = writeln!(out, "t_final = {}", fmt_f(t.last().t));
        match t.converged_at {
            Some(c) => {
                let _ = writeln!(out, "converged_at = {}", fmt_f(c));
            }
            None => {
                let _ = writeln!(out, "converged_at = none");
            }
        }
        for e in &t.events {
            let _ = writeln!(out, "event = {}: {}", fmt_f(e.t), e.message);
        }
    }
    out
}

fn embedded_spec(spec: &ExperimentSpec) -> String {
    let body: String = spec.to_string().lines().map(|l| format!("  {l}\n")).collect();
    format!("\n[spec]\n{body}")
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub timeseries: Option<PathBuf>,
    pub report_path: PathBuf,
    pub trajectory: Option<Trajectory>,
    pub monitors: Option<TrajectoryReport>,
    pub error: Option<Error>,
    pub exit_code: i32,
}

impl RunArtifacts {
    pub fn verdict(&self) -> Option<Verdict> {
        self.monitors.as_ref().map(TrajectoryReport::overall)
    }
}

pub fn render_report(
    spec: &ExperimentSpec,
    traj: Option<&Trajectory>,
    rep: Option<&TrajectoryReport>,
    error: Option<&Error>,
    exit_code: i32,
) -> String {
    let mut out = String::from("# krflow run report\n");
    out.push_str(&provenance(spec, traj));
    out.push_str(&embedded_spec(spec));
    let _ = writeln!(out, "\n[summary]");
    let _ = writeln!(out, "exit_code = {exit_code}");
    if let Some(e) = error {
        let _ = writeln!(out, "error = {e}");
        let _ = writeln!(out, "error_detail = {:?}", e.root());
    }
    if let Some(r) = rep {
        let _ = writeln!(out, "overall = {}", r.overall());
        let opt = |v: Option<f64>| v.map_or("none".to_string(), fmt_f);
        let _ = writeln!(out, "decay_rate_u_minus_a = {}", opt(r.decay_rate_u));
        let _ = writeln!(out, "decay_rate_y = {}", opt(r.decay_rate_y));
        let _ = writeln!(out, "diameter_max = {}", fmt_f(r.diameter_max));
        if let Some((lo, hi)) = r.k_eff_range {
            let _ = writeln!(out, "K_eff_range = {}, {}", fmt_f(lo), fmt_f(hi));
        }
        if let Some((lo, hi)) = r.c_eff_range {
            let _ = writeln!(out, "C_eff_range = {}, {}", fmt_f(lo), fmt_f(hi));
        }
        for e in &r.errors {
            let _ = writeln!(out, "monitor_error = {e}");
        }
        out.push_str(&render_checks(r));
    }
    out
}

/// Build the initial metric, integrate, evaluate every registered check and
/// write the artifacts. Module errors are carried in the artifacts, not
/// returned; only artifact I/O fails the call.
pub fn run_scenario(spec: &ExperimentSpec) -> Result<RunArtifacts> {
    let dir = spec.output_dir.clone();
    std::fs::create_dir_all(&dir)
        .map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let outcome = Grid::new(spec.grid_n)
        .and_then(|g| spec.scenario.build(g, spec.normalize))
        .and_then(|m| run(&spec.flow, &m));
    let report_path = dir.join("report.txt");
    let mut art = RunArtifacts {
        dir: dir.clone(),
        timeseries: None,
        report_path: report_path.clone(),
        trajectory: None,
        monitors: None,
        error: None,
        exit_code: EXIT_OK,
    };
    match outcome {
        Ok(traj) => {
            let mut params = spec.monitors.clone();
            params.class_tol = spec.flow.class_tol;
            let rep = evaluate(&traj.states, &params);
            art.exit_code = if rep.overall() == Verdict::Fail {
                EXIT_FAIL
            } else if !rep.errors.is_empty() {
                EXIT_NUMERICAL
            } else {
                EXIT_OK
            };
            let ts = dir.join("timeseries.csv");
            write_timeseries(&ts, &traj.states)?;
            art.timeseries = Some(ts);
            art.trajectory = Some(traj);
            art.monitors = Some(rep);
        }
        Err(e) => {
            art.exit_code = exit_code_for(&e);
            art.error = Some(e);
        }
    }
    let text = render_report(
        spec,
        art.trajectory.as_ref(),
        art.monitors.as_ref(),
        art.error.as_ref(),
        art.exit_code,
    );
    std::fs::write(&report_path, text)?;
    Ok(art)
}

/// Linear interpolation of a state quantity at time `t`.
pub fn value_at(states: &[FlowState], t: f64, f: impl Fn(&FlowState) -> f64) -> Option<f64> {
    let i = states.iter().position(|s| s.t >= t - 1e-12)?;
    if i == 0 || (states[i].t - t).abs() <= 1e-12 {
        return Some(f(&states[i]));
    }
    let (a, b) = (&states[i - 1], &states[i]);
    let w = (t - a.t) / (b.t - a.t);
    Some((1.0 - w) * f(a) + w * f(b))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    /// The swept value as written in the spec.
    pub value: f64,
    pub amplitude: Option<f64>,
    pub epsilon_calabi: Option<f64>,
    pub grad_u_t0: Option<f64>,
    /// `‖∇u‖_{C⁰}(t₀) / ε_Calabi^{1/4}`.
    pub ratio: Option<f64>,
    pub k_eff: Option<f64>,
    pub c_eff: Option<f64>,
    pub c8_eff: Option<f64>,
    pub verdict: Option<Verdict>,
    pub error: Option<String>,
    pub exit_code: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Regression {
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
}

/// Least-squares fit of `ln y` against `ln x`.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Option<Regression> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len();
    if n < 2 {
        return None;
    }
    let lx: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ly: Vec<f64> = pts.iter().map(|p| p.1).collect();
    // log_linear_rate returns the negated slope.
    let slope = -log_linear_rate(&lx, &ly.iter().map(|v| v.exp()).collect::<Vec<_>>())?;
    let mx = lx.iter().sum::<f64>() / n as f64;
    let my = ly.iter().sum::<f64>() / n as f64;
    Some(Regression { slope, intercept: my - slope * mx, points: n })
}

/// `max/min` of the finite positive entries.
pub fn spread(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().filter(|v| v.is_finite() && *v > 0.0).collect();
    if v.is_empty() {
        return None;
    }
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(0.0, f64::max);
    Some(hi / lo)
}

#[derive(Debug, Clone)]
pub struct SweepArtifacts {
    pub dir: PathBuf,
    pub table: PathBuf,
    pub report_path: PathBuf,
    pub points: Vec<SweepPoint>,
    pub regression: Option<Regression>,
    pub ratio_spread: Option<f64>,
    pub k_eff_spread: Option<f64>,
    pub c_eff_spread: Option<f64>,
    pub c8_spread: Option<f64>,
    pub exit_code: i32,
}

impl SweepArtifacts {
    pub fn successes(&self) -> usize {
        self.points.iter().filter(|p| p.error.is_none()).count()
    }

    pub fn failures(&self) -> usize {
        self.points.len() - self.successes()
    }
}

fn sweep_point(spec: &ExperimentSpec, index: usize, value: f64) -> SweepPoint {
    let mut point = SweepPoint {
        index,
        value,
        amplitude: None,
        epsilon_calabi: None,
        grad_u_t0: None,
        ratio: None,
        k_eff: None,
        c_eff: None,
        c8_eff: None,
        verdict: None,
        error: None,
        exit_code: EXIT_OK,
    };
    let amplitude = match spec.sweep_variable {
        SweepVariable::Amplitude => Ok(value),
        SweepVariable::Calabi => Grid::new(spec.grid_n)
            .and_then(|g| spec.scenario.amplitude_for_calabi(&g, value)),
    };
    let amp = match amplitude {
        Ok(a) => a,
        Err(e) => {
            point.exit_code = exit_code_for(&e);
            point.error = Some(e.to_string());
            return point;
        }
    };
    point.amplitude = Some(amp);
    let mut sub = spec.clone();
    sub.sweep = None;
    sub.scenario = spec.scenario.with_amplitude(amp).expect("checked by sweep_epsilon");
    sub.output_dir = spec.output_dir.join(format!("point_{index:03}"));
    let art = match run_scenario(&sub) {
        Ok(a) => a,
        Err(e) => {
            point.exit_code = exit_code_for(&e);
            point.error = Some(e.to_string());
            return point;
        }
    };
    point.exit_code = art.exit_code;
    if let Some(e) = &art.error {
        point.error = Some(e.to_string());
        return point;
    }
    let traj = art.trajectory.as_ref().expect("successful run has a trajectory");
    let rep = art.monitors.as_ref().expect("successful run has monitors");
    point.verdict = Some(rep.overall());
    let first = &traj.states[0];
    let eps_c = calabi_energy(&first.metric);
    point.epsilon_calabi = Some(eps_c);
    let t0 = spec.monitors.t0;
    // A run that converged before t₀ keeps its last value.
    let g = value_at(&traj.states, t0, |s| s.funcs.grad_u_c0)
        .or_else(|| (traj.converged_at.is_some()).then(|| traj.last().funcs.grad_u_c0));
    point.grad_u_t0 = g;
    point.ratio = g.filter(|_| eps_c > 0.0).map(|g| g / eps_c.powf(0.25));
    let first_aux = |id: &str, key: &str| {
        rep.series(id).and_then(|r| r.first()).and_then(|r| r.aux_value(key))
    };
    point.k_eff = first_aux("c0_vs_y", "K_eff");
    point.c_eff = first_aux("gradient_estimate", "C_eff");
    point.c8_eff = rep.find("z_derivative").and_then(|r| r.aux_value("C8_eff"));
    point
}

fn opt_str(v: Option<f64>) -> String {
    v.map_or(String::new(), fmt_f)
}

/// One run per swept value, isolated from each other's failures, followed
/// by the scaling regression and stability tables.
pub fn sweep_epsilon(spec: &ExperimentSpec) -> Result<SweepArtifacts> {
    let values = match &spec.sweep {
        Some(v) if !v.is_empty() => v.clone(),
        _ => {
            return Err(Error::Config { line: 0, key: "sweep".into(), message: "sweep list is empty".into() })
        }
    };
    if spec.scenario.with_amplitude(0.0).is_none() {
        return Err(Error::Config {
            line: 0,
            key: "scenario".into(),
            message: format!("scenario {} has no amplitude to sweep", spec.scenario),
        });
    }
    let dir = spec.output_dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(spec))
        .build()
        .map_err(|e| Error::Io(e.to_string()))?;
    let points: Vec<SweepPoint> = pool.install(|| {
        values.par_iter().enumerate().map(|(i, v)| sweep_point(spec, i, *v)).collect()
    });

    let ok: Vec<&SweepPoint> = points.iter().filter(|p| p.error.is_none()).collect();
    let regression = if ok.len() >= 2 {
        let x: Vec<f64> = ok.iter().map(|p| p.epsilon_calabi.unwrap_or(0.0)).collect();
        let y: Vec<f64> = ok.iter().map(|p| p.grad_u_t0.unwrap_or(0.0)).collect();
        loglog_fit(&x, &y)
    } else {
        None
    };
    let ratio_spread = spread(points.iter().map(|p| p.ratio));
    let k_eff_spread = spread(points.iter().map(|p| p.k_eff));
    let c_eff_spread = spread(points.iter().map(|p| p.c_eff));
    let c8_spread = spread(points.iter().map(|p| p.c8_eff));
    let exit_code = if points.iter().any(|p| p.exit_code == EXIT_FAIL) {
        EXIT_FAIL
    } else {
        points.iter().map(|p| p.exit_code).max().unwrap_or(EXIT_OK)
    };

    let table = dir.join("sweep.csv");
    let io = |e: csv::Error| Error::Io(format!("{}: {e}", table.display()));
    let mut w = csv::Writer::from_path(&table).map_err(io)?;
    w.write_record([
        "index", "value", "amplitude", "epsilon_calabi", "grad_u_t0", "ratio", "K_eff", "C_eff",
        "C8_eff", "verdict", "error",
    ])
    .map_err(io)?;
    for p in &points {
        w.write_record([
            p.index.to_string(),
            fmt_f(p.value),
            opt_str(p.amplitude),
            opt_str(p.epsilon_calabi),
            opt_str(p.grad_u_t0),
            opt_str(p.ratio),
            opt_str(p.k_eff),
            opt_str(p.c_eff),
            opt_str(p.c8_eff),
            p.verdict.map_or(String::new(), |v| v.to_string()),
            p.error.clone().unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    w.flush()?;

    let mut out = String::from("# krflow sweep report\n");
    out.push_str(&provenance(spec, None));
    let _ = writeln!(out, "workers = {}", worker_count(spec));
    out.push_str(&embedded_spec(spec));
    let _ = writeln!(out, "\n[sweep]");
    let _ = writeln!(out, "exit_code = {exit_code}");
    let _ = writeln!(out, "points = {}", points.len());
    let _ = writeln!(out, "successes = {}", ok.len());
    let _ = writeln!(out, "failures = {}", points.len() - ok.len());
    let _ = writeln!(out, "t0 = {}", fmt_f(spec.monitors.t0));
    match &regression {
        Some(r) => {
            let _ = writeln!(out, "slope = {}", fmt_f(r.slope));
            let _ = writeln!(out, "intercept = {}", fmt_f(r.intercept));
            let _ = writeln!(out, "regression_points = {}", r.points);
        }
        None => {
            let _ = writeln!(out, "regression = skipped");
        }
    }
    let mut line = |k: &str, v: Option<f64>| {
        let _ = writeln!(out, "{k} = {}", v.map_or("none".into(), fmt_f));
    };
    line("ratio_max_over_min", ratio_spread);
    line("K_eff_max_over_min", k_eff_spread);
    line("C_eff_max_over_min", c_eff_spread);
    line("C8_eff_max_over_min", c8_spread);
    for p in &points {
        let _ = writeln!(
            out,
            "\n[point.{:03}]\nvalue = {}\namplitude = {}\nepsilon_calabi = {}\ngrad_u_t0 = {}\nratio = {}\nK_eff = {}\nC_eff = {}\nC8_eff = {}\nverdict = {}\nexit_code = {}",
            p.index,
            fmt_f(p.value),
            opt_str(p.amplitude),
            opt_str(p.epsilon_calabi),
            opt_str(p.grad_u_t0),
            opt_str(p.ratio),
            opt_str(p.k_eff),
            opt_str(p.c_eff),
            opt_str(p.c8_eff),
            p.verdict.map_or("none".into(), |v| v.to_string()),
            p.exit_code,
        );
        if let Some(e) = &p.error {
            let _ = writeln!(out, "error = {e}");
        }
    }
    let report_path = dir.join("sweep_report.txt");
    std::fs::write(&report_path, out)?;
    Ok(SweepArtifacts {
        dir,
        table,
        report_path,
        points,
        regression,
        ratio_spread,
        k_eff_spread,
        c_eff_spread,
        c8_spread,
        exit_code,
    })
}

/// Integrate to `t` and return the state there (or the converged state if
/// the run stopped earlier).
pub fn state_at(spec: &ExperimentSpec, t: f64) -> Result<FlowState> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("time {t} must be finite and nonnegative")));
    }
    let grid = Grid::new(spec.grid_n)?;
    let metric = spec.scenario.build(grid, spec.normalize)?;
    let mut config = spec.flow.clone();
    config.t_end = t;
    config.sample_dt = 0.0;
    let traj = run(&config, &metric)?;
    Ok(traj.states.last().expect("at least the initial state").clone())
}

/// Single-state monitor evaluation at time `t`.
pub fn check_at(spec: &ExperimentSpec, t: f64) -> Result<(FlowState, TrajectoryReport)> {
    let state = state_at(spec, t)?;
    let mut params = spec.monitors.clone();
    params.class_tol = spec.flow.class_tol;
    let rep = evaluate(std::slice::from_ref(&state), &params);
    Ok((state, rep))
}

pub fn render_check_at(state: &FlowState, rep: &TrajectoryReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "t = {}", fmt_f(state.t));
    for (k, v) in TIMESERIES_COLUMNS.iter().zip(timeseries_row(state)) {
        let _ = writeln!(out, "state.{k} = {v}");
    }
    let _ = writeln!(out, "overall = {}", rep.overall());
    for e in &rep.errors {
        let _ = writeln!(out, "monitor_error = {e}");
    }
    out.push_str(&render_checks(rep));
    out
}

/// Eigenvalue listing of a state's weighted spectrum.
pub fn render_spectrum(state: &FlowState) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "t = {}", fmt_f(state.t));
    let _ = writeln!(out, "lambda_g = {}", fmt_f(state.lambda_g));
    let band: Vec<String> = state.holo_band.iter().map(|v| fmt_f(*v)).collect();
    let _ = writeln!(out, "holo_band = {}", band.join(", "));
    let _ = writeln!(out, "m,k,lambda");
    for e in &state.spectrum.entries {
        let _ = writeln!(out, "{},{},{}", e.m, e.k, fmt_f(e.lambda));
    }
    out
}
