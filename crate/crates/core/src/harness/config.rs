//! Experiment files.
//!
//! Grammar, one entry per line:
//!
//! ```text
//! # comment
//! key = value
//! [section]
//! key = a, b, c            # lists are comma separated
//! sweep = logspace(1e-6, 1e-2, 9)
//! ```
//!
//! Several `key = value` pairs may share a line when separated by commas
//! (`scenario = round, grid_n = 256`). Top-level keys: `scenario`, `grid_n`,
//! `output_dir`, `normalize`, `sweep`, `sweep_variable`, `workers`. Section
//! `[flow]` holds integrator settings and `[monitors]` the check list and
//! gate parameters. Optional values accept `none`.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::flow::{FlowConfig, Scheme};
use crate::monitors::{MonitorParams, CHECK_IDS};

use super::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    /// Sweep values replace the preset amplitude.
    Amplitude,
    /// Sweep values are target Calabi energies `V⁻¹∫(K − 1)²dv`; the
    /// amplitude is solved for.
    Calabi,
}

impl SweepVariable {
    fn name(self) -> &'static str {
        match self {
            SweepVariable::Amplitude => "amplitude",
            SweepVariable::Calabi => "calabi",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub grid_n: usize,
    /// Rescale preset profiles to volume 4π (custom profiles never are).
    pub normalize: bool,
    pub flow: FlowConfig,
    pub monitors: MonitorParams,
    pub sweep: Option<Vec<f64>>,
    pub sweep_variable: SweepVariable,
    pub workers: Option<usize>,
    pub output_dir: PathBuf,
}

impl ExperimentSpec {
    pub fn new(scenario: Scenario) -> Self {
        let flow = FlowConfig::default();
        let monitors = MonitorParams { class_tol: flow.class_tol, ..Default::default() };
        ExperimentSpec {
            scenario,
            grid_n: 256,
            normalize: true,
            flow,
            monitors,
            sweep: None,
            sweep_variable: SweepVariable::Amplitude,
            workers: None,
            output_dir: PathBuf::from("krflow_out"),
        }
    }
}

fn opt<T: fmt::Debug>(v: &Option<T>) -> String {
    v.as_ref().map_or("none".into(), |x| format!("{x:?}"))
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

impl fmt::Display for ExperimentSpec {
    /// Canonical form with every default written out; parses back to an
    /// equal spec.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        let c = &self.flow;
        let m = &self.monitors;
        writeln!(s, "scenario = {}", self.scenario)?;
        writeln!(s, "grid_n = {}", self.grid_n)?;
        writeln!(s, "normalize = {}", self.normalize)?;
        writeln!(s, "output_dir = {}", self.output_dir.display())?;
        writeln!(s, "sweep = {}", self.sweep.as_ref().map_or("none".into(), |v| list(v)))?;
        writeln!(s, "sweep_variable = {}", self.sweep_variable.name())?;
        writeln!(s, "workers = {}", opt(&self.workers))?;
        writeln!(s, "\n[flow]")?;
        writeln!(s, "dt = {}", opt(&c.dt_init))?;
        writeln!(s, "t_end = {:?}", c.t_end)?;
        writeln!(s, "scheme = {}", c.scheme.name())?;
        writeln!(s, "vol_tol = {:?}", c.vol_tol)?;
        writeln!(s, "class_tol = {:?}", c.class_tol)?;
        writeln!(s, "potential_tol = {:?}", c.potential_tol)?;
        writeln!(s, "sample_dt = {:?}", c.sample_dt)?;
        writeln!(s, "converge_tol = {:?}", c.converge_tol)?;
        writeln!(s, "m_max = {}", c.m_max)?;
        writeln!(s, "k_per_mode = {}", c.k_per_mode)?;
        writeln!(s, "band_tol = {}", opt(&c.band_tol))?;
        writeln!(s, "\n[monitors]")?;
        writeln!(s, "checks = {}", m.checks.join(", "))?;
        writeln!(s, "delta = {}", opt(&m.delta))?;
        writeln!(s, "lambda = {}", opt(&m.lambda_curv))?;
        writeln!(s, "diameter = {}", opt(&m.diameter))?;
        writeln!(s, "rho = {:?}", m.rho)?;
        writeln!(s, "l = {}", opt(&m.l))?;
        writeln!(s, "phi0 = {:?}", m.phi0)?;
        writeln!(s, "t0 = {:?}", m.t0)?;
        writeln!(s, "branch = {}, {}", m.branch.0, m.branch.1)?;
        f.write_str(&s)
    }
}

struct Entry<'a> {
    line: usize,
    section: &'a str,
    key: &'a str,
    value: &'a str,
}

fn err(line: usize, key: &str, message: impl Into<String>) -> Error {
    Error::Config { line, key: key.into(), message: message.into() }
}

fn is_key(s: &str) -> bool {
    let s = s.trim();
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Split `a = 1, b = 2` into pairs; commas inside list values stay put.
fn split_pairs(line: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut depth = 0i32;
    for (i, ch) in line.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                let rest = &line[i + 1..];
                if let Some(eq) = rest.find('=') {
                    if is_key(&rest[..eq]) {
                        out.push(&line[start..i]);
                        start = i + 1;
                    }
                }
            }
            _ => {}
        }
    }
    out.push(&line[start..]);
    out
}

fn tokenize(text: &str) -> Result<Vec<Entry<'_>>> {
    let mut section = "";
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err(line_no, line, "unterminated section header"))?
                .trim();
            if !matches!(name, "flow" | "monitors") {
                return Err(err(line_no, name, "unknown section"));
            }
            section = name;
            continue;
        }
        for pair in split_pairs(line) {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| err(line_no, pair.trim(), "expected `key = value`"))?;
            entries.push(Entry { line: line_no, section, key: key.trim(), value: value.trim() });
        }
    }
    Ok(entries)
}

fn parse_f64(e: &Entry) -> Result<f64> {
    e.value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| err(e.line, e.key, format!("expected a finite number, got `{}`", e.value)))
}

fn parse_pos(e: &Entry) -> Result<f64> {
    let v = parse_f64(e)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(err(e.line, e.key, "must be positive"))
    }
}

fn parse_usize(e: &Entry) -> Result<usize> {
    e.value
        .parse::<usize>()
        .map_err(|_| err(e.line, e.key, format!("expected a nonnegative integer, got `{}`", e.value)))
}

fn parse_opt<T>(e: &Entry, f: impl Fn(&Entry) -> Result<T>) -> Result<Option<T>> {
    if e.value.eq_ignore_ascii_case("none") {
        Ok(None)
    } else {
        f(e).map(Some)
    }
}

fn parse_bool(e: &Entry) -> Result<bool> {
    match e.value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(err(e.line, e.key, "expected true or false")),
    }
}

/// `logspace(a, b, n)`: `n` points from `a` to `b`, evenly spaced in `ln`.
pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.log10(), b.log10());
    (0..n)
        .map(|i| {
            if i == 0 {
                a
            } else if i == n - 1 {
                b
            } else {
                10f64.powf(la + (lb - la) * i as f64 / (n - 1) as f64)
            }
        })
        .collect()
}

fn parse_list(e: &Entry) -> Result<Vec<f64>> {
    let v = e.value;
    if let Some(inner) = v.strip_prefix("logspace(").and_then(|s| s.strip_suffix(')')) {
        let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(err(e.line, e.key, "logspace takes (start, stop, count)"));
        }
        let num = |s: &str| s.parse::<f64>().ok().filter(|x| *x > 0.0 && x.is_finite());
        let (Some(a), Some(b), Ok(n)) = (num(parts[0]), num(parts[1]), parts[2].parse::<usize>())
        else {
            return Err(err(e.line, e.key, "logspace needs positive endpoints and a count"));
        };
        if n == 0 {
            return Err(err(e.line, e.key, "logspace count must be at least 1"));
        }
        return Ok(logspace(a, b, n));
    }
    let out: Option<Vec<f64>> =
        v.split(',').map(|s| s.trim().parse::<f64>().ok().filter(|x| x.is_finite())).collect();
    match out {
        Some(list) if !list.is_empty() => Ok(list),
        _ => Err(err(e.line, e.key, format!("expected a comma-separated list of numbers, got `{v}`"))),
    }
}

pub fn parse_spec(text: &str) -> Result<ExperimentSpec> {
    let entries = tokenize(text)?;
    let mut seen: Vec<(String, usize)> = Vec::new();
    let mut scenario = None;
    let mut spec = ExperimentSpec::new(Scenario::Round);
    for e in &entries {
        let full = if e.section.is_empty() {
            e.key.to_string()
        } else {
            format!("{}.{}", e.section, e.key)
        };
        if let Some((_, prev)) = seen.iter().find(|(k, _)| *k == full) {
            return Err(err(e.line, e.key, format!("duplicate key (first set on line {prev})")));
        }
        seen.push((full, e.line));
        let c = &mut spec.flow;
        let m = &mut spec.monitors;
        match (e.section, e.key) {
            ("", "scenario") => {
                scenario = Some(e.value.parse::<Scenario>().map_err(|msg| err(e.line, e.key, msg))?)
            }
            ("", "grid_n") => {
                spec.grid_n = parse_usize(e)?;
                if spec.grid_n < 16 {
                    return Err(err(e.line, e.key, "grid needs at least 16 nodes"));
                }
            }
            ("", "normalize") => spec.normalize = parse_bool(e)?,
            ("", "output_dir") => spec.output_dir = PathBuf::from(e.value),
            ("", "sweep") => spec.sweep = parse_opt(e, parse_list)?,
            ("", "sweep_variable") => {
                spec.sweep_variable = match e.value {
                    "amplitude" => SweepVariable::Amplitude,
                    "calabi" => SweepVariable::Calabi,
                    _ => return Err(err(e.line, e.key, "expected amplitude or calabi")),
                }
            }
            ("", "workers") => {
                spec.workers = parse_opt(e, parse_usize)?;
                if spec.workers == Some(0) {
                    return Err(err(e.line, e.key, "worker count must be at least 1"));
                }
            }
            ("flow", "dt") => c.dt_init = parse_opt(e, parse_pos)?,
            ("flow", "t_end") => {
                c.t_end = parse_f64(e)?;
                if c.t_end < 0.0 {
                    return Err(err(e.line, e.key, "must be nonnegative"));
                }
            }
            ("flow", "scheme") => {
                c.scheme = Scheme::parse(e.value)
                    .ok_or_else(|| err(e.line, e.key, "expected rk4 or semi_implicit"))?
            }
            ("flow", "vol_tol") => c.vol_tol = parse_pos(e)?,
            ("flow", "class_tol") => c.class_tol = parse_pos(e)?,
            ("flow", "potential_tol") => c.potential_tol = parse_pos(e)?,
            ("flow", "sample_dt") => {
                c.sample_dt = parse_f64(e)?;
                if c.sample_dt < 0.0 {
                    return Err(err(e.line, e.key, "must be nonnegative"));
                }
            }
            ("flow", "converge_tol") => c.converge_tol = parse_pos(e)?,
            ("flow", "m_max") => c.m_max = parse_usize(e)?,
            ("flow", "k_per_mode") => c.k_per_mode = parse_usize(e)?,
            ("flow", "band_tol") => c.band_tol = parse_opt(e, parse_pos)?,
            ("monitors", "checks") => {
                let ids: Vec<String> = if e.value == "all" {
                    CHECK_IDS.iter().map(|s| s.to_string()).collect()
                } else {
                    e.value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
                };
                if let Some(bad) = ids.iter().find(|id| !CHECK_IDS.contains(&id.as_str())) {
                    return Err(err(e.line, e.key, format!("unknown check id `{bad}`")));
                }
                m.checks = ids;
            }
            ("monitors", "delta") => m.delta = parse_opt(e, parse_pos)?,
            ("monitors", "lambda") => m.lambda_curv = parse_opt(e, parse_pos)?,
            ("monitors", "diameter") => m.diameter = parse_opt(e, parse_pos)?,
            ("monitors", "rho") => m.rho = parse_pos(e)?,
            ("monitors", "l") => m.l = parse_opt(e, parse_pos)?,
            ("monitors", "phi0") => {
                m.phi0 = parse_f64(e)?;
                if m.phi0 < 1.0 {
                    return Err(err(e.line, e.key, "Φ₀ must be at least 1"));
                }
            }
            ("monitors", "t0") => m.t0 = parse_pos(e)?,
            ("monitors", "branch") => {
                let parts: Vec<&str> = e.value.split(',').map(str::trim).collect();
                let parsed = match parts.as_slice() {
                    [a, b] => a.parse::<i32>().ok().zip(b.parse::<usize>().ok()),
                    _ => None,
                };
                m.branch = parsed.ok_or_else(|| err(e.line, e.key, "expected `m, k`"))?;
            }
            (section, key) => {
                let name = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
                return Err(err(e.line, &name, "unknown key"));
            }
        }
    }
    spec.scenario = scenario.ok_or_else(|| err(0, "scenario", "missing required key"))?;
    if spec.flow.m_max < 2 || spec.flow.k_per_mode < 3 {
        return Err(err(0, "flow.m_max", "spectrum needs m_max ≥ 2 and k_per_mode ≥ 3"));
    }
    spec.monitors.class_tol = spec.flow.class_tol;
    Ok(spec)
}

pub fn load_spec(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_spec(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_file_fills_defaults() {
        let spec = parse_spec("scenario=round, grid_n=256").unwrap();
        let mut expected = ExperimentSpec::new(Scenario::Round);
        expected.grid_n = 256;
        assert_eq!(spec, expected);
        assert_eq!(spec.flow, FlowConfig::default());
        assert!(spec.to_string().contains("t_end = 5.0"));
    }

    #[test]
    fn unknown_key_names_the_key() {
        let e = parse_spec("scenario = round\n[flow]\nbogus = 3").unwrap_err();
        match e {
            Error::Config { line, key, .. } => {
                assert_eq!(line, 3);
                assert_eq!(key, "flow.bogus");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_spec("grid_n = 64"), Err(Error::Config { .. })));
        assert!(matches!(
            parse_spec("scenario = round\n[monitors]\nchecks = nope"),
            Err(Error::Config { .. })
        ));
        assert!(matches!(parse_spec("scenario = legendre_bump(1, 0.1)"), Err(Error::Config { .. })));
    }

    #[test]
    fn logspace_sweep_has_nine_points() {
        let spec = parse_spec("scenario = legendre_bump(2, 1e-3)\nsweep = logspace(1e-6, 1e-2, 9)")
            .unwrap();
        let sweep = spec.sweep.unwrap();
        assert_eq!(sweep.len(), 9);
        assert_eq!(sweep[0], 1e-6);
        assert_eq!(sweep[8], 1e-2);
        assert!((sweep[4] - 1e-4).abs() < 1e-18);
        assert!((sweep[1] / sweep[0] - 10f64.sqrt()).abs() < 1e-12);
    }

    fn arb_scenario() -> impl Strategy<Value = Scenario> {
        prop_oneof![
            Just(Scenario::Round),
            (2usize..8, -1.0f64..1.0).prop_map(|(l, eps)| Scenario::LegendreBump { l, eps }),
            (any::<u64>(), 0.0f64..3.0, 0.0f64..0.5)
                .prop_map(|(seed, decay, amplitude)| Scenario::MultiMode { seed, decay, amplitude }),
            "[a-z0-9_/.]{1,20}".prop_map(|p| Scenario::CustomW { path: PathBuf::from(p) }),
        ]
    }

    proptest! {
        #[test]
        fn specs_round_trip(
            scenario in arb_scenario(),
            grid_n in 16usize..2048,
            t_end in 0.0f64..20.0,
            dt in proptest::option::of(1e-8f64..1e-2),
            sweep in proptest::option::of(prop::collection::vec(1e-8f64..1.0, 1..10)),
            delta in proptest::option::of(1e-3f64..2.0),
            phi0 in 1.0f64..10.0,
            branch in (-2i32..3, 0usize..3),
            semi in any::<bool>(),
            checks in prop::sample::subsequence(CHECK_IDS.to_vec(), 0..CHECK_IDS.len()),
        ) {
            let mut spec = ExperimentSpec::new(scenario);
            spec.grid_n = grid_n;
            spec.flow.t_end = t_end;
            spec.flow.dt_init = dt;
            spec.flow.scheme = if semi { Scheme::SemiImplicit } else { Scheme::Rk4 };
            spec.sweep = sweep;
            spec.monitors.delta = delta;
            spec.monitors.phi0 = phi0;
            spec.monitors.branch = branch;
            spec.monitors.checks = checks.iter().map(|s| s.to_string()).collect();
            let text = spec.to_string();
            let back = parse_spec(&text).unwrap();
            prop_assert_eq!(&back, &spec);
            prop_assert_eq!(back.to_string(), text);
        }
    }
}
