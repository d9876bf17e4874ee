//! Normalized Kähler-Ricci flow in the conformal gauge.
//!
//! On a complex curve `Ric = K g`, so `∂_t g = −Ric + g` becomes
//! `∂_t w = ½(1 − K)`. The relative Kähler potential is co-evolved by
//! `∂_t φ = u − a`; since `i∂∂̄φ = ½(Δ₀φ)ω₀`, the class identity reads
//! `e^{2w(t)} = e^{2w(0)} + ½Δ₀φ(t)`. With the finite-volume operators this
//! identity, Gauss–Bonnet and `dV/dt = V − 4π` hold exactly in semi-discrete
//! form, so their residuals measure time-stepping error and roundoff alone.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{volume, ConformalMetric, Grid, ScalarField, FOUR_PI};
use crate::potential::{potential_kernel, solve_ricci_potential, FunctionalBundle, RicciPotential};
use crate::spectral::{default_band_tol, lambda_second, weighted_spectrum, Spectrum};
use crate::tridiag;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Classical RK4 on the joint `(w, φ)` system.
    Rk4,
    /// Backward Euler in the frozen-coefficient diffusion `½e^{-2w}Δ₀`,
    /// followed by a constant shift restoring `V = 4π`.
    SemiImplicit,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Rk4 => "rk4",
            Scheme::SemiImplicit => "semi_implicit",
        }
    }

    pub fn parse(s: &str) -> Option<Scheme> {
        match s {
            "rk4" => Some(Scheme::Rk4),
            "semi_implicit" => Some(Scheme::SemiImplicit),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    /// Largest step; `None` uses [`stable_dt`] of the initial metric.
    pub dt_init: Option<f64>,
    pub t_end: f64,
    pub scheme: Scheme,
    pub vol_tol: f64,
    pub class_tol: f64,
    pub potential_tol: f64,
    /// Always true: `u` is re-solved from `w` at every stage.
    pub resolve_u_every_step: bool,
    /// Spacing of recorded states; `0` records every step.
    pub sample_dt: f64,
    pub converge_tol: f64,
    pub m_max: usize,
    pub k_per_mode: usize,
    /// Holomorphic band half-width; `None` uses `50 h²`.
    pub band_tol: Option<f64>,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            dt_init: None,
            t_end: 5.0,
            scheme: Scheme::Rk4,
            vol_tol: 1e-9,
            class_tol: 1e-6,
            potential_tol: 1e-10,
            resolve_u_every_step: true,
            sample_dt: 0.01,
            converge_tol: 1e-12,
            m_max: 2,
            k_per_mode: 3,
            band_tol: None,
        }
    }
}

/// Potential tolerance for Runge–Kutta stages (volume defect up to 10⁻³).
const STAGE_TOL: f64 = 1e-4;

/// Step halvings tried by [`Flow::advance_to`] before giving up.
pub const MAX_HALVINGS: usize = 12;

/// `¼ h² min e^{2w}`, a quarter of the explicit diffusion limit.
pub fn stable_dt(metric: &ConformalMetric) -> f64 {
    let h = metric.grid().spacing();
    let min_density = metric.w().iter().fold(f64::INFINITY, |m, w| m.min((2.0 * w).exp()));
    0.25 * h * h * min_density
}

/// `∂_t w = ½(1 − K)`.
pub fn velocity(metric: &ConformalMetric) -> ScalarField {
    let lap = metric.grid().laplacian(metric.w());
    let vals = metric
        .w()
        .iter()
        .zip(&lap)
        .map(|(w, l)| 0.5 * (1.0 - (-2.0 * w).exp() * (1.0 - l)))
        .collect();
    ScalarField::new(metric.grid().clone(), vals).expect("grid-sized field")
}

/// The initial metric and its potential, shared by every state of a run.
#[derive(Debug, Clone)]
pub struct Origin {
    pub metric: ConformalMetric,
    pub potential: RicciPotential,
}

#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    /// Step size that produced this state (0 for the initial state).
    pub dt: f64,
    pub metric: ConformalMetric,
    pub potential: RicciPotential,
    pub funcs: FunctionalBundle,
    pub phi: ScalarField,
    pub lambda_g: f64,
    pub holo_band: Vec<f64>,
    pub spectrum: Arc<Spectrum>,
    pub origin: Arc<Origin>,
}

impl FlowState {
    pub fn class_residual(&self) -> f64 {
        check_kahler_class(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowEvent {
    pub t: f64,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<FlowState>,
    pub events: Vec<FlowEvent>,
    /// Time at which `‖u − a‖_{C⁰}` dropped below the convergence threshold.
    pub converged_at: Option<f64>,
    /// `(t, dt)` whenever the step size changed.
    pub dt_history: Vec<(f64, f64)>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &FlowState {
        self.states.last().expect("a trajectory holds at least its initial state")
    }
}

struct Rhs {
    dw: Vec<f64>,
    dphi: Vec<f64>,
}

/// Stepper for the joint `(w, φ)` system.
#[derive(Debug, Clone)]
pub struct Flow {
    config: FlowConfig,
    grid: Arc<Grid>,
    w: Vec<f64>,
    phi: Vec<f64>,
    t: f64,
    last_dt: f64,
    dt_max: f64,
    origin: Arc<Origin>,
}

impl Flow {
    pub fn new(config: FlowConfig, initial: &ConformalMetric) -> Result<Self> {
        let potential = solve_ricci_potential(initial, config.potential_tol)?;
        let n = initial.grid().len();
        Ok(Flow {
            grid: initial.grid().clone(),
            w: initial.w().to_vec(),
            phi: vec![0.0; n],
            t: 0.0,
            last_dt: 0.0,
            dt_max: config.dt_init.unwrap_or_else(|| stable_dt(initial)),
            origin: Arc::new(Origin { metric: initial.clone(), potential }),
            config,
        })
    }

    /// Resume stepping from a recorded state.
    pub fn from_state(config: FlowConfig, state: &FlowState) -> Self {
        Flow {
            grid: state.metric.grid().clone(),
            w: state.metric.w().to_vec(),
            phi: state.phi.values().to_vec(),
            t: state.t,
            last_dt: state.dt,
            dt_max: config.dt_init.unwrap_or_else(|| stable_dt(&state.origin.metric)),
            origin: state.origin.clone(),
            config,
        }
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn config(&self) -> &FlowConfig {
        &self.config
    }

    pub fn metric(&self) -> ConformalMetric {
        ConformalMetric::new(self.grid.clone(), self.w.clone()).expect("finite by step checks")
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn origin(&self) -> &Arc<Origin> {
        &self.origin
    }

    /// Largest step: `dt_init`, or [`stable_dt`] of the initial metric.
    pub fn max_dt(&self) -> f64 {
        self.dt_max
    }

    fn rhs(&self, w: &[f64]) -> Result<Rhs> {
        let e2w: Vec<f64> = w.iter().map(|w| (2.0 * w).exp()).collect();
        let lap = self.grid.laplacian(w);
        let dw = (0..w.len()).map(|j| 0.5 * (1.0 - (1.0 - lap[j]) / e2w[j])).collect();
        // Intermediate stages sit off V = 4π by O(dt²); the kernel removes the defect.
        let k = potential_kernel(&self.grid, w, &e2w, self.config.potential_tol.max(STAGE_TOL))?;
        let dphi = k.u.iter().map(|u| u - k.a).collect();
        Ok(Rhs { dw, dphi })
    }

    /// Advance by one step of size `dt`. On error the state is unchanged.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        let (w, phi) = match self.config.scheme {
            Scheme::Rk4 => self.rk4(dt),
            Scheme::SemiImplicit => self.semi_implicit(dt),
        }
        .map_err(|e| e.at(self.t))?;
        if w.iter().chain(&phi).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(w.len()).at(self.t));
        }
        let q = self.grid.quad_weights();
        let vol = 2.0 * std::f64::consts::PI
            * q.iter().zip(&w).map(|(q, w)| q * (2.0 * w).exp()).sum::<f64>();
        let drift = (vol - FOUR_PI).abs() / FOUR_PI;
        if !(drift <= self.config.vol_tol) {
            return Err(Error::StepReject { t: self.t + dt, drift });
        }
        self.w = w;
        self.phi = phi;
        self.t += dt;
        self.last_dt = dt;
        Ok(())
    }

    fn rk4(&self, dt: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.w.len();
        let shifted = |base: &[f64], k: &[f64], c: f64| -> Vec<f64> {
            base.iter().zip(k).map(|(b, k)| b + c * k).collect()
        };
        let k1 = self.rhs(&self.w)?;
        let k2 = self.rhs(&shifted(&self.w, &k1.dw, 0.5 * dt))?;
        let k3 = self.rhs(&shifted(&self.w, &k2.dw, 0.5 * dt))?;
        let k4 = self.rhs(&shifted(&self.w, &k3.dw, dt))?;
        let combine = |y: &[f64], a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
            (0..n).map(|j| y[j] + dt / 6.0 * (a[j] + 2.0 * b[j] + 2.0 * c[j] + d[j])).collect()
        };
        Ok((
            combine(&self.w, &k1.dw, &k2.dw, &k3.dw, &k4.dw),
            combine(&self.phi, &k1.dphi, &k2.dphi, &k3.dphi, &k4.dphi),
        ))
    }

    fn semi_implicit(&self, dt: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.w.len();
        let r = self.rhs(&self.w)?;
        let h = self.grid.spacing();
        let q = self.grid.quad_weights();
        let fs = self.grid.face_sin();
        let mut sub = vec![0.0; n - 1];
        let mut sup = vec![0.0; n - 1];
        let mut diag = vec![1.0; n];
        let mut rhs = vec![0.0; n];
        for j in 0..n {
            let c = dt * 0.5 * (-2.0 * self.w[j]).exp() / (h * q[j]);
            if j > 0 {
                sub[j - 1] = -c * fs[j];
            }
            if j + 1 < n {
                sup[j] = -c * fs[j + 1];
            }
            diag[j] += c * (fs[j] + fs[j + 1]);
            rhs[j] = dt * r.dw[j];
        }
        let delta = tridiag::solve(&sub, &diag, &sup, &rhs).ok_or_else(|| Error::SolveFail {
            mode: 0,
            reason: "singular implicit diffusion system".into(),
        })?;
        let mut w: Vec<f64> = self.w.iter().zip(&delta).map(|(w, d)| w + d).collect();
        // Backward Euler does not conserve volume; project back onto V = 4π.
        let vol = 2.0 * std::f64::consts::PI
            * q.iter().zip(&w).map(|(q, w)| q * (2.0 * w).exp()).sum::<f64>();
        let shift = -0.5 * (vol / FOUR_PI).ln();
        w.iter_mut().for_each(|w| *w += shift);
        let phi = self.phi.iter().zip(&r.dphi).map(|(p, d)| p + dt * d).collect();
        Ok((w, phi))
    }

    /// Advance to `target` in equal steps no larger than [`Flow::max_dt`],
    /// halving the step on rejection. Returns the step size used.
    pub fn advance_to(&mut self, target: f64) -> Result<f64> {
        let span = target - self.t;
        if span <= 0.0 {
            return Ok(0.0);
        }
        let mut count = (span / self.max_dt() - 1e-9).ceil().max(1.0) as usize;
        let saved = (self.w.clone(), self.phi.clone(), self.t, self.last_dt);
        let mut last_reject = None;
        for _ in 0..=MAX_HALVINGS {
            let dt = span / count as f64;
            let mut outcome = Ok(());
            for i in 0..count {
                let step = if i + 1 == count { target - self.t } else { dt };
                if let Err(e) = self.step(step) {
                    outcome = Err(e);
                    break;
                }
            }
            match outcome {
                Ok(()) => {
                    self.t = target;
                    return Ok(dt);
                }
                Err(e @ Error::StepReject { .. }) => {
                    (self.w, self.phi, self.t, self.last_dt) = saved.clone();
                    count *= 2;
                    last_reject = Some(e);
                }
                Err(e) => return Err(e),
            }
        }
        Err(last_reject.expect("loop exits only after a rejection"))
    }

    /// Full diagnostic snapshot of the current state.
    pub fn state(&self) -> Result<FlowState> {
        assemble_state(
            &self.config,
            self.metric(),
            self.phi.clone(),
            self.t,
            self.last_dt,
            self.origin.clone(),
        )
        .map_err(|e| e.at(self.t))
    }
}

fn assemble_state(
    config: &FlowConfig,
    metric: ConformalMetric,
    phi: Vec<f64>,
    t: f64,
    dt: f64,
    origin: Arc<Origin>,
) -> Result<FlowState> {
    let potential = solve_ricci_potential(&metric, config.potential_tol)?;
    let spectrum = weighted_spectrum(&metric, &potential.u, config.m_max, config.k_per_mode)?;
    let band_tol = config.band_tol.unwrap_or_else(|| default_band_tol(metric.grid().spacing()));
    let (lambda_g, holo_band) = lambda_second(&spectrum, band_tol)?;
    let funcs = FunctionalBundle::evaluate(&metric, &potential, lambda_g);
    let phi = ScalarField::new(metric.grid().clone(), phi)?;
    Ok(FlowState {
        t,
        dt,
        metric,
        potential,
        funcs,
        phi,
        lambda_g,
        holo_band,
        spectrum: Arc::new(spectrum),
        origin,
    })
}

/// One step from a recorded state.
pub fn step(state: &FlowState, dt: f64, config: &FlowConfig) -> Result<FlowState> {
    let mut flow = Flow::from_state(config.clone(), state);
    flow.step(dt)?;
    flow.state()
}

/// Integrate from `initial` to `config.t_end`, recording a state every
/// `config.sample_dt`.
pub fn run(config: &FlowConfig, initial: &ConformalMetric) -> Result<Trajectory> {
    let mut flow = Flow::new(config.clone(), initial).map_err(|e| e.at(0.0))?;
    let first = flow.state()?;
    let mut traj = Trajectory {
        converged_at: (first.funcs.c0_u_minus_a < config.converge_tol).then_some(0.0),
        states: vec![first],
        events: Vec::new(),
        dt_history: Vec::new(),
    };
    if traj.converged_at.is_some() {
        traj.events.push(FlowEvent { t: 0.0, message: "converged".into() });
        return Ok(traj);
    }
    let mut last_dt = f64::NAN;
    while flow.time() < config.t_end {
        let dt = if config.sample_dt > 0.0 {
            let target = (flow.time() + config.sample_dt).min(config.t_end);
            // Snap to the end to avoid a sliver interval from rounding.
            let target = if config.t_end - target < 1e-9 * config.sample_dt {
                config.t_end
            } else {
                target
            };
            flow.advance_to(target)?
        } else {
            let dt = flow.max_dt().min(config.t_end - flow.time());
            flow.step(dt)?;
            dt
        };
        if !((dt - last_dt).abs() <= 1e-9 * dt) {
            if last_dt.is_finite() && dt < last_dt * 0.75 {
                traj.events.push(FlowEvent {
                    t: flow.time(),
                    message: format!("step reduced to {dt:e}"),
                });
            }
            traj.dt_history.push((flow.time() - dt, dt));
            last_dt = dt;
        }
        let state = flow.state()?;
        let converged = state.funcs.c0_u_minus_a < config.converge_tol;
        traj.states.push(state);
        if converged {
            traj.converged_at = Some(flow.time());
            traj.events.push(FlowEvent { t: flow.time(), message: "converged".into() });
            break;
        }
    }
    Ok(traj)
}

/// Sup-norm residual of `e^{2w(t)} = e^{2w(0)} + ½Δ₀φ(t)`.
pub fn check_kahler_class(state: &FlowState) -> f64 {
    let grid = state.metric.grid();
    let lap = grid.laplacian(state.phi.values());
    let w0 = state.origin.metric.w();
    (0..grid.len())
        .map(|j| ((2.0 * state.metric.w()[j]).exp() - (2.0 * w0[j]).exp() - 0.5 * lap[j]).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct LogDet {
    /// `F = log(det g(t)/det g(0)) = 2(w(t) − w(0))`.
    pub f: ScalarField,
    /// `c(t)` with `e^{c} = V⁻¹∫e^{-φ−u(0)}dv₀`.
    pub c: f64,
    /// Sup-norm residual of `F = u(t) − u(0) − φ(t) − c(t)`.
    pub residual: f64,
}

pub fn log_det_bookkeeping(state: &FlowState) -> LogDet {
    let origin = &state.origin;
    let w0 = origin.metric.w();
    let u0 = &origin.potential.u;
    let phi = state.phi.values();
    let grid = state.metric.grid();
    let f: Vec<f64> = state.metric.w().iter().zip(w0).map(|(w, w0)| 2.0 * (w - w0)).collect();
    let integrand: Vec<f64> = phi.iter().zip(u0).map(|(p, u)| (-p - u).exp()).collect();
    let vol0 = volume(&origin.metric);
    let c = (crate::geometry::weighted_integral(&integrand, &origin.metric, None) / vol0).ln();
    let residual = (0..grid.len())
        .map(|j| (f[j] - (state.potential.u[j] - u0[j] - phi[j] - c)).abs())
        .fold(0.0, f64::max);
    LogDet { f: ScalarField::new(grid.clone(), f).expect("grid-sized field"), c, residual }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{gaussian_curvature, weighted_integral};

    fn p2(z: f64) -> f64 {
        1.5 * z * z - 0.5
    }

    fn bump(n: usize, eps: f64) -> ConformalMetric {
        ConformalMetric::from_fn(Grid::new(n).unwrap(), |t| eps * p2(t.cos())).unwrap().normalized()
    }

    fn p2_coefficient(metric: &ConformalMetric) -> f64 {
        let g = metric.grid();
        let p: Vec<f64> = g.theta().iter().map(|t| p2(t.cos())).collect();
        2.5 * g.integrate(&metric.w().iter().zip(&p).map(|(w, p)| w * p).collect::<Vec<_>>())
    }

    #[test]
    fn round_metric_is_a_fixed_point() {
        let m = ConformalMetric::round(Grid::new(64).unwrap());
        let mut flow = Flow::new(FlowConfig::default(), &m).unwrap();
        let dt = flow.max_dt();
        for _ in 0..200 {
            flow.step(dt).unwrap();
        }
        assert!(flow.metric().w().iter().all(|w| w.abs() < 1e-14));
        assert!(flow.phi().iter().all(|p| p.abs() < 1e-14));
        let traj = run(&FlowConfig { t_end: 5.0, ..Default::default() }, &m).unwrap();
        assert_eq!(traj.states.len(), 1);
        assert_eq!(traj.converged_at, Some(0.0));
        assert!((traj.states[0].lambda_g - 3.0).abs() < 0.01);
    }

    #[test]
    fn volume_rate_off_the_class() {
        // dV/dt = V − 4π for a constant conformal factor.
        let m = ConformalMetric::round(Grid::new(64).unwrap()).scaled(0.05);
        let v0 = volume(&m);
        let rate = 2.0 * weighted_integral(velocity(&m).values(), &m, None);
        assert!((rate - FOUR_PI * (0.1f64.exp() - 1.0)).abs() < 1e-12);
        let dt = 1e-6;
        let w1: Vec<f64> = m.w().iter().zip(velocity(&m).values()).map(|(w, v)| w + dt * v).collect();
        let v1 = volume(&ConformalMetric::new(m.grid().clone(), w1).unwrap());
        assert!(((v1 - v0) / dt - FOUR_PI * (0.1f64.exp() - 1.0)).abs() < 1e-5);
        match run(&FlowConfig::default(), &m) {
            Err(e) => assert!(matches!(e.root(), Error::VolumeMismatch { .. })),
            Ok(_) => panic!("volume precondition must be enforced"),
        }
    }

    #[test]
    fn gauss_bonnet_holds_for_flowed_metrics() {
        let mut flow = Flow::new(FlowConfig::default(), &bump(128, 0.1)).unwrap();
        flow.advance_to(0.05).unwrap();
        let m = flow.metric();
        let k = gaussian_curvature(&m);
        assert!((weighted_integral(k.values(), &m, None) - FOUR_PI).abs() < 1e-12);
    }

    #[test]
    fn p2_mode_decays_at_rate_two() {
        let eps = 1e-3;
        let m = bump(256, eps);
        let c0 = p2_coefficient(&m);
        let mut flow = Flow::new(FlowConfig::default(), &m).unwrap();
        flow.advance_to(0.5).unwrap();
        let c1 = p2_coefficient(&flow.metric());
        let rate = -(c1 / c0).ln() / 0.5;
        assert!((rate - 2.0).abs() < 5e-3, "rate {rate}");
    }

    #[test]
    fn semi_discrete_identities_hold_along_rk4() {
        let mut flow = Flow::new(FlowConfig::default(), &bump(128, 0.05)).unwrap();
        let s0 = flow.state().unwrap();
        assert_eq!(check_kahler_class(&s0), 0.0);
        let ld0 = log_det_bookkeeping(&s0);
        assert!(ld0.residual < 1e-14 && ld0.c.abs() < 1e-14);
        flow.advance_to(0.2).unwrap();
        let s = flow.state().unwrap();
        assert!(check_kahler_class(&s) < 1e-11, "{}", check_kahler_class(&s));
        let ld = log_det_bookkeeping(&s);
        assert!(ld.residual < 1e-11 && ld.c.abs() < 1e-11, "{ld:?}");
        assert!(((volume(&s.metric) - FOUR_PI) / FOUR_PI).abs() < 1e-13);
    }

    #[test]
    fn consistency_triangle() {
        // (e^{2w₁} − e^{2w₀})/dt matches ½Δ₀u to first order in dt.
        let m = bump(128, 0.05);
        let mut flow = Flow::new(FlowConfig::default(), &m).unwrap();
        let u = solve_ricci_potential(&m, 1e-10).unwrap().u;
        let half_lap: Vec<f64> = m.grid().laplacian(&u).iter().map(|l| 0.5 * l).collect();
        let dt = flow.max_dt();
        flow.step(dt).unwrap();
        let w1 = flow.metric();
        for j in 0..128 {
            let fd = ((2.0 * w1.w()[j]).exp() - (2.0 * m.w()[j]).exp()) / dt;
            assert!((fd - half_lap[j]).abs() < 10.0 * dt * half_lap[j].abs().max(1.0));
        }
    }

    #[test]
    fn y_decreases_and_run_records_uniform_samples() {
        let cfg = FlowConfig { t_end: 1.0, sample_dt: 0.1, ..Default::default() };
        let traj = run(&cfg, &bump(128, 1e-2)).unwrap();
        assert_eq!(traj.states.len(), 11, "{:?} {:?}", traj.times(), traj.events);
        for pair in traj.states.windows(2) {
            assert!(pair[1].t > pair[0].t);
            assert!(pair[1].funcs.y < pair[0].funcs.y);
            assert!(((pair[1].t - pair[0].t) - 0.1).abs() < 1e-12);
        }
        assert_eq!(traj.last().t, 1.0);
        assert_eq!(traj.dt_history.len(), 1);
        assert!(traj.states.iter().all(|s| s.holo_band.len() == 3));
    }

    #[test]
    fn semi_implicit_tracks_rk4() {
        let m = bump(64, 0.05);
        let rk = run(&FlowConfig { t_end: 0.3, sample_dt: 0.1, ..Default::default() }, &m).unwrap();
        let si = run(
            &FlowConfig {
                t_end: 0.3,
                sample_dt: 0.1,
                scheme: Scheme::SemiImplicit,
                dt_init: Some(1e-4),
                ..Default::default()
            },
            &m,
        )
        .unwrap();
        let d = rk.last().metric.w().iter().zip(si.last().metric.w()).fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        assert!(d < 1e-4, "{d}");
        // Unconditionally stable: a step 100× the explicit limit stays bounded.
        let mut flow = Flow::new(
            FlowConfig { scheme: Scheme::SemiImplicit, vol_tol: 1e-3, ..Default::default() },
            &m,
        )
        .unwrap();
        let big = 100.0 * stable_dt(&m);
        for _ in 0..10 {
            flow.step(big).unwrap();
        }
        assert!(flow.metric().w().iter().all(|w| w.abs() < 0.06));
    }

    #[test]
    fn rejection_is_reported_with_time() {
        let cfg = FlowConfig { t_end: 0.01, sample_dt: 0.01, vol_tol: -1.0, ..Default::default() };
        match run(&cfg, &bump(32, 0.05)) {
            Err(Error::StepReject { .. }) => {}
            other => panic!("{other:?}"),
        }
        let cfg = FlowConfig { t_end: 0.01, sample_dt: 0.0, vol_tol: -1.0, ..Default::default() };
        assert!(matches!(run(&cfg, &bump(32, 0.05)), Err(Error::StepReject { .. })));
    }

    #[test]
    fn step_from_state_matches_integrator() {
        let cfg = FlowConfig::default();
        let mut flow = Flow::new(cfg.clone(), &bump(64, 0.05)).unwrap();
        let s0 = flow.state().unwrap();
        let dt = flow.max_dt();
        let s1 = step(&s0, dt, &cfg).unwrap();
        flow.step(dt).unwrap();
        assert_eq!(s1.metric.w(), flow.metric().w());
        assert_eq!(s1.t, dt);
    }
}
