//! Axisymmetric metrics on the two-sphere in conformal gauge.
//!
//! A metric is stored as `g = e^{2w} g_round` with `w = w(θ)` sampled on a
//! staggered polar grid `θ_j = (j + ½)h`, `h = π/N`, so no node sits on a
//! pole. Integrals use the exact cell measures
//! `q_j = cos θ_{j-½} − cos θ_{j+½}` of `sin θ dθ`, and the round Laplacian is
//! the matching finite-volume operator
//!
//! ```text
//! (Δ₀f)_j = [sin θ_{j+½}(f_{j+1} − f_j) − sin θ_{j-½}(f_j − f_{j-1})] / (h q_j)
//! ```
//!
//! which telescopes under `Σ q_j`, so Gauss–Bonnet and the solvability of the
//! potential equation hold exactly on the grid.
//!
//! Conventions: the complex Laplacian is half the real one, gradient norms are
//! complex (`|∇f|² = ½ e^{-2w} f_θ²`), and the scalar curvature of a Kähler
//! curve is its Gaussian curvature `K`.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};

pub const FOUR_PI: f64 = 4.0 * PI;

/// Staggered polar grid with finite-volume quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n: usize,
    h: f64,
    theta: Vec<f64>,
    sin_theta: Vec<f64>,
    cot_theta: Vec<f64>,
    /// `sin` at the n + 1 cell faces; exactly zero at both poles.
    face_sin: Vec<f64>,
    quad: Vec<f64>,
}

impl Grid {
    pub fn new(n: usize) -> Result<Arc<Grid>> {
        if n < 16 {
            return Err(Error::GridTooSmall(n));
        }
        let h = PI / n as f64;
        let theta: Vec<f64> = (0..n).map(|j| (j as f64 + 0.5) * h).collect();
        let sin_theta = theta.iter().map(|t| t.sin()).collect();
        let cot_theta = theta.iter().map(|t| t.cos() / t.sin()).collect();
        let mut face_sin: Vec<f64> = (0..=n).map(|k| (k as f64 * h).sin()).collect();
        face_sin[0] = 0.0;
        face_sin[n] = 0.0;
        let quad = theta.iter().map(|t| 2.0 * t.sin() * (0.5 * h).sin()).collect();
        Ok(Arc::new(Grid { n, h, theta, sin_theta, cot_theta, face_sin, quad }))
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn sin_theta(&self) -> &[f64] {
        &self.sin_theta
    }

    pub fn cot_theta(&self) -> &[f64] {
        &self.cot_theta
    }

    pub fn face_sin(&self) -> &[f64] {
        &self.face_sin
    }

    /// Cell measures for `∫₀^π · sin θ dθ`; they sum to 2.
    pub fn quad_weights(&self) -> &[f64] {
        &self.quad
    }

    /// `∫₀^π f sin θ dθ`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.quad.iter().zip(f).map(|(q, v)| q * v).sum()
    }

    /// Sample a function of θ at the nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.theta.iter().map(|&t| f(t)).collect()
    }

    /// Finite-volume round Laplacian (real convention).
    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut flux = vec![0.0; n + 1];
        for k in 1..n {
            flux[k] = self.face_sin[k] * (f[k] - f[k - 1]) / self.h;
        }
        (0..n).map(|j| (flux[j + 1] - flux[j]) / self.quad[j]).collect()
    }

    /// Centered θ-derivative with reflection ghosts at the poles.
    pub fn d_theta(&self, f: &[f64], parity: Parity) -> Vec<f64> {
        let n = self.n;
        let s = parity.sign();
        (0..n)
            .map(|j| {
                let lo = if j == 0 { s * f[0] } else { f[j - 1] };
                let hi = if j + 1 == n { s * f[n - 1] } else { f[j + 1] };
                (hi - lo) / (2.0 * self.h)
            })
            .collect()
    }

    /// Centered second θ-derivative with reflection ghosts at the poles.
    pub fn d2_theta(&self, f: &[f64], parity: Parity) -> Vec<f64> {
        let n = self.n;
        let s = parity.sign();
        let h2 = self.h * self.h;
        (0..n)
            .map(|j| {
                let lo = if j == 0 { s * f[0] } else { f[j - 1] };
                let hi = if j + 1 == n { s * f[n - 1] } else { f[j + 1] };
                (hi - 2.0 * f[j] + lo) / h2
            })
            .collect()
    }
}

/// Behaviour of a profile under reflection through a pole. An axisymmetric
/// function is even; the radial profile of a Fourier mode `m` has parity
/// `(-1)^m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of_mode(m: usize) -> Parity {
        if m.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

/// Values of a real function at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch { expected: grid.len(), got: values.len() });
        }
        Ok(ScalarField { grid, values })
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.sample(f);
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.values)
    }
}

pub(crate) fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `g = e^{2w} g_round`, axisymmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalMetric {
    grid: Arc<Grid>,
    w: Vec<f64>,
    complex_dim: usize,
}

impl ConformalMetric {
    pub fn new(grid: Arc<Grid>, w: Vec<f64>) -> Result<Self> {
        if w.len() != grid.len() {
            return Err(Error::ShapeMismatch { expected: grid.len(), got: w.len() });
        }
        if let Some(j) = w.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(j));
        }
        Ok(ConformalMetric { grid, w, complex_dim: 1 })
    }

    pub fn round(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        ConformalMetric { grid, w: vec![0.0; n], complex_dim: 1 }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let w = grid.sample(f);
        ConformalMetric::new(grid, w)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn complex_dim(&self) -> usize {
        self.complex_dim
    }

    /// `e^{2w}` at the nodes.
    pub fn conformal_density(&self) -> Vec<f64> {
        self.w.iter().map(|w| (2.0 * w).exp()).collect()
    }

    /// Same metric shifted by a constant, `w → w + c`.
    pub fn scaled(&self, c: f64) -> Self {
        let w = self.w.iter().map(|w| w + c).collect();
        ConformalMetric { grid: self.grid.clone(), w, complex_dim: self.complex_dim }
    }

    /// Rescale by a constant so the volume is exactly 4π on this grid.
    pub fn normalized(&self) -> Self {
        let c = -0.5 * (volume(self) / FOUR_PI).ln();
        self.scaled(c)
    }

    /// Extrapolated θ-slope of `w` at the north and south poles. Both vanish to
    /// O(h²) for a metric that is smooth across the poles.
    pub fn pole_slopes(&self) -> (f64, f64) {
        let h = self.grid.spacing();
        let w = &self.w;
        let n = w.len();
        let north = 2.0 * (w[1] - w[0]) / h - (w[2] - w[1]) / h;
        let south = 2.0 * (w[n - 1] - w[n - 2]) / h - (w[n - 2] - w[n - 3]) / h;
        (north, south)
    }

    fn check_field(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.grid.len() {
            return Err(Error::ShapeMismatch { expected: self.grid.len(), got: f.len() });
        }
        Ok(())
    }
}

/// `K = e^{-2w}(1 − Δ₀w)`.
pub fn gaussian_curvature(metric: &ConformalMetric) -> ScalarField {
    let lap = metric.grid.laplacian(&metric.w);
    let values = metric.w.iter().zip(&lap).map(|(w, l)| (-2.0 * w).exp() * (1.0 - l)).collect();
    ScalarField { grid: metric.grid.clone(), values }
}

pub fn curvature_bounds(metric: &ConformalMetric) -> (f64, f64) {
    let k = gaussian_curvature(metric);
    (k.min(), k.max())
}

pub fn volume(metric: &ConformalMetric) -> f64 {
    let g = &metric.grid;
    2.0 * PI * g.quad.iter().zip(&metric.w).map(|(q, w)| q * (2.0 * w).exp()).sum::<f64>()
}

/// Lower-bound proxy for the diameter: the larger of the pole-to-pole
/// meridian length and half the longest latitude circle.
pub fn diameter(metric: &ConformalMetric) -> f64 {
    let g = &metric.grid;
    let meridian: f64 = metric.w.iter().map(|w| w.exp() * g.h).sum();
    let half_circle = metric
        .w
        .iter()
        .zip(&g.sin_theta)
        .map(|(w, s)| PI * w.exp() * s)
        .fold(0.0, f64::max);
    meridian.max(half_circle)
}

/// `2π Σ f·weight·e^{2w}·q`, i.e. `∫_M f · weight dv`.
pub fn weighted_integral(f: &[f64], metric: &ConformalMetric, weight: Option<&[f64]>) -> f64 {
    let g = &metric.grid;
    let mut acc = 0.0;
    for j in 0..g.n {
        let wt = weight.map_or(1.0, |w| w[j]);
        acc += f[j] * wt * (2.0 * metric.w[j]).exp() * g.quad[j];
    }
    2.0 * PI * acc
}

/// Complex gradient norm `|∇f|² = ½ e^{-2w} f_θ²` of an axisymmetric function.
pub fn grad_norm_sq(f: &[f64], metric: &ConformalMetric) -> Result<ScalarField> {
    metric.check_field(f)?;
    let df = metric.grid.d_theta(f, Parity::Even);
    let values = df
        .iter()
        .zip(&metric.w)
        .map(|(d, w)| 0.5 * (-2.0 * w).exp() * d * d)
        .collect();
    Ok(ScalarField { grid: metric.grid.clone(), values })
}

/// Radial arclength and enclosed volume at the cell faces, measured from the
/// north pole (or the south pole when `south` is set). Index 0 is the pole.
fn pole_profile(metric: &ConformalMetric, south: bool) -> (Vec<f64>, Vec<f64>) {
    let g = &metric.grid;
    let n = g.n;
    let mut s = Vec::with_capacity(n + 1);
    let mut vol = Vec::with_capacity(n + 1);
    s.push(0.0);
    vol.push(0.0);
    for i in 0..n {
        let j = if south { n - 1 - i } else { i };
        let w = metric.w[j];
        s.push(s[i] + g.h * w.exp());
        vol.push(vol[i] + 2.0 * PI * g.quad[j] * (2.0 * w).exp());
    }
    (s, vol)
}

/// Volume of the pole-centered ball of radius `r`, interpolated linearly in
/// `s²` between faces (exact to leading order near the pole).
fn ball_volume(s: &[f64], vol: &[f64], r: f64) -> f64 {
    let k = s.partition_point(|&x| x < r);
    if k == 0 {
        return 0.0;
    }
    if k >= s.len() {
        return *vol.last().unwrap();
    }
    let (a, b) = (s[k - 1] * s[k - 1], s[k] * s[k]);
    let t = (r * r - a) / (b - a);
    vol[k - 1] + t * (vol[k] - vol[k - 1])
}

/// Non-collapsing constant on scales `≤ rho`, sampled at pole-centered balls:
/// `min_r Vol(B(r)) / (V r²)` over 64 log-spaced radii in `[rho/1000, rho]`.
pub fn noncollapsing_kappa(metric: &ConformalMetric, rho: f64) -> Result<f64> {
    let d = diameter(metric);
    if !(rho > 0.0) || rho > 0.5 * d {
        return Err(Error::Domain(format!("rho = {rho} must lie in (0, diameter/2 = {})", 0.5 * d)));
    }
    let total = volume(metric);
    let samples = 64;
    let mut kappa = f64::INFINITY;
    for south in [false, true] {
        let (s, vol) = pole_profile(metric, south);
        for i in 0..samples {
            let r = rho * 10f64.powf(-3.0 * i as f64 / (samples - 1) as f64);
            kappa = kappa.min(ball_volume(&s, &vol, r) / (total * r * r));
        }
    }
    Ok(kappa)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p2(z: f64) -> f64 {
        1.5 * z * z - 0.5
    }

    #[test]
    fn rejects_tiny_grids() {
        assert_eq!(Grid::new(8).unwrap_err(), Error::GridTooSmall(8));
        assert!(Grid::new(16).is_ok());
    }

    #[test]
    fn nodes_are_staggered_and_quadrature_exact_for_constants() {
        let g = Grid::new(64).unwrap();
        assert!(g.theta().windows(2).all(|p| p[0] < p[1]));
        assert!(g.theta()[0] > 0.0 && *g.theta().last().unwrap() < PI);
        assert_relative_eq!(g.quad_weights().iter().sum::<f64>(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn round_sphere_basics() {
        let g = Grid::new(128).unwrap();
        let m = ConformalMetric::round(g.clone());
        assert_relative_eq!(volume(&m), FOUR_PI, epsilon = 1e-12);
        assert_relative_eq!(diameter(&m), PI, epsilon = 1e-12);
        let k = gaussian_curvature(&m);
        assert!(k.values().iter().all(|&x| x == 1.0));
        assert_eq!(curvature_bounds(&m), (1.0, 1.0));
    }

    #[test]
    fn constant_shift_scales_geometry() {
        let g = Grid::new(64).unwrap();
        let m = ConformalMetric::from_fn(g, |t| 0.05 * p2(t.cos())).unwrap();
        let c = 0.05;
        let s = m.scaled(c);
        assert_relative_eq!(volume(&s), volume(&m) * (2.0 * c).exp(), max_relative = 1e-14);
        assert_relative_eq!(diameter(&s), diameter(&m) * c.exp(), max_relative = 1e-14);
        let (k0, k1) = (gaussian_curvature(&m), gaussian_curvature(&s));
        for (a, b) in k0.values().iter().zip(k1.values()) {
            assert_relative_eq!(*b, a * (-2.0 * c).exp(), max_relative = 1e-13);
        }
        let r = ConformalMetric::round(m.grid().clone()).scaled(0.05);
        assert_relative_eq!(volume(&r), FOUR_PI * 0.1f64.exp(), max_relative = 1e-14);
    }

    #[test]
    fn curvature_of_linear_mode_converges() {
        // w = ε cos θ: K = e^{-2ε cos θ}(1 + 2ε cos θ).
        let eps = 0.1;
        let err = |n| {
            let g = Grid::new(n).unwrap();
            let m = ConformalMetric::from_fn(g.clone(), |t| eps * t.cos()).unwrap();
            let k = gaussian_curvature(&m);
            let exact = g.sample(|t| (-2.0 * eps * t.cos()).exp() * (1.0 + 2.0 * eps * t.cos()));
            sup_norm(&k.values().iter().zip(&exact).map(|(a, b)| a - b).collect::<Vec<_>>())
        };
        let (e1, e2) = (err(128), err(256));
        assert!(e1 < 1e-4, "{e1}");
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn gauss_bonnet_is_exact_on_the_grid() {
        let g = Grid::new(96).unwrap();
        let m = ConformalMetric::from_fn(g, |t| 0.3 * p2(t.cos()) + 0.1 * t.cos().powi(3)).unwrap();
        let k = gaussian_curvature(&m);
        assert_relative_eq!(weighted_integral(k.values(), &m, None), FOUR_PI, max_relative = 1e-12);
    }

    #[test]
    fn weighted_integrals_of_legendre_polynomials() {
        let g = Grid::new(256).unwrap();
        let m = ConformalMetric::round(g.clone());
        let ones = vec![1.0; g.len()];
        assert_relative_eq!(weighted_integral(&ones, &m, None), FOUR_PI, max_relative = 1e-13);
        let c = g.sample(|t| t.cos());
        assert!(weighted_integral(&c, &m, None).abs() < 1e-13);
        let p2sq = g.sample(|t| p2(t.cos()).powi(2));
        let h2 = g.spacing().powi(2);
        assert!((weighted_integral(&p2sq, &m, None) - FOUR_PI / 5.0).abs() < 10.0 * h2);
        for l in 1..6 {
            let p = g.sample(|t| legendre(l, t.cos()));
            assert!(weighted_integral(&p, &m, None).abs() < 10.0 * h2, "l = {l}");
        }
    }

    fn legendre(l: usize, z: f64) -> f64 {
        let (mut p0, mut p1) = (1.0, z);
        if l == 0 {
            return p0;
        }
        for k in 1..l {
            let p2 = ((2 * k + 1) as f64 * z * p1 - k as f64 * p0) / (k + 1) as f64;
            p0 = p1;
            p1 = p2;
        }
        p1
    }

    #[test]
    fn volume_and_diameter_of_p2_bump() {
        // Reference values from adaptive high-precision quadrature.
        let g = Grid::new(512).unwrap();
        let m = ConformalMetric::from_fn(g.clone(), |t| 0.1 * p2(t.cos())).unwrap();
        let h2 = g.spacing().powi(2);
        assert!((volume(&m) - 12.617_667_143_719_01).abs() < 10.0 * h2);
        // Pole-to-pole meridian dominates for this prolate profile.
        assert!((diameter(&m) - 3.225_653_746_422_462).abs() < 10.0 * h2);
    }

    #[test]
    fn gradient_norm_conventions() {
        let g = Grid::new(256).unwrap();
        let m = ConformalMetric::round(g.clone());
        let c = grad_norm_sq(&vec![2.5; g.len()], &m).unwrap();
        assert!(c.values().iter().all(|&x| x == 0.0));
        let f = grad_norm_sq(&g.sample(|t| t.cos()), &m).unwrap();
        for (v, t) in f.values().iter().zip(g.theta()) {
            assert!((v - 0.5 * t.sin().powi(2)).abs() < 1e-4);
        }
        let p = grad_norm_sq(&g.sample(|t| p2(t.cos())), &m).unwrap();
        assert!((p.max() - 1.125).abs() < 1e-3);
    }

    #[test]
    fn kappa_on_round_sphere() {
        let g = Grid::new(512).unwrap();
        let m = ConformalMetric::round(g);
        let k = noncollapsing_kappa(&m, 1.0).unwrap();
        assert!((k - 0.229_848_847_065_930).abs() < 1e-4, "{k}");
        let small = noncollapsing_kappa(&m, 1e-2).unwrap();
        assert!((small - 0.25).abs() < 1e-4, "{small}");
        assert!(noncollapsing_kappa(&m, 2.0).is_err());
    }

    #[test]
    fn kappa_on_p2_bump_matches_refined_quadrature() {
        // Reference: root-found ball radii with 30-digit quadrature.
        let g = Grid::new(512).unwrap();
        let m = ConformalMetric::from_fn(g, |t| 0.1 * p2(t.cos())).unwrap();
        let k = noncollapsing_kappa(&m, 0.5).unwrap();
        assert!((k - 0.242_334_707_562_850).abs() < 1e-4, "{k}");
    }

    #[test]
    fn kappa_is_scale_covariant() {
        let g = Grid::new(256).unwrap();
        let m = ConformalMetric::from_fn(g, |t| 0.1 * p2(t.cos())).unwrap();
        let c = 0.2;
        let a = noncollapsing_kappa(&m, 0.5).unwrap();
        let b = noncollapsing_kappa(&m.scaled(c), 0.5 * c.exp()).unwrap();
        // Vol/V is scale free, r² picks up e^{2c}.
        assert_relative_eq!(a, b * (2.0 * c).exp(), max_relative = 1e-3);
    }

    #[test]
    fn pole_slopes_vanish_for_smooth_profiles() {
        let eps = 0.1;
        let slopes = |n| {
            let g = Grid::new(n).unwrap();
            let m = ConformalMetric::from_fn(g, |t| eps * p2(t.cos())).unwrap();
            let (a, b) = m.pole_slopes();
            a.abs().max(b.abs())
        };
        let (s1, s2) = (slopes(128), slopes(256));
        assert!(s1 < 1e-3);
        assert!(s1 / s2 > 3.0);
    }

    #[test]
    fn rejects_non_finite_input() {
        let g = Grid::new(32).unwrap();
        let mut w = vec![0.0; 32];
        w[5] = f64::NAN;
        assert_eq!(ConformalMetric::new(g, w).unwrap_err(), Error::NonFinite(5));
    }
}
