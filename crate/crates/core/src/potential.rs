//! Ricci potential and the scalar functionals built from it.
//!
//! In complex dimension one the potential equation `Ric + ∂∂̄u = g` reduces to
//! its trace, `½Δ₀u = e^{2w}(1 − K) = e^{2w} − 1 + Δ₀w`. Writing
//! `u = 2w + v + c` leaves `Δ₀v = 2(e^{2w} − 1)`, which on the finite-volume
//! grid is solved by accumulating the flux from the north pole and then
//! integrating once more. The constant `c` is fixed by `V⁻¹∫e^{-u}dv = 1`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{
    gaussian_curvature, grad_norm_sq, sup_norm, volume, weighted_integral, ConformalMetric, Grid,
    Parity, FOUR_PI,
};

/// Solution of the normalized potential problem on one metric.
#[derive(Debug, Clone, PartialEq)]
pub struct RicciPotential {
    pub u: Vec<f64>,
    /// Additive constant fixed by the normalization.
    pub norm_const: f64,
    /// Sup-norm residual of the discrete trace equation.
    pub pde_residual: f64,
    /// `|V⁻¹∫e^{-u}dv − 1|`.
    pub norm_residual: f64,
}

impl RicciPotential {
    pub fn values(&self) -> &[f64] {
        &self.u
    }

    /// `e^{-u}` at the nodes.
    pub fn weight(&self) -> Vec<f64> {
        self.u.iter().map(|u| (-u).exp()).collect()
    }
}

pub fn solve_ricci_potential(metric: &ConformalMetric, tol: f64) -> Result<RicciPotential> {
    let grid = metric.grid();
    let w = metric.w();
    let e2w = metric.conformal_density();
    let Kernel { u, norm_const, .. } = potential_kernel(grid, w, &e2w, tol)?;

    let lap = grid.laplacian(&u);
    let k = gaussian_curvature(metric);
    let pde_residual = (0..grid.len())
        .map(|j| (0.5 * lap[j] - e2w[j] * (1.0 - k.values()[j])).abs())
        .fold(0.0, f64::max);
    let weight: Vec<f64> = u.iter().map(|u| (-u).exp()).collect();
    let ones = vec![1.0; grid.len()];
    let norm_residual =
        (weighted_integral(&ones, metric, Some(&weight)) / volume(metric) - 1.0).abs();
    if norm_residual > tol.max(1e-12) {
        return Err(Error::NormalizationFail(norm_residual));
    }
    Ok(RicciPotential { u, norm_const, pde_residual, norm_residual })
}

pub(crate) struct Kernel {
    pub u: Vec<f64>,
    pub norm_const: f64,
    /// `a = V⁻¹∫u e^{-u}dv`.
    pub a: f64,
}

/// Potential, normalization constant and average from `w` and `e^{2w}`.
pub(crate) fn potential_kernel(grid: &Grid, w: &[f64], e2w: &[f64], tol: f64) -> Result<Kernel> {
    let n = grid.len();
    let q = grid.quad_weights();
    let fs = grid.face_sin();
    let h = grid.spacing();
    let vol = 2.0 * PI * q.iter().zip(e2w).map(|(q, e)| q * e).sum::<f64>();
    if (vol - FOUR_PI).abs() > 10.0 * tol * FOUR_PI {
        return Err(Error::VolumeMismatch { volume: vol });
    }
    // Remove the tolerated volume defect so the flux closes at the south pole.
    let defect = vol / FOUR_PI - 1.0;
    let mut u = vec![0.0; n];
    let mut v = 0.0;
    let mut flux = 0.0;
    u[0] = 2.0 * w[0];
    for k in 1..n {
        flux += q[k - 1] * 2.0 * (e2w[k - 1] - 1.0 - defect);
        v += h * flux / fs[k];
        u[k] = 2.0 * w[k] + v;
    }
    // c ↦ V⁻¹∫e^{-(u₀+c)}dv is e^{-c} times a constant: the root is explicit.
    let shift = u.iter().cloned().fold(f64::INFINITY, f64::min);
    let weight: Vec<f64> = u.iter().map(|u| (shift - u).exp()).collect();
    let mean = 2.0 * PI * (0..n).map(|j| q[j] * e2w[j] * weight[j]).sum::<f64>() / vol;
    if !(mean.is_finite() && mean > 0.0) {
        return Err(Error::NormalizationFail(mean));
    }
    let norm_const = mean.ln() - shift;
    u.iter_mut().for_each(|u| *u += norm_const);
    let a = 2.0 * PI * (0..n).map(|j| q[j] * e2w[j] * weight[j] * u[j]).sum::<f64>() / (mean * vol);
    Ok(Kernel { u, norm_const, a })
}

/// Shift an unnormalized potential so that `V⁻¹∫e^{-u}dv = 1`.
///
/// The map `c ↦ V⁻¹∫e^{-(u₀+c)}dv` is `e^{-c}` times a constant, so the root
/// is `c = log(V⁻¹∫e^{-u₀}dv)`.
pub fn normalize(metric: &ConformalMetric, u0: &[f64]) -> Result<(Vec<f64>, f64)> {
    let shift = u0.iter().cloned().fold(f64::INFINITY, f64::min);
    let weight: Vec<f64> = u0.iter().map(|u| (shift - u).exp()).collect();
    let ones = vec![1.0; u0.len()];
    let mean = weighted_integral(&ones, metric, Some(&weight)) / volume(metric);
    if !(mean.is_finite() && mean > 0.0) {
        return Err(Error::NormalizationFail(mean));
    }
    let c = mean.ln() - shift;
    Ok((u0.iter().map(|u| u + c).collect(), c))
}

fn weighted_mean(f: &[f64], metric: &ConformalMetric, pot: &RicciPotential) -> f64 {
    let weight = pot.weight();
    weighted_integral(f, metric, Some(&weight)) / volume(metric)
}

/// `a = V⁻¹∫u e^{-u}dv`; nonpositive by Jensen.
pub fn average_a(pot: &RicciPotential, metric: &ConformalMetric) -> f64 {
    weighted_mean(&pot.u, metric, pot)
}

/// `Y = V⁻¹∫(u − a)² e^{-u}dv`.
pub fn functional_y(pot: &RicciPotential, a: f64, metric: &ConformalMetric) -> f64 {
    let d: Vec<f64> = pot.u.iter().map(|u| (u - a).powi(2)).collect();
    weighted_mean(&d, metric, pot)
}

/// `Z = V⁻¹∫|∇u|² e^{-u}dv`.
pub fn functional_z(pot: &RicciPotential, metric: &ConformalMetric) -> f64 {
    let g = grad_norm_sq(&pot.u, metric).expect("potential lives on the metric grid");
    weighted_mean(g.values(), metric, pot)
}

/// `δ′(a, s) = a / (1 + e^s + a e^s)`.
pub fn delta_prime(a: f64, s: f64) -> Result<f64> {
    if !(a >= 0.0 && s >= 0.0) {
        return Err(Error::Domain(format!("delta_prime needs a, s ≥ 0 (got a = {a}, s = {s})")));
    }
    Ok(a / (1.0 + s.exp() + a * s.exp()))
}

/// Futaki integrals `∫_M X(u) dv` on a basis of holomorphic fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FutakiIntegrals {
    /// Modulus of the complex value on the axial generator: the gradient of
    /// `cos θ` plus `i` times the rotation `∂_φ`.
    pub axial: f64,
    /// Gradient of `sin θ cos φ`.
    pub transverse_x: f64,
    /// Gradient of `sin θ sin φ`.
    pub transverse_y: f64,
    /// Rotation part of `axial`; `∂_φ u ≡ 0` for axisymmetric potentials.
    pub rotation: f64,
}

impl FutakiIntegrals {
    pub fn as_array(&self) -> [f64; 3] {
        [self.axial, self.transverse_x, self.transverse_y]
    }

    pub fn max_abs(&self) -> f64 {
        self.as_array().iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Gradients are taken in the round metric, whose conformal gradient fields
/// are exactly the real parts of the holomorphic fields of CP¹.
pub fn futaki_integrals(pot: &RicciPotential, metric: &ConformalMetric) -> FutakiIntegrals {
    let grid = metric.grid();
    let du = grid.d_theta(&pot.u, Parity::Even);
    let density = metric.conformal_density();
    let sin = grid.sin_theta();
    let cos: Vec<f64> = grid.theta().iter().map(|t| t.cos()).collect();
    let q = grid.quad_weights();

    // ⟨∇₀ cos θ, ∇₀ u⟩₀ = −sin θ · u_θ.
    let axial_gradient =
        2.0 * PI * (0..grid.len()).map(|j| q[j] * (-sin[j]) * du[j] * density[j]).sum::<f64>();
    // Rotation: ∂_φ u vanishes identically.
    let rotation = 0.0;

    // ⟨∇₀(sin θ cos φ), ∇₀ u⟩₀ = cos θ cos φ · u_θ; integrate φ on a uniform rule.
    let n_phi = 64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for k in 0..n_phi {
        let phi = 2.0 * PI * k as f64 / n_phi as f64;
        sx += phi.cos();
        sy += phi.sin();
    }
    let dphi = 2.0 * PI / n_phi as f64;
    let radial: f64 = (0..grid.len()).map(|j| q[j] * cos[j] * du[j] * density[j]).sum();
    FutakiIntegrals {
        axial: axial_gradient.hypot(rotation),
        transverse_x: radial * sx * dphi,
        transverse_y: radial * sy * dphi,
        rotation,
    }
}

/// Nodewise `(|∇∇̄u|², |∇∇u|²)` in complex conventions.
///
/// In dimension one `|∇∇̄u|² = (Δ_c u)²`; `|∇∇u|²` is half the squared norm of
/// the trace-free real Hessian, `¼ e^{-4w}(u_θθ − 2w_θ u_θ − cot θ u_θ)²`.
pub fn complex_hessian_norms(u: &[f64], metric: &ConformalMetric) -> (Vec<f64>, Vec<f64>) {
    let grid = metric.grid();
    let w = metric.w();
    let lap = grid.laplacian(u);
    let du = grid.d_theta(u, Parity::Even);
    let d2u = grid.d2_theta(u, Parity::Even);
    let dw = grid.d_theta(w, Parity::Even);
    let cot = grid.cot_theta();
    let mut mixed = Vec::with_capacity(u.len());
    let mut pure = Vec::with_capacity(u.len());
    for j in 0..u.len() {
        let e2 = (-2.0 * w[j]).exp();
        mixed.push((0.5 * e2 * lap[j]).powi(2));
        let tf = d2u[j] - 2.0 * dw[j] * du[j] - cot[j] * du[j];
        pure.push(0.25 * e2 * e2 * tf * tf);
    }
    (mixed, pure)
}

/// The scalar functionals of a solved state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalBundle {
    pub a: f64,
    pub y: f64,
    pub z: f64,
    pub osc_u: f64,
    pub c0_u_minus_a: f64,
    pub grad_u_c0: f64,
    /// `δ′(λ(g) − 1, osc u)`.
    pub delta_prime_0: f64,
}

impl FunctionalBundle {
    pub fn evaluate(metric: &ConformalMetric, pot: &RicciPotential, lambda_g: f64) -> Self {
        let a = average_a(pot, metric);
        let y = functional_y(pot, a, metric);
        let z = functional_z(pot, metric);
        let (lo, hi) = pot.u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &u| {
            (lo.min(u), hi.max(u))
        });
        let osc_u = hi - lo;
        let c0_u_minus_a = pot.u.iter().fold(0.0, |m: f64, u| m.max((u - a).abs()));
        let grad = grad_norm_sq(&pot.u, metric).expect("potential lives on the metric grid");
        let grad_u_c0 = grad.max().sqrt();
        let delta_prime_0 = delta_prime((lambda_g - 1.0).max(0.0), osc_u).unwrap_or(0.0);
        FunctionalBundle { a, y, z, osc_u, c0_u_minus_a, grad_u_c0, delta_prime_0 }
    }
}

/// `V⁻¹∫(K − 1)² dv`, the Calabi-type energy of the scalar curvature.
pub fn calabi_energy(metric: &ConformalMetric) -> f64 {
    let k = gaussian_curvature(metric);
    let d: Vec<f64> = k.values().iter().map(|k| (k - 1.0).powi(2)).collect();
    weighted_integral(&d, metric, None) / volume(metric)
}

/// Sup-norm of `u − a`.
pub fn c0_distance(u: &[f64], a: f64) -> f64 {
    sup_norm(&u.iter().map(|u| u - a).collect::<Vec<_>>())
}
