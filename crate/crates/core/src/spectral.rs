//! Spectrum of the weighted Laplacian `L = −Δ + ∇u·∇̄` on axisymmetric
//! backgrounds, one Fourier mode `e^{imφ}` at a time.
//!
//! For `ψ = R(θ)e^{imφ}` the quadratic form `∫|∇̄ψ|²e^{-u}dv` is
//! `2π · ½∫e^{-u}(R′ − mR/sin θ)² sin θ dθ`, so each signed mode `m` is a
//! generalized symmetric tridiagonal problem `A R = λ B R` against the mass
//! `∫R² e^{-u} e^{2w} sin θ dθ`. The conformal factor drops out of the
//! stiffness (conformal invariance of the ∂̄-energy). Expanding the square
//! gives the symmetric Dirichlet part plus `(m/2)∫R² (e^{-u})′ dθ`, which
//! vanishes for constant `u`; modes `m` and `−m` are then degenerate, but not
//! in general.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{volume, ConformalMetric, Parity, ScalarField};
use crate::tridiag;

/// Residual tolerance for accepted eigenpairs.
pub const TOL_SPEC: f64 = 1e-8;

/// Default half-width of the holomorphic band, `50 h²`.
pub fn default_band_tol(h: f64) -> f64 {
    50.0 * h * h
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeProblem {
    pub m: i32,
    pub stiffness_diag: Vec<f64>,
    pub stiffness_off: Vec<f64>,
    pub mass: Vec<f64>,
    /// Face weights `sin θ_f ⟨e^{-u}⟩_f / h` of the Dirichlet part (pole faces 0).
    faces: Vec<f64>,
    /// Nodal part: the `m²/sin²θ` term and the cross term.
    nodal: Vec<f64>,
}

impl ModeProblem {
    pub fn assemble(metric: &ConformalMetric, u: &[f64], m: i32) -> Result<Self> {
        let grid = metric.grid();
        let n = grid.len();
        if u.len() != n {
            return Err(Error::ShapeMismatch { expected: n, got: u.len() });
        }
        let h = grid.spacing();
        let q = grid.quad_weights();
        let sin = grid.sin_theta();
        let fs = grid.face_sin();
        let eu: Vec<f64> = u.iter().map(|u| (-u).exp()).collect();
        let faces: Vec<f64> = (0..=n)
            .map(|k| if k == 0 || k == n { 0.0 } else { fs[k] * 0.5 * (eu[k - 1] + eu[k]) / h })
            .collect();
        // e^{-u} on faces, pole faces taken from the adjacent node.
        let e_face: Vec<f64> = (0..=n)
            .map(|k| match k {
                0 => eu[0],
                k if k == n => eu[n - 1],
                k => 0.5 * (eu[k - 1] + eu[k]),
            })
            .collect();
        let mf = m as f64;
        let nodal: Vec<f64> = (0..n)
            .map(|j| {
                0.5 * mf * mf * q[j] * eu[j] / (sin[j] * sin[j])
                    + 0.5 * mf * (e_face[j + 1] - e_face[j])
            })
            .collect();
        let stiffness_diag = (0..n).map(|j| 0.5 * (faces[j] + faces[j + 1]) + nodal[j]).collect();
        let stiffness_off = (1..n).map(|k| -0.5 * faces[k]).collect();
        let mass = (0..n).map(|j| q[j] * eu[j] * (2.0 * metric.w()[j]).exp()).collect();
        Ok(ModeProblem { m, stiffness_diag, stiffness_off, mass, faces, nodal })
    }

    /// Lowest `k` eigenpairs; eigenvectors are returned as radial profiles
    /// `R` with `Σ Rᵀ B R = 1`.
    pub fn solve(&self, k: usize) -> Result<Vec<(f64, Vec<f64>)>> {
        let n = self.mass.len();
        let s: Vec<f64> = self.mass.iter().map(|b| b.sqrt().recip()).collect();
        let diag: Vec<f64> = (0..n).map(|j| self.stiffness_diag[j] * s[j] * s[j]).collect();
        let off: Vec<f64> =
            (0..n - 1).map(|j| self.stiffness_off[j] * s[j] * s[j + 1]).collect();
        let values = tridiag::lowest_eigenvalues(&diag, &off, k);
        let fail = |reason: String| Error::SolveFail { mode: self.m, reason };
        values
            .into_iter()
            .map(|lambda| {
                let y = tridiag::inverse_iteration(&diag, &off, lambda)
                    .ok_or_else(|| fail(format!("singular shift at λ = {lambda}")))?;
                let mut r: Vec<f64> = y.iter().zip(&s).map(|(y, s)| y * s).collect();
                // Fix the sign by the first sizeable entry from the north pole.
                let big = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                if let Some(first) = r.iter().find(|v| v.abs() > 1e-3 * big) {
                    if *first < 0.0 {
                        r.iter_mut().for_each(|v| *v = -*v);
                    }
                }
                let res = self.residual(lambda, &r);
                if !(res <= TOL_SPEC * lambda.abs().max(1.0)) {
                    return Err(fail(format!("residual {res:e} at λ = {lambda}")));
                }
                Ok((self.rayleigh_quotient(&r), r))
            })
            .collect()
    }

    /// `RᵀAR / RᵀBR`, with the Dirichlet part summed as squared face
    /// differences so that no cancellation occurs.
    pub fn rayleigh_quotient(&self, r: &[f64]) -> f64 {
        let n = r.len();
        let mut num = 0.0;
        for k in 1..n {
            num += 0.5 * self.faces[k] * (r[k] - r[k - 1]).powi(2);
        }
        let mut den = 0.0;
        for j in 0..n {
            num += self.nodal[j] * r[j] * r[j];
            den += self.mass[j] * r[j] * r[j];
        }
        num / den
    }

    /// `‖A R − λ B R‖_{B⁻¹} / ‖R‖_B`.
    pub fn residual(&self, lambda: f64, r: &[f64]) -> f64 {
        let n = r.len();
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..n {
            let mut ar = self.stiffness_diag[j] * r[j];
            if j > 0 {
                ar += self.stiffness_off[j - 1] * r[j - 1];
            }
            if j + 1 < n {
                ar += self.stiffness_off[j] * r[j + 1];
            }
            let d = ar - lambda * self.mass[j] * r[j];
            num += d * d / self.mass[j];
            den += self.mass[j] * r[j] * r[j];
        }
        (num / den).sqrt()
    }

    pub fn is_symmetric(&self) -> bool {
        // Stored as a single off-diagonal: symmetric by construction.
        self.stiffness_off.len() + 1 == self.stiffness_diag.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEntry {
    pub lambda: f64,
    pub m: i32,
    /// Position within its mode, from 0.
    pub k: usize,
    pub profile: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Eigenpairs sorted by eigenvalue.
    pub entries: Vec<SpectralEntry>,
    /// Eigenvalues across all signed modes, ascending.
    pub all_sorted: Vec<f64>,
    metric: ConformalMetric,
    u: Vec<f64>,
}

impl Spectrum {
    pub fn metric(&self) -> &ConformalMetric {
        &self.metric
    }

    pub fn potential(&self) -> &[f64] {
        &self.u
    }

    pub fn mode(&self, m: i32) -> Vec<&SpectralEntry> {
        self.entries.iter().filter(|e| e.m == m).collect()
    }

    /// Entry with mode `m` and in-mode index `k`.
    pub fn find(&self, m: i32, k: usize) -> Option<(usize, &SpectralEntry)> {
        self.entries.iter().enumerate().find(|(_, e)| e.m == m && e.k == k)
    }
}

pub fn weighted_spectrum(
    metric: &ConformalMetric,
    u: &[f64],
    m_max: usize,
    k_per_mode: usize,
) -> Result<Spectrum> {
    if m_max < 2 || k_per_mode < 3 {
        return Err(Error::Domain(format!(
            "spectrum needs m_max ≥ 2 and k_per_mode ≥ 3 (got {m_max}, {k_per_mode})"
        )));
    }
    let m_max = m_max as i32;
    let per_mode: Vec<Vec<SpectralEntry>> = (-m_max..=m_max)
        .into_par_iter()
        .map(|m| {
            let p = ModeProblem::assemble(metric, u, m)?;
            Ok(p.solve(k_per_mode)?
                .into_iter()
                .enumerate()
                .map(|(k, (lambda, profile))| SpectralEntry { lambda, m, k, profile })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut entries: Vec<SpectralEntry> = per_mode.into_iter().flatten().collect();
    // Rescale unit B-norm profiles to the normalization (1/V)∫|ψ|²e^{-u}dv = 1.
    let factor = (volume(metric) / (2.0 * PI)).sqrt();
    for e in &mut entries {
        e.profile.iter_mut().for_each(|v| *v *= factor);
    }
    entries.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let all_sorted: Vec<f64> = entries.iter().map(|e| e.lambda).collect();
    Ok(Spectrum { entries, all_sorted, metric: metric.clone(), u: u.to_vec() })
}

/// Split off the holomorphic band around 1 and return `λ(g)`, the first
/// eigenvalue above it.
pub fn lambda_second(spec: &Spectrum, band_tol: f64) -> Result<(f64, Vec<f64>)> {
    let band: Vec<f64> =
        spec.all_sorted.iter().cloned().filter(|l| (l - 1.0).abs() <= band_tol).collect();
    let above = spec.all_sorted.iter().cloned().find(|l| *l > 1.0 + band_tol);
    let band_max = band.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let gap = above.map(|l| l - band_max).unwrap_or(f64::NAN);
    match above {
        Some(lambda_g) if band.len() == 3 && gap >= 2.0 * band_tol => Ok((lambda_g, band)),
        _ => Err(Error::BandAmbiguity { count: band.len(), band_tol, gap }),
    }
}

/// A normalized eigenfunction `ψ = R(θ) e^{imφ}` with
/// `|∇̄ψ|² = ½e^{-2w}(R′ − mR/sin θ)²`.
#[derive(Debug, Clone)]
pub struct EigenData {
    pub m: i32,
    pub profile: Vec<f64>,
    pub lambda: f64,
    pub grad_bar_sq: ScalarField,
}

impl EigenData {
    /// `θ`-derivative of the profile with the mode's pole parity.
    pub fn profile_derivative(&self) -> Vec<f64> {
        self.grad_bar_sq.grid().d_theta(&self.profile, Parity::of_mode(self.m.unsigned_abs() as usize))
    }
}

pub fn eigen_data(spec: &Spectrum, index: usize) -> EigenData {
    let e = &spec.entries[index];
    let grid = spec.metric.grid();
    let dr = grid.d_theta(&e.profile, Parity::of_mode(e.m.unsigned_abs() as usize));
    let mf = e.m as f64;
    let sin = grid.sin_theta();
    let vals = (0..grid.len())
        .map(|j| {
            let d = dr[j] - mf * e.profile[j] / sin[j];
            0.5 * (-2.0 * spec.metric.w()[j]).exp() * d * d
        })
        .collect();
    EigenData {
        m: e.m,
        profile: e.profile.clone(),
        lambda: e.lambda,
        grad_bar_sq: ScalarField::new(grid.clone(), vals).expect("grid-sized field"),
    }
}

/// Lower bound for the constant in `(∫f⁴dv)^{1/2} ≤ C_s ∫(|∇f|² + f²)dv`,
/// taken over a fixed probe family.
pub fn sobolev_constant_estimate(metric: &ConformalMetric) -> f64 {
    let grid = metric.grid();
    let density = metric.conformal_density();
    let q = grid.quad_weights();
    let legendre = |l: usize, z: f64| match l {
        1 => z,
        2 => 1.5 * z * z - 0.5,
        _ => 2.5 * z * z * z - 1.5 * z,
    };
    let mut probes: Vec<Vec<f64>> = vec![vec![1.0; grid.len()]];
    for l in 1..=3 {
        probes.push(grid.sample(|t| legendre(l, t.cos())));
        probes.push(grid.sample(|t| 1.0 + legendre(l, t.cos())));
    }
    for sigma in [0.3, 0.6, 1.0] {
        probes.push(grid.sample(|t| (-t * t / (2.0 * sigma * sigma)).exp()));
        probes.push(grid.sample(|t| (-(PI - t).powi(2) / (2.0 * sigma * sigma)).exp()));
    }
    probes
        .iter()
        .map(|f| {
            let grad = crate::geometry::grad_norm_sq(f, metric).expect("grid-sized probe");
            let mut f4 = 0.0;
            let mut energy = 0.0;
            for j in 0..grid.len() {
                let dv = 2.0 * PI * q[j] * density[j];
                f4 += f[j].powi(4) * dv;
                energy += (grad.values()[j] + f[j] * f[j]) * dv;
            }
            f4.sqrt() / energy
        })
        .fold(0.0, f64::max)
}

/// First positive eigenvalue of `−Δ_c` (no weight).
pub fn plain_lambda1(metric: &ConformalMetric) -> Result<f64> {
    let zero = vec![0.0; metric.grid().len()];
    let m0 = ModeProblem::assemble(metric, &zero, 0)?.solve(2)?;
    let m1 = ModeProblem::assemble(metric, &zero, 1)?.solve(1)?;
    Ok(m0[1].0.min(m1[0].0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{weighted_integral, Grid};
    use crate::potential::solve_ricci_potential;

    fn p2(z: f64) -> f64 {
        1.5 * z * z - 0.5
    }

    fn round_spec(n: usize) -> Spectrum {
        let m = ConformalMetric::round(Grid::new(n).unwrap());
        weighted_spectrum(&m, &vec![0.0; n], 3, 4).unwrap()
    }

    #[test]
    fn round_spectrum_matches_spherical_harmonics() {
        let spec = round_spec(256);
        let expected = [0.0, 1.0, 1.0, 1.0, 3.0, 3.0, 3.0, 3.0, 3.0, 6.0];
        let h2 = (PI / 256.0).powi(2);
        for (got, want) in spec.all_sorted.iter().zip(expected) {
            assert!((got - want).abs() < 2.0 * want * h2 + 1e-10, "{got} vs {want}");
        }
        let m0: Vec<f64> = spec.mode(0).iter().map(|e| e.lambda).collect();
        for (got, want) in m0.iter().zip([0.0, 1.0, 3.0, 6.0]) {
            assert!((got - want).abs() < 2.0 * want * h2 + 1e-10);
        }
    }

    #[test]
    fn eigenvalues_converge_at_second_order() {
        let specs: Vec<Spectrum> = [64, 128, 256].iter().map(|&n| round_spec(n)).collect();
        for (m, k) in [(0, 1), (0, 2), (1, 0), (1, 1), (2, 0)] {
            let l: Vec<f64> = specs.iter().map(|s| s.find(m, k).unwrap().1.lambda).collect();
            let ratio = (l[0] - l[1]) / (l[1] - l[2]);
            assert!((3.5..=4.5).contains(&ratio), "m = {m}, k = {k}: ratio {ratio}");
        }
        let fine = round_spec(512);
        assert!((fine.find(1, 0).unwrap().1.lambda - 1.0).abs() < 1e-4);
        assert!((fine.find(2, 0).unwrap().1.lambda - 3.0).abs() < 1e-4);
    }

    #[test]
    fn band_and_lambda_on_round_sphere() {
        let spec = round_spec(64);
        let h = PI / 64.0;
        let (lambda_g, band) = lambda_second(&spec, default_band_tol(h)).unwrap();
        assert_eq!(band.len(), 3);
        assert!((lambda_g - 3.0).abs() < 0.01);
        match lambda_second(&spec, 0.0) {
            Err(Error::BandAmbiguity { count: 0, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn holomorphic_band_is_pinned_for_perturbed_metrics() {
        let shapes: [fn(f64) -> f64; 2] = [p2, |z| p2(z) + z * z * z];
        for (eps, shape) in [(1e-3, shapes[0]), (0.1, shapes[0]), (0.1, shapes[1])] {
            let n = 256;
            let m = ConformalMetric::from_fn(Grid::new(n).unwrap(), |t| eps * shape(t.cos()))
                .unwrap()
                .normalized();
            let p = solve_ricci_potential(&m, 1e-10).unwrap();
            let spec = weighted_spectrum(&m, &p.u, 3, 4).unwrap();
            let tau = default_band_tol(m.grid().spacing());
            let (lambda_g, band) = lambda_second(&spec, tau).unwrap();
            assert!(band.iter().all(|b| (b - 1.0).abs() < 5.0 * (PI / n as f64).powi(2)), "{band:?}");
            assert!(lambda_g > 1.0 + tau);
            assert!(spec.all_sorted[0].abs() < 1e-10);
        }
    }

    #[test]
    fn signed_modes_split_without_reflection_symmetry() {
        let m = ConformalMetric::from_fn(Grid::new(128).unwrap(), |t| {
            let z = t.cos();
            0.2 * (p2(z) + z * z * z)
        })
        .unwrap()
        .normalized();
        let p = solve_ricci_potential(&m, 1e-10).unwrap();
        let spec = weighted_spectrum(&m, &p.u, 2, 3).unwrap();
        let plus = spec.find(1, 1).unwrap().1.lambda;
        let minus = spec.find(-1, 1).unwrap().1.lambda;
        assert!((plus - minus).abs() > 1e-4, "{plus} {minus}");
        let sym = ConformalMetric::from_fn(Grid::new(128).unwrap(), |t| 0.2 * p2(t.cos()))
            .unwrap()
            .normalized();
        let p = solve_ricci_potential(&sym, 1e-10).unwrap();
        let spec = weighted_spectrum(&sym, &p.u, 2, 3).unwrap();
        for k in 0..3 {
            let d = spec.find(2, k).unwrap().1.lambda - spec.find(-2, k).unwrap().1.lambda;
            assert!(d.abs() < 1e-10);
        }
    }

    #[test]
    fn scaling_off_the_normalized_class() {
        let c = 0.2;
        let m = ConformalMetric::round(Grid::new(128).unwrap()).scaled(c);
        let spec = weighted_spectrum(&m, &vec![0.0; 128], 3, 4).unwrap();
        let base = round_spec(128);
        for (a, b) in spec.all_sorted.iter().zip(&base.all_sorted) {
            assert!((a - b * (-2.0 * c).exp()).abs() < 1e-10, "{a} {b}");
        }
        assert!((spec.all_sorted[1] - 1.0).abs() > 0.1);
        let l1 = plain_lambda1(&m).unwrap();
        assert!((l1 - (-2.0 * c).exp() * plain_lambda1(&m.scaled(-c)).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn eigen_data_normalization_and_energy() {
        let spec = round_spec(512);
        let m = spec.metric().clone();
        let vol = volume(&m);
        for idx in 0..8 {
            let d = eigen_data(&spec, idx);
            let r2: Vec<f64> = d.profile.iter().map(|r| r * r).collect();
            let norm = weighted_integral(&r2, &m, None) / vol;
            assert!((norm - 1.0).abs() < 1e-10, "index {idx}: norm {norm}");
            let energy = weighted_integral(d.grad_bar_sq.values(), &m, None) / vol;
            assert!((energy - d.lambda).abs() < 1e-3 * d.lambda.max(1.0), "{energy} vs {}", d.lambda);
        }
        let (idx, _) = spec.find(0, 2).unwrap();
        let d = eigen_data(&spec, idx);
        let sup = d.grad_bar_sq.max().sqrt();
        assert!((sup - 5f64.sqrt() * 1.5 / 2f64.sqrt()).abs() < 1e-3, "{sup}");
        for (r, t) in d.profile.iter().zip(m.grid().theta()) {
            assert!((r - 5f64.sqrt() * p2(t.cos())).abs() < 1e-3);
        }
        let (idx, _) = spec.find(0, 0).unwrap();
        assert!(eigen_data(&spec, idx).grad_bar_sq.max() < 1e-20);
    }

    #[test]
    fn eigenvalues_follow_the_hellmann_feynman_slope() {
        // dλ/dε for the P₂ bump at ε = 0 from the Rayleigh quotient.
        let n = 256;
        let lam = |eps: f64| {
            let m = ConformalMetric::from_fn(Grid::new(n).unwrap(), |t| eps * p2(t.cos()))
                .unwrap()
                .normalized();
            let p = solve_ricci_potential(&m, 1e-10).unwrap();
            let spec = weighted_spectrum(&m, &p.u, 2, 3).unwrap();
            spec.find(0, 2).unwrap().1.lambda
        };
        let d = (lam(1e-4) - lam(-1e-4)) / 2e-4;
        let d2 = (lam(2e-4) - lam(-2e-4)) / 4e-4;
        assert!((d - d2).abs() < 1e-4 * d.abs().max(1.0));
    }

    #[test]
    fn sobolev_probes() {
        let m = ConformalMetric::round(Grid::new(256).unwrap());
        let cs = sobolev_constant_estimate(&m);
        assert!(cs >= (crate::geometry::FOUR_PI).sqrt().recip() - 1e-12);
        let fine = sobolev_constant_estimate(&ConformalMetric::round(Grid::new(512).unwrap()));
        assert!((cs - fine).abs() < 0.01 * fine);
        for c in [-0.3, 0.4] {
            let ratio = sobolev_constant_estimate(&m.scaled(c)) / cs;
            let (lo, hi) = (c.exp().min((-c).exp()), c.exp().max((-c).exp()));
            assert!(ratio >= lo - 1e-12 && ratio <= hi + 1e-12, "c = {c}: {ratio}");
        }
    }

    #[test]
    fn plain_lambda1_values() {
        let m = ConformalMetric::round(Grid::new(256).unwrap());
        assert!((plain_lambda1(&m).unwrap() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn rejects_small_requests() {
        let m = ConformalMetric::round(Grid::new(32).unwrap());
        assert!(matches!(weighted_spectrum(&m, &vec![0.0; 32], 1, 3), Err(Error::Domain(_))));
        assert!(ModeProblem::assemble(&m, &vec![0.0; 32], 2).unwrap().is_symmetric());
    }
}
