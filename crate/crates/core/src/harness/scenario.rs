//! Initial-metric presets.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{ConformalMetric, Grid};
use crate::potential::calabi_energy;

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    Round,
    /// `w = ε P_l(cos θ)`, `l ≥ 2`.
    LegendreBump { l: usize, eps: f64 },
    /// `w = Σ_{l=2..6} amplitude · r_l · l^{-decay} P_l(cos θ)` with `r_l ∈ [−1, 1]`
    /// drawn from a ChaCha8 stream seeded by `seed`.
    MultiMode { seed: u64, decay: f64, amplitude: f64 },
    /// Nodal values of `w` read from a file, one number per node.
    CustomW { path: PathBuf },
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scenario::Round => write!(f, "round"),
            Scenario::LegendreBump { l, eps } => write!(f, "legendre_bump({l}, {eps:?})"),
            Scenario::MultiMode { seed, decay, amplitude } => {
                write!(f, "multi_mode({seed}, {decay:?}, {amplitude:?})")
            }
            Scenario::CustomW { path } => write!(f, "custom_w({})", path.display()),
        }
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if s == "round" {
            return Ok(Scenario::Round);
        }
        let (name, args) = s
            .strip_suffix(')')
            .and_then(|s| s.split_once('('))
            .ok_or_else(|| format!("unknown scenario `{s}`"))?;
        let args: Vec<&str> = args.split(',').map(str::trim).collect();
        let num = |i: usize| -> std::result::Result<f64, String> {
            args[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("`{}` is not a finite number", args[i]))
        };
        match (name.trim(), args.len()) {
            ("legendre_bump", 2) => {
                let l: usize = args[0].parse().map_err(|_| "l must be an integer".to_string())?;
                if l < 2 {
                    return Err("legendre_bump requires l ≥ 2".into());
                }
                Ok(Scenario::LegendreBump { l, eps: num(1)? })
            }
            ("multi_mode", 3) => {
                let seed = args[0].parse().map_err(|_| "seed must be an integer".to_string())?;
                Ok(Scenario::MultiMode { seed, decay: num(1)?, amplitude: num(2)? })
            }
            ("custom_w", 1) if !args[0].is_empty() => {
                Ok(Scenario::CustomW { path: PathBuf::from(args[0]) })
            }
            _ => Err(format!("unknown scenario `{s}`")),
        }
    }
}

/// `P_l(x)` by the three-term recurrence.
pub fn legendre(l: usize, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if l == 0 {
        return p0;
    }
    for k in 1..l {
        let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Coefficients `a_l`, `l = 2..=6`, of the multi-mode preset.
pub fn multi_mode_coefficients(seed: u64, decay: f64, amplitude: f64) -> Vec<(usize, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (2..=6)
        .map(|l| {
            let r: f64 = rng.gen_range(-1.0..=1.0);
            (l, amplitude * r * (l as f64).powf(-decay))
        })
        .collect()
}

fn read_profile(path: &Path, n: usize) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut vals = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
            let v = tok.parse::<f64>().map_err(|_| Error::Config {
                line: i + 1,
                key: path.display().to_string(),
                message: format!("`{tok}` is not a number"),
            })?;
            vals.push(v);
        }
    }
    if vals.len() != n {
        return Err(Error::ShapeMismatch { expected: n, got: vals.len() });
    }
    Ok(vals)
}

impl Scenario {
    /// Initial metric on `grid`; presets are rescaled to volume 4π when
    /// `normalize` is set, custom profiles are taken as given.
    pub fn build(&self, grid: Arc<Grid>, normalize: bool) -> Result<ConformalMetric> {
        let metric = match self {
            Scenario::Round => return Ok(ConformalMetric::round(grid)),
            Scenario::LegendreBump { l, eps } => {
                ConformalMetric::from_fn(grid, |t| eps * legendre(*l, t.cos()))?
            }
            Scenario::MultiMode { seed, decay, amplitude } => {
                let coeffs = multi_mode_coefficients(*seed, *decay, *amplitude);
                ConformalMetric::from_fn(grid, |t| {
                    coeffs.iter().map(|(l, a)| a * legendre(*l, t.cos())).sum()
                })?
            }
            Scenario::CustomW { path } => {
                let n = grid.len();
                return ConformalMetric::new(grid, read_profile(path, n)?);
            }
        };
        Ok(if normalize { metric.normalized() } else { metric })
    }

    /// The same preset with its amplitude replaced; `None` for presets
    /// without one.
    pub fn with_amplitude(&self, amp: f64) -> Option<Scenario> {
        match self {
            Scenario::LegendreBump { l, .. } => Some(Scenario::LegendreBump { l: *l, eps: amp }),
            Scenario::MultiMode { seed, decay, .. } => {
                Some(Scenario::MultiMode { seed: *seed, decay: *decay, amplitude: amp })
            }
            _ => None,
        }
    }

    /// Amplitude whose normalized preset has Calabi energy `target`.
    pub fn amplitude_for_calabi(&self, grid: &Arc<Grid>, target: f64) -> Result<f64> {
        if !(target > 0.0) {
            return Err(Error::Domain(format!("Calabi target {target} must be positive")));
        }
        let energy = |amp: f64| -> Result<f64> {
            let s = self
                .with_amplitude(amp)
                .ok_or_else(|| Error::Domain(format!("scenario {self} has no amplitude")))?;
            Ok(calabi_energy(&s.build(grid.clone(), true)?))
        };
        let probe = 1e-3;
        let mut amp = probe * (target / energy(probe)?).sqrt();
        // Newton on ln E(a) ≈ 2 ln a + const.
        for _ in 0..50 {
            let e = energy(amp)?;
            let miss = (e / target).ln();
            if miss.abs() < 1e-12 {
                return Ok(amp);
            }
            amp *= (-miss / 2.0).exp();
        }
        Ok(amp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::volume;

    #[test]
    fn legendre_values() {
        assert_eq!(legendre(2, 1.0), 1.0);
        assert!((legendre(2, 0.5) + 0.125).abs() < 1e-15);
        assert!((legendre(4, 0.3) - (35.0 * 0.0081 - 30.0 * 0.09 + 3.0) / 8.0).abs() < 1e-15);
    }

    #[test]
    fn scenario_text_round_trips() {
        for s in [
            Scenario::Round,
            Scenario::LegendreBump { l: 3, eps: 1e-3 },
            Scenario::MultiMode { seed: 7, decay: 1.5, amplitude: 0.05 },
            Scenario::CustomW { path: "w.txt".into() },
        ] {
            assert_eq!(s.to_string().parse::<Scenario>().unwrap(), s);
        }
        assert!("legendre_bump(1, 0.1)".parse::<Scenario>().is_err());
        assert!("sphere".parse::<Scenario>().is_err());
    }

    #[test]
    fn presets_are_normalized_and_seeded() {
        let g = Grid::new(128).unwrap();
        let m = Scenario::MultiMode { seed: 3, decay: 1.0, amplitude: 0.1 }.build(g.clone(), true).unwrap();
        assert!((volume(&m) - 4.0 * std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(multi_mode_coefficients(3, 1.0, 0.1), multi_mode_coefficients(3, 1.0, 0.1));
        assert_ne!(multi_mode_coefficients(3, 1.0, 0.1), multi_mode_coefficients(4, 1.0, 0.1));
        let raw = Scenario::LegendreBump { l: 2, eps: 0.1 }.build(g, false).unwrap();
        assert!((volume(&raw) - 4.0 * std::f64::consts::PI).abs() > 1e-3);
    }

    #[test]
    fn calabi_targeting() {
        let g = Grid::new(128).unwrap();
        let s = Scenario::LegendreBump { l: 2, eps: 0.0 };
        for target in [1e-6, 1e-3] {
            let amp = s.amplitude_for_calabi(&g, target).unwrap();
            let e = calabi_energy(&s.with_amplitude(amp).unwrap().build(g.clone(), true).unwrap());
            assert!((e / target - 1.0).abs() < 1e-10);
        }
        assert!(Scenario::Round.amplitude_for_calabi(&g, 1e-3).is_err());
    }
}
