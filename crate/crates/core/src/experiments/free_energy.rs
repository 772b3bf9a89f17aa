//! Nonlinear free energy `∫_0^∞ Q(e^{isΔ}v) ds`.
//!
//! Direct propagation is used up to the chirp threshold `s_0`, the lens form
//! beyond it. The lens integral runs in `z = s^{1-γ}`, so an infinite horizon
//! costs nothing extra.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::potential_q;
use crate::spectral::far_field::{chirp_threshold, free_q, q_integral_far, q_integral_near};
use crate::spectral::{ComplexField, HartreeKernel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FreeEnergyConfig {
    /// Horizon `T` of the partial integral; `inf` integrates to infinity.
    pub horizon: f64,
    /// Trapezoid intervals on `[0, s_0]`.
    pub near_intervals: usize,
    /// Gauss-Legendre panels on `[s_0, T]` and `[T, ∞)`.
    pub panels: usize,
    /// Relative size of the tail beyond `T` that flags the value as unreliable.
    pub tail_tol: f64,
}

impl Default for FreeEnergyConfig {
    fn default() -> Self {
        FreeEnergyConfig {
            horizon: f64::INFINITY,
            near_intervals: 32,
            panels: 2,
            tail_tol: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FreeEnergy {
    /// `partial + tail`.
    pub value: f64,
    /// `∫_0^T`.
    pub partial: f64,
    /// `∫_T^∞`, zero for an infinite horizon.
    pub tail: f64,
    /// `Q(e^{iTΔ}v) T / (γ-1)`, the tail implied by `s^{-γ}` decay from `T`.
    pub power_law_tail: Option<f64>,
    /// `∫_0^{s_0}` by direct propagation.
    pub near: f64,
    pub chirp_threshold: f64,
    pub horizon: f64,
    pub unreliable: bool,
}

impl FreeEnergy {
    fn zero(horizon: f64) -> Self {
        FreeEnergy {
            value: 0.0,
            partial: 0.0,
            tail: 0.0,
            power_law_tail: horizon.is_finite().then_some(0.0),
            near: 0.0,
            chirp_threshold: 0.0,
            horizon,
            unreliable: false,
        }
    }
}

pub fn free_energy_integral(v: &ComplexField, kernel: &HartreeKernel, cfg: &FreeEnergyConfig) -> Result<FreeEnergy> {
    if !v.grid().same_as(kernel.grid()) {
        return Err(Error::GridMismatch);
    }
    let t = cfg.horizon;
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("free-energy horizon must be positive, got {t}")));
    }
    let v = v.to_position();
    if v.l2_norm() == 0.0 || kernel.is_zero() {
        return Ok(FreeEnergy::zero(t));
    }
    let dual = kernel.on_grid(&v.grid().dual())?;
    let s0 = chirp_threshold(&v).max(1e-3);
    let near = q_integral_near(&v, kernel, s0, cfg.near_intervals);
    let (partial, tail) = if t <= s0 {
        let head = q_integral_near(&v, kernel, t, cfg.near_intervals);
        (head, near - head + q_integral_far(&v, &dual, s0, f64::INFINITY, cfg.panels))
    } else {
        let mid = q_integral_far(&v, &dual, s0, t, cfg.panels);
        let tail = if t.is_finite() {
            q_integral_far(&v, &dual, t, f64::INFINITY, cfg.panels)
        } else {
            0.0
        };
        (near + mid, tail)
    };
    let power_law_tail = t
        .is_finite()
        .then(|| free_q(&v, t, kernel, &dual) * t / (kernel.gamma() - 1.0));
    Ok(FreeEnergy {
        value: partial + tail,
        partial,
        tail,
        power_law_tail,
        near,
        chirp_threshold: s0,
        horizon: t,
        unreliable: tail > cfg.tail_tol * partial,
    })
}

/// `Q` along the free flow at the given times, for tabulation.
pub fn free_q_series(v: &ComplexField, kernel: &HartreeKernel, times: &[f64]) -> Result<Vec<(f64, f64)>> {
    let dual = kernel.on_grid(&v.grid().dual())?;
    Ok(times
        .iter()
        .map(|&s| {
            let q = if s == 0.0 {
                potential_q(v, kernel)
            } else {
                free_q(v, s, kernel, &dual)
            };
            (s, q)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;

    fn setup() -> (ComplexField, HartreeKernel) {
        let g = Grid::new(2, 64, 16.0).unwrap();
        let k = HartreeKernel::new(&g, 1.5).unwrap();
        (ComplexField::gaussian(&g, 1.0, 1.0, [0.0; 2], [0.0; 2]), k)
    }

    #[test]
    fn zero_field_has_zero_energy() {
        let (v, k) = setup();
        let z = ComplexField::zeros(v.grid());
        assert_eq!(free_energy_integral(&z, &k, &FreeEnergyConfig::default()).unwrap().value, 0.0);
    }

    #[test]
    fn quartic_homogeneity() {
        let (v, k) = setup();
        let cfg = FreeEnergyConfig::default();
        let a = free_energy_integral(&v, &k, &cfg).unwrap().value;
        let eps = 0.3;
        let b = free_energy_integral(&v.scale(num_complex::Complex64::new(eps, 0.0)), &k, &cfg)
            .unwrap()
            .value;
        assert!((b / a - eps.powi(4)).abs() < 1e-10 * eps.powi(4));
    }

    #[test]
    fn finite_horizon_splits_the_integral() {
        let (v, k) = setup();
        let full = free_energy_integral(&v, &k, &FreeEnergyConfig::default()).unwrap();
        for t in [0.5, 5.0] {
            let cut = free_energy_integral(
                &v,
                &k,
                &FreeEnergyConfig {
                    horizon: t,
                    ..Default::default()
                },
            )
            .unwrap();
            assert!((cut.value - full.value).abs() < 1e-6 * full.value, "{t}");
            assert!(cut.tail > 0.0 && cut.partial > 0.0);
        }
        let short = free_energy_integral(
            &v,
            &k,
            &FreeEnergyConfig {
                horizon: 0.5,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(short.unreliable);
    }
}
