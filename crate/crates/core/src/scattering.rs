//! Numerical scattering operator `𝒮: u_0 ↦ u_+` and wave operator `𝒲: u_+ ↦ u(0)`.
//!
//! Both truncate the time axis at a horizon `T`. The neglected interaction on
//! `[T, ∞)` is approximated by freezing the profile at `T` and integrating the
//! forcing of the free evolution through the lens form.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::duhamel::{axpy, dist, Evaluator, TimeGrid, I};
use crate::error::{Error, Result};
use crate::functionals::{mass, sigma_norm};
use crate::hierarchy::extract_from_profiles;
use crate::propagator::{evolve_with_report, RunReport, SolverConfig};
use crate::spectral::far_field::{chirp_threshold, trilinear_integral_far};
use crate::spectral::ops::free_propagate;
use crate::spectral::{ComplexField, HartreeKernel, Representation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScatterOptions {
    /// Add the lens-form estimate of the interaction beyond the horizon.
    pub far_tail: bool,
    /// Gauss-Legendre panels for the far-field integral.
    pub panels: usize,
    /// Picard stopping tolerance in `L^∞_t L²_x` for the wave operator.
    pub picard_tol: f64,
    pub max_iter: usize,
    /// Largest storage for the Picard iterate, in bytes.
    pub memory_limit: usize,
}

impl Default for ScatterOptions {
    fn default() -> Self {
        ScatterOptions {
            far_tail: true,
            panels: 2,
            picard_tol: 1e-8,
            max_iter: 50,
            memory_limit: 2 << 30,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScatterResult {
    pub u_plus: ComplexField,
    pub t_used: f64,
    /// Estimate of `‖profile(∞) - profile(T)‖₂`, after the far-field correction when enabled.
    pub tail_estimate: f64,
    /// Picard sweeps (wave operator only).
    pub iterations: usize,
    /// Measured Picard contraction factor (wave operator only).
    pub contraction: Option<f64>,
    /// Norm of the far-field correction that was applied.
    pub far_correction: f64,
    pub run: Option<RunReport>,
}

/// JSON summary of one operator application.
#[derive(Debug, Clone, Serialize)]
pub struct ScatterSummary {
    pub l2_in: f64,
    pub sigma_in: f64,
    pub l2_out: f64,
    pub sigma_out: f64,
    pub t_used: f64,
    pub tail_estimate: f64,
    pub iterations: usize,
    pub contraction: Option<f64>,
    pub far_correction: f64,
}

impl ScatterResult {
    pub fn summary(&self, input: &ComplexField) -> ScatterSummary {
        ScatterSummary {
            l2_in: input.l2_norm(),
            sigma_in: sigma_norm(input),
            l2_out: self.u_plus.l2_norm(),
            sigma_out: sigma_norm(&self.u_plus),
            t_used: self.t_used,
            tail_estimate: self.tail_estimate,
            iterations: self.iterations,
            contraction: self.contraction,
            far_correction: self.far_correction,
        }
    }
}

fn horizon(cfg: &SolverConfig) -> Result<f64> {
    let (t0, t1) = cfg.t_span;
    if t0 != 0.0 || !(t1 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "scattering runs need t_span = (0, T) with T > 0, got {:?}",
            cfg.t_span
        )));
    }
    if t1 > cfg.t_max {
        return Err(Error::InvalidParameter(format!(
            "horizon T = {t1} exceeds the validity horizon T_max = {}",
            cfg.t_max
        )));
    }
    Ok(t1)
}

/// `∫_T^∞ e^{-isΔ} T(e^{isΔ}p, e^{isΔ}p, e^{isΔ}p) ds`, or zero when disabled or unresolved.
fn far_tail(p: &ComplexField, t: f64, kernel: &HartreeKernel, opts: &ScatterOptions) -> Result<Option<ComplexField>> {
    if !opts.far_tail || kernel.is_zero() || t < chirp_threshold(p) {
        return Ok(None);
    }
    let dual = kernel.on_grid(&p.grid().dual())?;
    trilinear_integral_far(p, p, p, &dual, t, f64::INFINITY, opts.panels).map(Some)
}

pub fn scattering_state(u0: &ComplexField, cfg: &SolverConfig, kernel: &HartreeKernel) -> Result<ScatterResult> {
    scattering_state_with(u0, cfg, kernel, &ScatterOptions::default())
}

/// `𝒮(u_0)`: Strang evolution to `T`, interaction profiles at `T/4`, `T/2`, `T`,
/// each completed by the far-field tail, then Richardson extrapolation in `T`.
pub fn scattering_state_with(
    u0: &ComplexField,
    cfg: &SolverConfig,
    kernel: &HartreeKernel,
    opts: &ScatterOptions,
) -> Result<ScatterResult> {
    let t = horizon(cfg)?;
    let (steps, _) = cfg.steps();
    let steps = steps.div_ceil(4) * 4;
    let mut run_cfg = *cfg;
    run_cfg.dt = t / steps as f64;
    run_cfg.record_every = steps / 4;
    let (traj, report) = evolve_with_report(u0, &run_cfg, kernel)?;
    let profile = |i: usize| free_propagate(traj.field(i), -traj.times()[i]);
    let (quarter, half, full) = (profile(1), profile(2), profile(4));
    let tails = [
        far_tail(&quarter, t / 4.0, kernel, opts)?,
        far_tail(&half, t / 2.0, kernel, opts)?,
        far_tail(&full, t, kernel, opts)?,
    ];
    let corrected: Vec<ComplexField> = if tails.iter().all(|x| x.is_some()) {
        [&quarter, &half, &full]
            .iter()
            .zip(&tails)
            .map(|(p, tail)| {
                let mut q = (*p).clone();
                q.axpy(-I, tail.as_ref().expect("checked"));
                q
            })
            .collect()
    } else {
        vec![quarter, half, full.clone()]
    };
    let far_correction = corrected[2].distance(&full);
    let floor = 1e-9 * u0.l2_norm();
    let ex = if corrected[2].distance(&corrected[1]) <= floor && corrected[1].distance(&corrected[0]) <= floor {
        None
    } else {
        Some(extract_from_profiles(&corrected[0], &corrected[1], &corrected[2], t, kernel.gamma())?)
    };
    let (u_plus, tail_estimate) = match ex {
        Some(e) => (e.value, e.tail_estimate),
        None => (corrected[2].clone(), corrected[2].distance(&corrected[1])),
    };
    Ok(ScatterResult {
        u_plus,
        t_used: t,
        tail_estimate,
        iterations: 0,
        contraction: None,
        far_correction,
        run: Some(report),
    })
}

pub fn wave_operator(u_plus: &ComplexField, cfg: &SolverConfig, kernel: &HartreeKernel) -> Result<ScatterResult> {
    wave_operator_with(u_plus, cfg, kernel, &ScatterOptions::default())
}

/// `𝒲(u_+)`: Picard iteration on `P(t) = P(T) + i ∫_t^T e^{-isΔ} T(u,u,u)(s) ds`
/// (trapezoid rule, whole-trajectory sweeps), with `P(T) = u_+` plus the far-field tail.
pub fn wave_operator_with(
    u_plus: &ComplexField,
    cfg: &SolverConfig,
    kernel: &HartreeKernel,
    opts: &ScatterOptions,
) -> Result<ScatterResult> {
    let t = horizon(cfg)?;
    if !u_plus.grid().same_as(kernel.grid()) {
        return Err(Error::GridMismatch);
    }
    let kernel = kernel.clone().with_dealias(cfg.dealias);
    let grid = u_plus.grid().clone();
    let tg = TimeGrid::with_spacing(t, cfg.dt)?;
    let bytes = tg.len() * grid.len() * std::mem::size_of::<Complex64>();
    if bytes > opts.memory_limit {
        return Err(Error::InvalidParameter(format!(
            "Picard storage of {bytes} bytes exceeds the limit of {}; use a coarser step or grid",
            opts.memory_limit
        )));
    }
    let u_plus = u_plus.to_position();
    let tail = far_tail(&u_plus, t, &kernel, opts)?;
    let mut anchor_field = u_plus.clone();
    if let Some(tail) = &tail {
        anchor_field.axpy(I, tail);
    }
    let far_correction = anchor_field.distance(&u_plus);
    let anchor = anchor_field.to_frequency().into_values();
    let ev = Evaluator::new(&kernel);
    let coef = I * tg.step();
    let dv = grid.cell_volume().sqrt();

    let mut iterate: Vec<Vec<Complex64>> = vec![anchor.clone(); tg.len()];
    let mut prev_delta = f64::INFINITY;
    let mut contraction = None;
    for sweep in 1..=opts.max_iter {
        let mut sum = vec![Complex64::new(0.0, 0.0); grid.len()];
        let mut first: Option<Vec<Complex64>> = None;
        let mut delta: f64 = 0.0;
        for m in (0..tg.len()).rev() {
            let phases = ev.phases(tg.time(m));
            let phys = ev.physical(&iterate[m], &phases);
            let v = ev.potential(&phys, &phys);
            let g = ev.pull_back(v.iter().zip(&phys).map(|(a, b)| a * b).collect(), &phases);
            let first_g = first.get_or_insert_with(|| g.clone());
            axpy(&mut sum, Complex64::new(1.0, 0.0), &g);
            let mut next = anchor.clone();
            if m + 1 < tg.len() {
                let mut partial = sum.clone();
                axpy(&mut partial, Complex64::new(-0.5, 0.0), first_g);
                axpy(&mut partial, Complex64::new(-0.5, 0.0), &g);
                axpy(&mut next, coef, &partial);
            }
            delta = delta.max(dist(&next, &iterate[m]) * dv);
            iterate[m] = next;
        }
        if sweep >= 2 && prev_delta.is_finite() && prev_delta > 0.0 {
            contraction = Some(delta / prev_delta);
        }
        if delta < opts.picard_tol {
            let u0 = ComplexField::from_values(&grid, iterate.swap_remove(0), Representation::Frequency)?.to_position();
            return Ok(ScatterResult {
                u_plus: u0,
                t_used: t,
                tail_estimate: tail.as_ref().map_or(0.0, |_| far_correction),
                iterations: sweep,
                contraction,
                far_correction,
                run: None,
            });
        }
        if sweep >= 3 && delta > prev_delta {
            return Err(Error::Contraction {
                factor: delta / prev_delta,
                iterations: sweep,
            });
        }
        prev_delta = delta;
    }
    Err(Error::Contraction {
        factor: contraction.unwrap_or(f64::NAN),
        iterations: opts.max_iter,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundTrip {
    /// `‖𝒲(𝒮(u_0)) - u_0‖₂ / ‖u_0‖₂`.
    pub forward: f64,
    /// `‖𝒮(𝒲(u_0)) - u_0‖₂ / ‖u_0‖₂`, with `u_0` read as a scattering state.
    pub reverse: f64,
    /// `‖𝒮(u_0) - u_0‖₂ / ‖u_0‖₂`, the size of the nonlinear effect being inverted.
    pub nonlinear_effect: f64,
    pub mass_in: f64,
    pub mass_scattered: f64,
    pub scatter: ScatterSummary,
    pub wave: ScatterSummary,
}

pub fn roundtrip_check(u0: &ComplexField, cfg: &SolverConfig, kernel: &HartreeKernel) -> Result<RoundTrip> {
    roundtrip_check_with(u0, cfg, kernel, &ScatterOptions::default())
}

pub fn roundtrip_check_with(
    u0: &ComplexField,
    cfg: &SolverConfig,
    kernel: &HartreeKernel,
    opts: &ScatterOptions,
) -> Result<RoundTrip> {
    let n0 = u0.l2_norm();
    if n0 == 0.0 {
        return Err(Error::InvalidParameter("round trip needs nonzero data".into()));
    }
    let s = scattering_state_with(u0, cfg, kernel, opts)?;
    let back = wave_operator_with(&s.u_plus, cfg, kernel, opts)?;
    let w = wave_operator_with(u0, cfg, kernel, opts)?;
    let sw = scattering_state_with(&w.u_plus, cfg, kernel, opts)?;
    Ok(RoundTrip {
        forward: back.u_plus.distance(u0) / n0,
        reverse: sw.u_plus.distance(u0) / n0,
        nonlinear_effect: s.u_plus.distance(&u0.to_position()) / n0,
        mass_in: mass(u0),
        mass_scattered: mass(&s.u_plus),
        scatter: s.summary(u0),
        wave: back.summary(&s.u_plus),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationRow {
    pub scale: f64,
    pub sigma_norm: f64,
    pub contraction: Option<f64>,
    pub converged: bool,
}

/// Empirical small-data radius: the largest `‖·‖_Σ` on a ladder of multiples of
/// `shape` whose measured Picard contraction factor is at most `1/2`.
#[derive(Debug, Clone, Serialize)]
pub struct Calibration {
    pub dim: usize,
    pub gamma: f64,
    pub rows: Vec<CalibrationRow>,
    pub radius: Option<f64>,
}

pub fn calibrate_radius(
    shape: &ComplexField,
    scales: &[f64],
    cfg: &SolverConfig,
    kernel: &HartreeKernel,
    opts: &ScatterOptions,
) -> Result<Calibration> {
    let mut rows = Vec::new();
    for &scale in scales {
        let u = shape.scale(Complex64::new(scale, 0.0));
        let (contraction, converged) = match wave_operator_with(&u, cfg, kernel, opts) {
            Ok(r) => (r.contraction, true),
            Err(Error::Contraction { factor, .. }) => (Some(factor), false),
            Err(e) => return Err(e),
        };
        rows.push(CalibrationRow {
            scale,
            sigma_norm: sigma_norm(&u),
            contraction,
            converged,
        });
    }
    let radius = rows
        .iter()
        .filter(|r| r.converged && r.contraction.is_some_and(|c| c <= 0.5))
        .map(|r| r.sigma_norm)
        .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.max(x))));
    Ok(Calibration {
        dim: shape.grid().dim(),
        gamma: kernel.gamma(),
        rows,
        radius,
    })
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;

    fn cfg(t: f64) -> SolverConfig {
        SolverConfig {
            wrap_threshold: 1.0,
            tol_energy: 1e-3,
            ..SolverConfig::new(0.01, 0.0, t)
        }
    }

    #[test]
    fn zero_data_is_fixed() {
        let g = Grid::new(2, 32, 8.0).unwrap();
        let k = HartreeKernel::new(&g, 1.5).unwrap();
        let z = ComplexField::zeros(&g);
        assert_eq!(scattering_state(&z, &cfg(0.2), &k).unwrap().u_plus.l2_norm(), 0.0);
        assert_eq!(wave_operator(&z, &cfg(0.2), &k).unwrap().u_plus.l2_norm(), 0.0);
    }

    #[test]
    fn free_flow_operators_are_identity() {
        let g = Grid::new(2, 32, 8.0).unwrap();
        let k = HartreeKernel::zero(&g, 1.5);
        let u = ComplexField::gaussian(&g, 0.3, 1.0, [0.0; 2], [0.5, 0.0]);
        let s = scattering_state(&u, &cfg(0.4), &k).unwrap();
        assert!(s.u_plus.distance(&u) < 1e-12);
        let w = wave_operator(&u, &cfg(0.4), &k).unwrap();
        assert!(w.u_plus.distance(&u) < 1e-12);
    }

    #[test]
    fn horizon_must_start_at_zero() {
        let g = Grid::new(2, 32, 8.0).unwrap();
        let k = HartreeKernel::new(&g, 1.5).unwrap();
        let u = ComplexField::gaussian(&g, 0.1, 1.0, [0.0; 2], [0.0; 2]);
        assert!(scattering_state(&u, &SolverConfig::new(0.01, 1.0, 2.0), &k).is_err());
    }
}
