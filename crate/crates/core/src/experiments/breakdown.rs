//! Breakdown-ratio sequences for `v_{ε,σ}` at the origin and around a small base datum.
//!
//! Everything measured on a scaled profile is integrated to `t = ∞`: the
//! march runs on `[0, T]` and the remaining interaction is added through the
//! lens form with the profiles frozen at `T`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{line_fit, LineFit};
use super::free_energy::{free_energy_integral, FreeEnergyConfig};
use super::{grid_for_sigma, make_scaled_on, WRAP_FRACTION};
use crate::duhamel::{Anchor, IterationControl, TimeGrid, I};
use crate::error::{Error, Result};
use crate::functionals::sigma_norm;
use crate::hierarchy::{march, multisets, permutations, verify_remainder, Base, HierarchyConfig, MarchSpec};
use crate::spectral::far_field::{chirp_threshold, trilinear_sums_far};
use crate::spectral::ops::free_propagate;
use crate::spectral::{ComplexField, HartreeKernel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Schedule {
    /// `ε = σ^{-j}`.
    Coupled { j: f64 },
    /// `ε` frozen while `σ` varies.
    Decoupled { eps: f64 },
}

impl Schedule {
    pub fn eps(&self, sigma: f64) -> f64 {
        match *self {
            Schedule::Coupled { j } => sigma.powf(-j),
            Schedule::Decoupled { eps } => eps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BreakdownConfig {
    /// Largest grid spacing on the σ grids.
    pub dx_max: f64,
    /// Upper limit standing in for `εσ ≪ 1`.
    pub max_eps_sigma: f64,
    pub free_energy: FreeEnergyConfig,
    /// Base-scale hierarchy used for the order-≥5 remainder at the origin.
    pub hierarchy: HierarchyConfig,
    /// Time step of the off-origin march.
    pub ds: f64,
    /// The off-origin horizon is this multiple of the largest chirp threshold.
    pub horizon_factor: f64,
    pub panels: usize,
    /// Calibrated small-data radius `R`; required off the origin.
    pub radius: Option<f64>,
    /// Also march `u_0 + v_{ε,σ}` and tabulate the scattering-side remainder.
    pub measure_scattering: bool,
    pub control: IterationControl,
}

impl Default for BreakdownConfig {
    fn default() -> Self {
        BreakdownConfig {
            dx_max: 0.55,
            max_eps_sigma: 0.25,
            free_energy: FreeEnergyConfig::default(),
            hierarchy: HierarchyConfig {
                horizon: 4.0,
                ds: 0.02,
                ledger: false,
                ..Default::default()
            },
            ds: 0.05,
            horizon_factor: 1.25,
            panels: 2,
            radius: None,
            measure_scattering: false,
            control: IterationControl::default(),
        }
    }
}

fn check(problems: Vec<String>) -> Result<()> {
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Schedule(problems.join("; ")))
    }
}

fn schedule_problems(schedule: &Schedule, sigmas: &[f64], max_eps_sigma: f64) -> Vec<String> {
    let mut problems = Vec::new();
    if sigmas.is_empty() {
        problems.push("σ schedule is empty".to_string());
    }
    if let Schedule::Decoupled { eps } = *schedule {
        if !(eps > 0.0 && eps < 1.0) {
            problems.push(format!("ε must lie in (0, 1), got {eps}"));
        }
    }
    for &sigma in sigmas {
        if !(sigma > 1.0) {
            problems.push(format!("σ must exceed 1, got {sigma}"));
            continue;
        }
        let es = schedule.eps(sigma) * sigma;
        if es > max_eps_sigma {
            problems.push(format!(
                "εσ = {es:.4} at σ = {sigma} violates εσ ≪ 1 (limit {max_eps_sigma})"
            ));
        }
    }
    problems
}

/// Admissibility of an origin schedule; every violated condition is reported.
pub fn validate_origin(gamma: f64, s: f64, schedule: &Schedule, sigmas: &[f64], max_eps_sigma: f64) -> Result<()> {
    let mut problems = Vec::new();
    let s_min = (5.0 + 5.0 * gamma) / (3.0 + gamma);
    if s <= s_min {
        problems.push(format!("s must exceed (5+5γ)/(3+γ) = {s_min:.4}; no admissible j exists"));
    }
    if let Schedule::Coupled { j } = *schedule {
        let j_min = (3.0 + gamma) / 2.0;
        if j <= j_min {
            problems.push(format!("j must exceed (3+γ)/2 = {j_min:.4}, got {j}"));
        }
        if s < 3.0 {
            let j_max = (2.0 - gamma) / (3.0 - s);
            if j >= j_max {
                problems.push(format!("j must stay below (2-γ)/(3-s) = {j_max:.4}, got {j}"));
            }
        }
    }
    problems.extend(schedule_problems(schedule, sigmas, max_eps_sigma));
    check(problems)
}

/// Admissibility of an off-origin schedule, including the small-data radius.
pub fn validate_off_origin(
    gamma: f64,
    s: f64,
    schedule: &Schedule,
    sigmas: &[f64],
    u0_sigma_norm: f64,
    radius: Option<f64>,
    max_eps_sigma: f64,
) -> Result<()> {
    let mut problems = Vec::new();
    if let Schedule::Coupled { j } = *schedule {
        let s_min = (4.0 + 4.0 * gamma) / (2.0 + gamma);
        if s <= s_min {
            problems.push(format!("s must exceed (4+4γ)/(2+γ) = {s_min:.4}"));
        }
        if j <= 2.0 + gamma {
            problems.push(format!("j must exceed 2+γ = {:.4}, got {j}", 2.0 + gamma));
        }
    }
    match radius {
        None => problems.push("no calibrated radius R supplied".to_string()),
        Some(r) if u0_sigma_norm >= r => problems.push(format!(
            "‖u0‖_Σ = {u0_sigma_norm:.4} must stay below the calibrated radius R = {r:.4}"
        )),
        _ => {}
    }
    problems.extend(schedule_problems(schedule, sigmas, max_eps_sigma));
    check(problems)
}

fn slopes(sigmas: &[f64], values: &[f64]) -> Vec<f64> {
    sigmas
        .windows(2)
        .zip(values.windows(2))
        .map(|(s, v)| (v[1] / v[0]).ln() / (s[1] / s[0]).ln())
        .collect()
}

fn log_fit(sigmas: &[f64], values: &[f64]) -> Option<LineFit> {
    if values.iter().any(|v| !(*v > 0.0)) || sigmas.len() < 2 {
        return None;
    }
    let x: Vec<f64> = sigmas.iter().map(|s| s.ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    line_fit(&x, &y).ok()
}

#[derive(Debug, Clone, Serialize)]
pub struct OriginRow {
    pub sigma: f64,
    pub eps: f64,
    pub grid_n: usize,
    pub half_width: f64,
    /// `‖v_{ε,σ}‖₂`.
    pub l2: f64,
    /// `∫_0^T Q(e^{isΔ}v_{ε,σ}) ds`.
    pub free_energy: f64,
    /// Free energy divided by `‖v_{ε,σ}‖₂`.
    pub main: f64,
    /// Measured order-≥5 remainder, transported from the base scale.
    pub remainder: f64,
    /// Base-scale amplitude `εσ^{(2-γ)/2}` at which the remainder was measured.
    pub base_amplitude: f64,
    pub remainder_over_main: f64,
    /// `(main - remainder) / ‖v_{ε,σ}‖₂^s`.
    pub ratio: f64,
    pub unreliable: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OriginTable {
    pub gamma: f64,
    pub s: f64,
    pub schedule: Schedule,
    pub rows: Vec<OriginRow>,
    /// Log-log slopes of the ratio between consecutive σ.
    pub slopes: Vec<f64>,
    pub fit: Option<LineFit>,
    pub expected_slope: f64,
    pub monotone: bool,
}

/// Breakdown ratio at `u_0 = 0`. The main term is the free-energy quadrature
/// of `v_{ε,σ}` on its own grid. The remainder uses the exact scaling symmetry:
/// `v_{ε,σ}` is the symmetry image of `εσ^{(2-γ)/2} v`, so its remainder equals
/// `σ^{-(2-γ)/2}` times the base-scale remainder at that amplitude.
pub fn breakdown_origin(
    v: &ComplexField,
    kernel: &HartreeKernel,
    s: f64,
    schedule: Schedule,
    sigmas: &[f64],
    cfg: &BreakdownConfig,
) -> Result<OriginTable> {
    let gamma = kernel.gamma();
    validate_origin(gamma, s, &schedule, sigmas, cfg.max_eps_sigma)?;
    if !v.grid().same_as(kernel.grid()) {
        return Err(Error::GridMismatch);
    }
    let v = v.to_position();
    let radius = v.mass_radius(WRAP_FRACTION);
    let d = v.grid().dim();
    let h = (2.0 - gamma) / 2.0;
    let amplitudes: Vec<f64> = sigmas.iter().map(|&sg| schedule.eps(sg) * sg.powf(h)).collect();
    let zero = ComplexField::zeros(v.grid());
    let remainders = verify_remainder(&zero, &v, &amplitudes, 3, kernel, &cfg.hierarchy)?;
    let points: Vec<(f64, f64, f64)> = sigmas
        .iter()
        .zip(&amplitudes)
        .zip(&remainders.rows)
        .map(|((s, a), r)| (*s, *a, r.remainders[3]))
        .collect();
    let rows: Vec<OriginRow> = points
        .par_iter()
        .map(|&(sigma, amp, base_remainder)| -> Result<OriginRow> {
            let eps = schedule.eps(sigma);
            let grid = grid_for_sigma(d, radius, sigma, cfg.dx_max)?;
            let k = HartreeKernel::with_policy(&grid, gamma, kernel.policy())?;
            let field = make_scaled_on(&v, eps, sigma, &grid)?;
            let fe = free_energy_integral(&field, &k, &cfg.free_energy)?;
            let l2 = field.l2_norm();
            let main = fe.value / l2;
            let remainder = sigma.powf(-h) * base_remainder;
            Ok(OriginRow {
                sigma,
                eps,
                grid_n: grid.n(),
                half_width: grid.half_width(),
                l2,
                free_energy: fe.value,
                main,
                remainder,
                base_amplitude: amp,
                remainder_over_main: remainder / main,
                ratio: (main - remainder) / l2.powf(s),
                unreliable: fe.unreliable,
            })
        })
        .collect::<Result<_>>()?;
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let slopes = slopes(sigmas, &ratios);
    let expected_slope = match schedule {
        Schedule::Coupled { j } => (s - 3.0) * j + 2.0 - gamma,
        Schedule::Decoupled { .. } => 2.0 - gamma,
    };
    Ok(OriginTable {
        gamma,
        s,
        schedule,
        monotone: ratios.windows(2).all(|w| w[1] > w[0]),
        fit: log_fit(sigmas, &ratios),
        slopes,
        rows,
        expected_slope,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OffOriginRow {
    pub sigma: f64,
    pub eps: f64,
    pub grid_n: usize,
    pub half_width: f64,
    pub horizon: f64,
    pub l2: f64,
    /// `‖S𝒩(u,u,w_3)‖₂`.
    pub part_uuw3: f64,
    /// `‖S𝒩(u,w_1,w_2)‖₂`.
    pub part_uw1w2: f64,
    /// `‖𝒩(w_1,w_1,w_1)‖₂`.
    pub resonant: f64,
    /// Nonresonant parts over the resonant part.
    pub nonresonant_ratio: f64,
    pub w1_plus: f64,
    pub w2_plus: f64,
    pub w3_plus: f64,
    /// Share of `‖w_3^+‖` contributed after the horizon.
    pub w3_tail_share: f64,
    /// Smallest stored time with `‖e^{isΔ}w_1^+ - w_1(s)‖₂ < 0.1 ‖w_1^+‖₂`.
    pub tau: Option<f64>,
    /// `‖𝒮(u_0+v) - 𝒮(u_0) - w_1^+ - w_2^+‖₂ / ‖v‖₂^s`, when measured.
    pub scattering_ratio: Option<f64>,
    pub max_contraction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OffOriginTable {
    pub gamma: f64,
    pub s: f64,
    pub schedule: Schedule,
    pub u0_sigma_norm: f64,
    pub radius: f64,
    pub rows: Vec<OffOriginRow>,
    pub resonant_fit: Option<LineFit>,
    /// `3·(ε-exponent) + 2 - γ` along the schedule.
    pub expected_resonant_slope: f64,
    /// Nonresonant-to-resonant ratio decreases along σ.
    pub dominance_growing: bool,
}

pub fn breakdown_off_origin(
    u0: &ComplexField,
    v: &ComplexField,
    kernel: &HartreeKernel,
    s: f64,
    schedule: Schedule,
    sigmas: &[f64],
    cfg: &BreakdownConfig,
) -> Result<OffOriginTable> {
    let gamma = kernel.gamma();
    let u0_norm = sigma_norm(u0);
    validate_off_origin(gamma, s, &schedule, sigmas, u0_norm, cfg.radius, cfg.max_eps_sigma)?;
    let rows: Vec<OffOriginRow> = sigmas
        .par_iter()
        .map(|&sigma| off_origin_point(u0, v, kernel, s, schedule.eps(sigma), sigma, cfg))
        .collect::<Result<_>>()?;
    let resonant: Vec<f64> = rows.iter().map(|r| r.resonant).collect();
    let expected_resonant_slope = match schedule {
        Schedule::Coupled { j } => -3.0 * j + 2.0 - gamma,
        Schedule::Decoupled { .. } => 2.0 - gamma,
    };
    Ok(OffOriginTable {
        gamma,
        s,
        schedule,
        u0_sigma_norm: u0_norm,
        radius: cfg.radius.expect("validated"),
        dominance_growing: rows.windows(2).all(|w| w[1].nonresonant_ratio < w[0].nonresonant_ratio),
        resonant_fit: log_fit(sigmas, &resonant),
        rows,
        expected_resonant_slope,
    })
}

/// One off-origin point: the hierarchy to order 3 around `u_0` with direction
/// `v_{ε,σ}`, its `w_3` forcing split by index multiset, all continued to `∞`.
pub fn off_origin_point(
    u0: &ComplexField,
    v: &ComplexField,
    kernel: &HartreeKernel,
    s: f64,
    eps: f64,
    sigma: f64,
    cfg: &BreakdownConfig,
) -> Result<OffOriginRow> {
    let gamma = kernel.gamma();
    let d = v.grid().dim();
    let radius = v.to_position().mass_radius(WRAP_FRACTION);
    let grid = grid_for_sigma(d, radius, sigma, cfg.dx_max)?;
    let k = HartreeKernel::with_policy(&grid, gamma, kernel.policy())?;
    let dual = k.on_grid(&grid.dual())?;
    let base = make_scaled_on(u0, 1.0, 1.0, &grid)?;
    let dir = make_scaled_on(v, eps, sigma, &grid)?;
    let mut horizon = cfg.horizon_factor * chirp_threshold(&dir).max(chirp_threshold(&base));
    let extras = if cfg.measure_scattering {
        vec![base.add(&dir)]
    } else {
        Vec::new()
    };
    for _attempt in 0..3 {
        let tg = TimeGrid::with_spacing(horizon, cfg.ds)?;
        let mut spec = MarchSpec::new(&k, Anchor::Initial, tg, Base::Data(&base));
        spec.order = 3;
        spec.direction = Some(&dir);
        spec.parts_order = Some(3);
        spec.extras = extras.clone();
        spec.record_every = Some(tg.intervals / 4);
        spec.control = cfg.control;
        let out = march(&spec)?;
        let needed = out
            .far
            .iter()
            .chain(&out.extras_far)
            .map(chirp_threshold)
            .fold(0.0, f64::max);
        if needed > horizon {
            horizon = cfg.horizon_factor * needed;
            continue;
        }

        let ordered = |n: usize| -> Vec<[usize; 3]> { multisets(n).into_iter().flat_map(permutations).collect() };
        let mut groups = vec![ordered(1), ordered(2)];
        groups.extend(out.parts.iter().map(|p| permutations(p.indices)));
        let mut tails = trilinear_sums_far(&out.far, &groups, &dual, horizon, f64::INFINITY, cfg.panels)?;
        let with_tail = |value: &ComplexField, tail: &ComplexField| {
            let mut f = value.clone();
            f.axpy(-I, tail);
            f
        };
        let w1p = with_tail(&out.far[1], &tails[0]);
        let w2p = with_tail(&out.far[2], &tails[1]);
        let parts: Vec<ComplexField> = out
            .parts
            .iter()
            .zip(&tails[2..])
            .map(|(p, t)| with_tail(&p.value, t))
            .collect();
        let pick = |m: [usize; 3]| {
            out.parts
                .iter()
                .position(|p| p.indices == m)
                .map(|i| parts[i].l2_norm())
                .unwrap_or(0.0)
        };
        let (p003, p012, p111) = (pick([0, 0, 3]), pick([0, 1, 2]), pick([1, 1, 1]));
        let mut w3p = ComplexField::zeros(&grid);
        for p in &parts {
            w3p.axpy(Complex64::new(1.0, 0.0), p);
        }
        let w3_far = out.far[3].l2_norm();
        let w1_traj = out.trajectory(1)?;
        let threshold = 0.1 * w1p.l2_norm();
        let tau = w1_traj
            .times()
            .iter()
            .zip(w1_traj.fields())
            .find(|(t, f)| free_propagate(&w1p, **t).distance(f) < threshold)
            .map(|(t, _)| *t);
        let l2 = dir.l2_norm();
        let scattering_ratio = if cfg.measure_scattering {
            let base_plus = {
                tails = trilinear_sums_far(
                    &[out.far[0].clone(), out.extras_far[0].clone()],
                    &[vec![[0, 0, 0]], vec![[1, 1, 1]]],
                    &dual,
                    horizon,
                    f64::INFINITY,
                    cfg.panels,
                )?;
                (with_tail(&out.far[0], &tails[0]), with_tail(&out.extras_far[0], &tails[1]))
            };
            let mut r = base_plus.1.sub(&base_plus.0);
            r.axpy(Complex64::new(-1.0, 0.0), &w1p);
            r.axpy(Complex64::new(-1.0, 0.0), &w2p);
            Some(r.l2_norm() / l2.powf(s))
        } else {
            None
        };
        return Ok(OffOriginRow {
            sigma,
            eps,
            grid_n: grid.n(),
            half_width: grid.half_width(),
            horizon,
            l2,
            part_uuw3: p003,
            part_uw1w2: p012,
            resonant: p111,
            nonresonant_ratio: (p003 + p012) / p111,
            w1_plus: w1p.l2_norm(),
            w2_plus: w2p.l2_norm(),
            w3_plus: w3p.l2_norm(),
            w3_tail_share: w3p.distance(&out.far[3]) / w3p.l2_norm().max(w3_far),
            tau,
            scattering_ratio,
            max_contraction: out.stats.iter().map(|s| s.max_contraction).fold(0.0, f64::max),
        });
    }
    Err(Error::Horizon {
        tail: horizon,
        tol: cfg.horizon_factor,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RadiusRow {
    pub scale: f64,
    pub u0_sigma_norm: f64,
    pub nonresonant_ratio: f64,
}

/// Nonresonant-to-resonant ratio at fixed `(ε, σ)` as the base datum is scaled,
/// fitted to `C R^β`.
#[derive(Debug, Clone, Serialize)]
pub struct RadiusSweep {
    pub sigma: f64,
    pub eps: f64,
    pub rows: Vec<RadiusRow>,
    /// Free log-log slope `β`.
    pub fit: Option<LineFit>,
    /// `C` from the fit with `β = 2` fixed (geometric mean of ratio / R²).
    pub c_fit: f64,
    /// Largest `ratio / (C R²)`.
    pub max_excess: f64,
}

pub fn dominance_vs_radius(
    u0: &ComplexField,
    v: &ComplexField,
    kernel: &HartreeKernel,
    eps: f64,
    sigma: f64,
    scales: &[f64],
    cfg: &BreakdownConfig,
) -> Result<RadiusSweep> {
    let rows: Vec<RadiusRow> = scales
        .par_iter()
        .map(|&scale| -> Result<RadiusRow> {
            let u = u0.scale(Complex64::new(scale, 0.0));
            let r = sigma_norm(&u);
            if let Some(limit) = cfg.radius {
                if r >= limit {
                    return Err(Error::Schedule(format!(
                        "‖u0‖_Σ = {r:.4} must stay below the calibrated radius R = {limit:.4}"
                    )));
                }
            }
            let row = off_origin_point(&u, v, kernel, 3.0, eps, sigma, cfg)?;
            Ok(RadiusRow {
                scale,
                u0_sigma_norm: r,
                nonresonant_ratio: row.nonresonant_ratio,
            })
        })
        .collect::<Result<_>>()?;
    let x: Vec<f64> = rows.iter().map(|r| r.u0_sigma_norm).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.nonresonant_ratio).collect();
    let fit = log_fit(&x, &y);
    let logs: Vec<f64> = rows.iter().map(|r| (r.nonresonant_ratio / r.u0_sigma_norm.powi(2)).ln()).collect();
    let c_fit = (logs.iter().sum::<f64>() / logs.len().max(1) as f64).exp();
    let max_excess = rows
        .iter()
        .map(|r| r.nonresonant_ratio / (c_fit * r.u0_sigma_norm.powi(2)))
        .fold(0.0, f64::max);
    Ok(RadiusSweep {
        sigma,
        eps,
        rows,
        fit,
        c_fit,
        max_excess,
    })
}
