//! Split-step time integration with conservation and wrap-around monitoring.

use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{energy, mass};
use crate::spectral::ops::convolve_in_place;
use crate::spectral::{ComplexField, Grid, HartreeKernel, Representation};
use crate::trajectory::{Picture, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Second-order Strang splitting.
    Strang,
    /// Fourth-order triple-jump composition of Strang steps.
    Yoshida4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Magnitude of the time step; its sign is taken from `t_span`.
    pub dt: f64,
    pub t_span: (f64, f64),
    /// Store every `record_every`-th step (the final step is always stored).
    pub record_every: usize,
    pub tol_mass: f64,
    pub tol_energy: f64,
    pub dealias: bool,
    /// Validity horizon: `|t|` may not exceed it.
    pub t_max: f64,
    /// Largest admissible mass fraction outside radius `L/2`.
    pub wrap_threshold: f64,
    pub scheme: Scheme,
    /// Evaluate the energy at every stored step and enforce `tol_energy`.
    pub monitor_energy: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: 1e-2,
            t_span: (0.0, 1.0),
            record_every: 10,
            tol_mass: 1e-10,
            tol_energy: 1e-4,
            dealias: true,
            t_max: 1e6,
            wrap_threshold: 1e-8,
            scheme: Scheme::Strang,
            monitor_energy: true,
        }
    }
}

impl SolverConfig {
    pub fn new(dt: f64, t0: f64, t1: f64) -> Self {
        SolverConfig {
            dt,
            t_span: (t0, t1),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.dt > 0.0) {
            problems.push(format!("dt must be positive, got {}", self.dt));
        }
        if self.t_span.0 == self.t_span.1 || !self.t_span.0.is_finite() || !self.t_span.1.is_finite() {
            problems.push("t_span endpoints must be finite and distinct".to_string());
        }
        for (name, tol) in [("tol_mass", self.tol_mass), ("tol_energy", self.tol_energy)] {
            if !(tol > 0.0 && tol < 1.0) {
                problems.push(format!("{name} must lie in (0, 1), got {tol}"));
            }
        }
        if self.record_every == 0 {
            problems.push("record_every must be at least 1".to_string());
        }
        if self.t_span.0.abs().max(self.t_span.1.abs()) > self.t_max {
            problems.push(format!(
                "t_span {:?} exceeds the validity horizon T_max = {}",
                self.t_span, self.t_max
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(problems.join("; ")))
        }
    }

    /// Number of steps and the signed step that lands exactly on `t1`.
    pub fn steps(&self) -> (usize, f64) {
        let span = self.t_span.1 - self.t_span.0;
        let n = (span.abs() / self.dt).round().max(1.0) as usize;
        (n, span / n as f64)
    }
}

/// Diagnostics gathered during [`evolve_with_report`].
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub steps: usize,
    pub step: f64,
    pub max_mass_drift: f64,
    pub max_energy_drift: Option<f64>,
    pub max_wrap_fraction: f64,
    pub initial_mass: f64,
    pub initial_energy: Option<f64>,
    pub wall_time_s: f64,
    pub config: SolverConfig,
}

struct Stepper<'a> {
    kernel: &'a HartreeKernel,
    grid: Grid,
    substeps: Vec<(f64, Vec<Complex64>)>,
    scratch: Vec<Complex64>,
}

impl<'a> Stepper<'a> {
    fn new(kernel: &'a HartreeKernel, h: f64, scheme: Scheme) -> Self {
        let grid = kernel.grid().clone();
        let weights: Vec<f64> = match scheme {
            Scheme::Strang => vec![1.0],
            Scheme::Yoshida4 => {
                let c = 2f64.powf(1.0 / 3.0);
                let w1 = 1.0 / (2.0 - c);
                vec![w1, -c * w1, w1]
            }
        };
        let substeps = weights
            .iter()
            .map(|w| {
                let tau = w * h;
                let half = grid.k2().iter().map(|k2| Complex64::from_polar(1.0, -k2 * tau / 2.0)).collect();
                (tau, half)
            })
            .collect();
        Stepper {
            kernel,
            scratch: vec![Complex64::new(0.0, 0.0); grid.len()],
            grid,
            substeps,
        }
    }

    /// Advances frequency samples by one step.
    fn step(&mut self, hat: &mut [Complex64]) {
        for (tau, half) in &self.substeps {
            hat.iter_mut().zip(half).for_each(|(z, p)| *z *= p);
            self.grid.fft_in_place(hat, true);
            for (s, z) in self.scratch.iter_mut().zip(hat.iter()) {
                *s = Complex64::new(z.norm_sqr(), 0.0);
            }
            convolve_in_place(self.kernel, &mut self.scratch);
            for (z, v) in hat.iter_mut().zip(&self.scratch) {
                *z *= Complex64::from_polar(1.0, -tau * v.re);
            }
            self.grid.fft_in_place(hat, false);
            hat.iter_mut().zip(half).for_each(|(z, p)| *z *= p);
        }
    }
}

/// One Strang step: half kinetic, nonlinear phase `e^{-i dt V}` with
/// `V = |x|^-γ * |u|²`, half kinetic. Negative `dt` steps backwards.
pub fn step_strang(u: &ComplexField, dt: f64, kernel: &HartreeKernel) -> Result<ComplexField> {
    u.expect(Representation::Position)?;
    if !u.grid().same_as(kernel.grid()) {
        return Err(Error::GridMismatch);
    }
    let mut hat = u.to_frequency().into_values();
    Stepper::new(kernel, dt, Scheme::Strang).step(&mut hat);
    ComplexField::from_values(u.grid(), hat, Representation::Frequency).map(|f| f.to_position())
}

pub fn evolve(u0: &ComplexField, cfg: &SolverConfig, kernel: &HartreeKernel) -> Result<Trajectory> {
    evolve_with_report(u0, cfg, kernel).map(|(t, _)| t)
}

/// Integrates from `t_span.0` to `t_span.1`, aborting on mass drift, energy
/// drift or wrap-around breaches.
pub fn evolve_with_report(
    u0: &ComplexField,
    cfg: &SolverConfig,
    kernel: &HartreeKernel,
) -> Result<(Trajectory, RunReport)> {
    cfg.validate()?;
    if !u0.grid().same_as(kernel.grid()) {
        return Err(Error::GridMismatch);
    }
    let start = Instant::now();
    let kernel = kernel.clone().with_dealias(cfg.dealias);
    let grid = u0.grid().clone();
    let (steps, h) = cfg.steps();
    let t0 = cfg.t_span.0;
    let u0 = u0.to_position();
    let m0 = mass(&u0);
    let e0 = cfg.monitor_energy.then(|| energy(&u0, &kernel));
    let radius = grid.half_width() / 2.0;

    let mut report = RunReport {
        steps,
        step: h,
        max_mass_drift: 0.0,
        max_energy_drift: e0.map(|_| 0.0),
        max_wrap_fraction: 0.0,
        initial_mass: m0,
        initial_energy: e0,
        wall_time_s: 0.0,
        config: *cfg,
    };

    let check = |u: &ComplexField, t: f64, report: &mut RunReport| -> Result<()> {
        let drift = relative_drift(mass(u), m0);
        report.max_mass_drift = report.max_mass_drift.max(drift);
        if drift > cfg.tol_mass {
            return Err(Error::MassDrift {
                drift,
                tol: cfg.tol_mass,
                t,
            });
        }
        if let Some(e0) = e0 {
            let drift = relative_drift(energy(u, &kernel), e0);
            let worst = report.max_energy_drift.get_or_insert(0.0);
            *worst = worst.max(drift);
            if drift > cfg.tol_energy {
                return Err(Error::EnergyDrift {
                    drift,
                    tol: cfg.tol_energy,
                    t,
                });
            }
        }
        let fraction = u.mass_fraction_outside(radius);
        report.max_wrap_fraction = report.max_wrap_fraction.max(fraction);
        if fraction > cfg.wrap_threshold {
            return Err(Error::WrapAround { t, fraction });
        }
        Ok(())
    };

    check(&u0, t0, &mut report)?;
    let mut times = vec![t0];
    let mut fields = vec![u0.clone()];
    let mut stepper = Stepper::new(&kernel, h, cfg.scheme);
    let mut hat = u0.to_frequency().into_values();
    for i in 1..=steps {
        stepper.step(&mut hat);
        if i % cfg.record_every == 0 || i == steps {
            let t = t0 + i as f64 * h;
            let u = ComplexField::from_values(&grid, hat.clone(), Representation::Frequency)?.to_position();
            check(&u, t, &mut report)?;
            times.push(t);
            fields.push(u);
        }
    }
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok((Trajectory::new(times, fields, Picture::Physical)?, report))
}

fn relative_drift(value: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        value.abs()
    } else {
        ((value - reference) / reference).abs()
    }
}

/// `e^{-itΔ} u(t)` at every stored sample.
pub fn interaction_profile(traj: &Trajectory) -> Result<Trajectory> {
    traj.to_interaction()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::free_propagate;

    fn setup() -> (Grid, HartreeKernel, ComplexField) {
        let g = Grid::new(2, 64, 12.0).unwrap();
        let k = HartreeKernel::new(&g, 1.5).unwrap();
        let u = ComplexField::gaussian(&g, 0.5, 1.0, [0.0; 2], [0.3, 0.0]);
        (g, k, u)
    }

    #[test]
    fn zero_kernel_gives_free_flow() {
        let (g, _, u) = setup();
        let k = HartreeKernel::zero(&g, 1.5);
        let a = step_strang(&u, 0.1, &k).unwrap();
        let b = free_propagate(&u, 0.1);
        assert!(a.distance(&b) < 1e-13 * u.l2_norm());
    }

    #[test]
    fn step_preserves_mass() {
        let (_, k, u) = setup();
        let a = step_strang(&u, 0.1, &k).unwrap();
        assert!((mass(&a) - mass(&u)).abs() < 1e-13 * mass(&u));
    }

    #[test]
    fn config_validation_lists_every_problem() {
        let cfg = SolverConfig {
            dt: -1.0,
            tol_mass: 2.0,
            ..Default::default()
        };
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("dt must be positive"));
        assert!(msg.contains("tol_mass"));
    }

    #[test]
    fn backward_solve_uses_negative_step() {
        let cfg = SolverConfig::new(0.1, 1.0, 0.0);
        let (n, h) = cfg.steps();
        assert_eq!(n, 10);
        assert!((h + 0.1).abs() < 1e-15);
    }

    #[test]
    fn wrap_monitor_aborts() {
        let g = Grid::new(2, 32, 4.0).unwrap();
        let k = HartreeKernel::new(&g, 1.5).unwrap();
        let u = ComplexField::gaussian(&g, 0.1, 1.0, [0.0; 2], [0.0; 2]);
        let cfg = SolverConfig::new(0.05, 0.0, 3.0);
        assert!(matches!(evolve(&u, &cfg, &k), Err(Error::WrapAround { .. })));
    }
}
