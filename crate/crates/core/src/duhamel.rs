//! Trapezoid discretization of Duhamel integral equations in the interaction picture.
//!
//! On a uniform grid `s_0 < .. < s_M` a profile `P(t) = e^{-itΔ}w(t)` obeys
//!
//! * initial anchor: `P_m = P_0 - i Σ'_{0..m} h G_k`
//! * final anchor:   `P_m = P_M + i Σ'_{m..M} h G_k`
//!
//! where `G(s) = e^{-isΔ} F(s)` is the forcing pulled back to the interaction
//! picture and `Σ'` is the composite trapezoid sum. Both systems are solved by
//! marching away from the anchor; at each sample the implicit equation is
//! solved by fixed-point iteration.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::ops::convolve_in_place;
use crate::spectral::{ComplexField, Grid, HartreeKernel, Representation};

pub(crate) const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub(crate) const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    /// Data prescribed at `t = 0`; integrals run over `[0, t]`.
    Initial,
    /// Data prescribed at the horizon `T`; integrals run over `[t, T]`.
    Final,
}

/// Uniform grid `s_m = m T / M`, `m = 0..=M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub horizon: f64,
    pub intervals: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, intervals: usize) -> Result<Self> {
        if !(horizon > 0.0) || intervals == 0 {
            return Err(Error::InvalidParameter(format!(
                "time grid needs a positive horizon and at least one interval, got T = {horizon}, M = {intervals}"
            )));
        }
        Ok(TimeGrid { horizon, intervals })
    }

    /// Grid with spacing at most `ds`, the interval count rounded up to a multiple of 4.
    pub fn with_spacing(horizon: f64, ds: f64) -> Result<Self> {
        let m = (horizon / ds).ceil().max(1.0) as usize;
        Self::new(horizon, m.div_ceil(4) * 4)
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.intervals as f64
    }

    pub fn time(&self, m: usize) -> f64 {
        m as f64 * self.step()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.intervals).map(|m| self.time(m)).collect()
    }

    pub fn len(&self) -> usize {
        self.intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Recovers the grid from stored sample times, which must start at 0 and be uniform.
    pub fn from_times(times: &[f64]) -> Result<Self> {
        if times.len() < 2 || times[0] != 0.0 {
            return Err(Error::InvalidParameter("time grid must start at 0 with at least two samples".into()));
        }
        let g = TimeGrid::new(*times.last().unwrap(), times.len() - 1)?;
        let h = g.step();
        if times
            .iter()
            .enumerate()
            .any(|(m, t)| (t - m as f64 * h).abs() > 1e-9 * h)
        {
            return Err(Error::InvalidParameter("time grid must be uniform".into()));
        }
        Ok(g)
    }
}

/// Scratch space and kernels for evaluating trilinear forcings.
pub(crate) struct Evaluator<'a> {
    pub kernel: &'a HartreeKernel,
    pub grid: Grid,
    keep: Vec<bool>,
}

impl<'a> Evaluator<'a> {
    pub fn new(kernel: &'a HartreeKernel) -> Self {
        let grid = kernel.grid().clone();
        let keep = (0..grid.len()).map(|i| !kernel.dealias() || grid.dealias_keep(i)).collect();
        Evaluator { kernel, grid, keep }
    }

    /// `e^{-i|ξ|² s}` on the frequency lattice.
    pub fn phases(&self, s: f64) -> Vec<Complex64> {
        self.grid.k2().iter().map(|k2| Complex64::from_polar(1.0, -k2 * s)).collect()
    }

    /// Physical samples from a profile spectrum.
    pub fn physical(&self, profile: &[Complex64], phases: &[Complex64]) -> Vec<Complex64> {
        let mut out: Vec<Complex64> = profile.iter().zip(phases).map(|(p, e)| p * e).collect();
        self.grid.fft_in_place(&mut out, true);
        out
    }

    /// `|x|^-γ * (a conj b)`.
    pub fn potential(&self, a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
        let mut rho: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x * y.conj()).collect();
        convolve_in_place(self.kernel, &mut rho);
        rho
    }

    /// Profile spectrum `e^{-isΔ} f` of physical samples `f`.
    pub fn profile(&self, mut samples: Vec<Complex64>, phases: &[Complex64]) -> Vec<Complex64> {
        self.grid.fft_in_place(&mut samples, false);
        for (z, e) in samples.iter_mut().zip(phases) {
            *z *= e.conj();
        }
        samples
    }

    /// Interaction-picture spectrum `e^{-isΔ} P F` of a physical forcing `F`,
    /// `P` the dealiasing projection.
    pub fn pull_back(&self, mut forcing: Vec<Complex64>, phases: &[Complex64]) -> Vec<Complex64> {
        self.grid.fft_in_place(&mut forcing, false);
        for ((z, e), keep) in forcing.iter_mut().zip(phases).zip(&self.keep) {
            *z = if *keep { *z * e.conj() } else { ZERO };
        }
        forcing
    }
}

pub(crate) fn axpy(y: &mut [Complex64], a: Complex64, x: &[Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub(crate) fn norm(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn dist(x: &[Complex64], y: &[Complex64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
}

/// Stopping rule for fixed-point iterations: relative change below `tol`, or
/// stagnation at the roundoff floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationControl {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IterationControl {
    fn default() -> Self {
        IterationControl {
            tol: 1e-14,
            max_iter: 60,
        }
    }
}

pub(crate) struct LocalSolution {
    pub profile: Vec<Complex64>,
    pub physical: Vec<Complex64>,
    pub forcing: Vec<Complex64>,
    pub iterations: usize,
    /// Ratio of the last two successive changes, a measured contraction factor.
    pub contraction: f64,
}

/// Solves `P = base + c G(P)` at one sample by fixed-point iteration. `forcing`
/// maps a profile to its physical samples and its forcing spectrum `G(P)`.
pub(crate) fn solve_local(
    base: &[Complex64],
    c: Complex64,
    guess: Vec<Complex64>,
    control: IterationControl,
    mut forcing: impl FnMut(&[Complex64]) -> (Vec<Complex64>, Vec<Complex64>),
) -> Result<LocalSolution> {
    let mut p = guess;
    let mut prev_change = f64::INFINITY;
    let mut contraction = 0.0;
    for it in 1..=control.max_iter {
        let (_, g) = forcing(&p);
        let mut next = base.to_vec();
        axpy(&mut next, c, &g);
        let change = dist(&next, &p);
        let scale = norm(&next).max(f64::MIN_POSITIVE);
        p = next;
        if prev_change.is_finite() && prev_change > 0.0 && change > 1e3 * f64::EPSILON * scale {
            contraction = change / prev_change;
        }
        let converged = change <= control.tol * scale;
        let stagnated = change >= 0.5 * prev_change && change <= 1e3 * f64::EPSILON * scale;
        if converged || stagnated || change == 0.0 {
            let (physical, forcing) = forcing(&p);
            return Ok(LocalSolution {
                profile: p,
                physical,
                forcing,
                iterations: it,
                contraction,
            });
        }
        if it > 8 && change > prev_change {
            return Err(Error::Contraction {
                factor: change / prev_change,
                iterations: it,
            });
        }
        prev_change = change;
    }
    Err(Error::Contraction {
        factor: contraction,
        iterations: control.max_iter,
    })
}

/// Running trapezoid accumulator for one unknown.
#[derive(Clone)]
pub(crate) struct Accumulator {
    sum: Vec<Complex64>,
    first: Option<Vec<Complex64>>,
    last: Option<Vec<Complex64>>,
}

impl Accumulator {
    pub fn new(len: usize) -> Self {
        Accumulator {
            sum: vec![ZERO; len],
            first: None,
            last: None,
        }
    }

    /// Trapezoid sum from the anchor up to, but without the half weight of, the next sample.
    pub fn partial(&self) -> Vec<Complex64> {
        let mut out = self.sum.clone();
        if let Some(first) = &self.first {
            axpy(&mut out, Complex64::new(-0.5, 0.0), first);
        }
        out
    }

    pub fn push(&mut self, g: &[Complex64]) {
        if self.first.is_none() {
            self.first = Some(g.to_vec());
        }
        axpy(&mut self.sum, Complex64::new(1.0, 0.0), g);
        self.last = Some(g.to_vec());
    }

    /// Complete trapezoid sum over every visited sample.
    pub fn trapezoid(&self) -> Vec<Complex64> {
        let mut out = self.partial();
        if let Some(last) = &self.last {
            axpy(&mut out, Complex64::new(-0.5, 0.0), last);
        }
        out
    }
}

/// Signed coefficient in front of the trapezoid sum: `-i h` (initial) or `+i h` (final).
pub(crate) fn anchor_coefficient(anchor: Anchor, h: f64) -> Complex64 {
    match anchor {
        Anchor::Initial => -I * h,
        Anchor::Final => I * h,
    }
}

/// Sample visiting order when marching away from the anchor.
pub(crate) fn march_order(anchor: Anchor, grid: &TimeGrid) -> Vec<usize> {
    match anchor {
        Anchor::Initial => (0..=grid.intervals).collect(),
        Anchor::Final => (0..=grid.intervals).rev().collect(),
    }
}

pub(crate) fn field_from_spectrum(grid: &Grid, spectrum: Vec<Complex64>) -> ComplexField {
    ComplexField::from_values(grid, spectrum, Representation::Frequency)
        .expect("length matches grid")
        .to_position()
}

pub(crate) fn field_from_samples(grid: &Grid, samples: Vec<Complex64>) -> ComplexField {
    ComplexField::from_values(grid, samples, Representation::Position).expect("length matches grid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_rounds_to_multiple_of_four() {
        let g = TimeGrid::with_spacing(1.0, 0.3).unwrap();
        assert_eq!(g.intervals, 4);
        assert!((g.time(4) - 1.0).abs() < 1e-15);
        assert!(TimeGrid::from_times(&g.times()).is_ok());
        assert!(TimeGrid::from_times(&[0.0, 0.1, 0.3]).is_err());
    }

    #[test]
    fn accumulator_gives_trapezoid_weights() {
        let mut acc = Accumulator::new(1);
        let vals = [1.0, 2.0, 4.0];
        for v in vals {
            acc.push(&[Complex64::new(v, 0.0)]);
        }
        assert!((acc.partial()[0].re - 6.5).abs() < 1e-15);
        assert!((acc.trapezoid()[0].re - 4.5).abs() < 1e-15);
    }
}
