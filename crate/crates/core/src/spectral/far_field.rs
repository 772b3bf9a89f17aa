//! Lens form of the free flow, used once a solution has spread beyond the box.
//!
//! For `s > 0`
//!
//! ```text
//! e^{isΔ} f = (2is)^{-d/2} M(s) h_s(· / 2s),   h_s = ℱ(M(s) f),   M(s) = e^{i|x|²/4s},
//! ```
//!
//! with `ℱ` the unitary Fourier transform. The profile `h_s` lives on the
//! dual grid and converges to `f̂` as `s → ∞`. Consequences used here:
//!
//! * `Q(e^{isΔ} f) = (2s)^{-γ} Q(h_s)`
//! * `e^{-isΔ} T(e^{isΔ}a, e^{isΔ}b, e^{isΔ}c) = (2s)^{-γ} M(-s) ℱ^{-1} T̃(h^a_s, h^b_s, h^c_s)`
//!
//! where `T̃` is the trilinear form evaluated on the dual grid. Integrals over
//! `[s_0, ∞)` are taken in `z = s^{1-γ}`, which removes the slow algebraic decay.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::functionals::{potential_q, trapezoid};
use crate::spectral::kernel::gauss_legendre_32;
use crate::spectral::ops::{convolve_in_place, free_propagate, potential_times, trilinear_t};
use crate::spectral::{ComplexField, Grid, HartreeKernel, Representation};

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

fn dual_index(grid: &Grid, idx: usize) -> usize {
    let n = grid.n();
    let shift = |k: usize| (k + n / 2) % n;
    match grid.dim() {
        1 => shift(idx),
        _ => shift(idx / n) * n + shift(idx % n),
    }
}

fn parity(grid: &Grid, idx: usize) -> f64 {
    let n = grid.n();
    let s = match grid.dim() {
        1 => idx,
        _ => idx / n + idx % n,
    };
    if s % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Unitary Fourier transform sampled on the dual grid (centered frequencies).
pub fn fourier_to_dual(f: &ComplexField) -> ComplexField {
    let grid = f.grid().clone();
    let dual = grid.dual();
    let mut hat = f.to_position().into_values();
    grid.fft_in_place(&mut hat, false);
    // unitary DFT carries 1/sqrt(N); the continuum transform needs (dx/sqrt(2π))^d unnormalised
    let c = (grid.len() as f64).sqrt() * (grid.dx() / SQRT_2PI).powi(grid.dim() as i32);
    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (idx, z) in hat.into_iter().enumerate() {
        out[dual_index(&grid, idx)] = z * (c * parity(&grid, idx));
    }
    ComplexField::from_values(&dual, out, Representation::Position).expect("same length")
}

/// Inverse of [`fourier_to_dual`], returning samples on `grid`.
pub fn fourier_from_dual(h: &ComplexField, grid: &Grid) -> Result<ComplexField> {
    if !h.grid().same_as(&grid.dual()) {
        return Err(Error::GridMismatch);
    }
    let h = h.to_position();
    let mut spec = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (idx, z) in spec.iter_mut().enumerate() {
        *z = h.values()[dual_index(grid, idx)] * parity(grid, idx);
    }
    grid.fft_in_place(&mut spec, true);
    let c = (grid.len() as f64).sqrt() * (grid.dxi() / SQRT_2PI).powi(grid.dim() as i32);
    spec.iter_mut().for_each(|z| *z *= c);
    ComplexField::from_values(grid, spec, Representation::Position)
}

fn chirp(f: &ComplexField, s: f64, sign: f64) -> ComplexField {
    if s.is_infinite() {
        return f.to_position();
    }
    let f = f.to_position();
    let grid = f.grid().clone();
    let values = f
        .values()
        .iter()
        .enumerate()
        .map(|(idx, z)| z * Complex64::from_polar(1.0, sign * grid.radius2(idx) / (4.0 * s)))
        .collect();
    ComplexField::from_values(&grid, values, Representation::Position).expect("same length")
}

/// `h_s = ℱ(M(s) f)` on the dual grid; `s = ∞` gives `f̂`.
pub fn far_field(f: &ComplexField, s: f64) -> ComplexField {
    fourier_to_dual(&chirp(f, s, 1.0))
}

/// Smallest time from which the chirp `M(s)` is resolved on the support of
/// `f`: the local wavenumber `|x|/2s` must stay below half the grid's
/// largest frequency on the ball holding all but `1e-12` of the mass.
pub fn chirp_threshold(f: &ComplexField) -> f64 {
    let f = f.to_position();
    let r = f.mass_radius(1e-12);
    r / f.grid().xi_max()
}

/// `Q(e^{isΔ} f)`: direct propagation before the chirp threshold, lens form after.
pub fn free_q(f: &ComplexField, s: f64, kernel: &HartreeKernel, dual_kernel: &HartreeKernel) -> f64 {
    if s.abs() < chirp_threshold(f) {
        potential_q(&free_propagate(f, s), kernel)
    } else {
        (2.0 * s).powf(-kernel.gamma()) * potential_q(&far_field(f, s), dual_kernel)
    }
}

/// Gauss-Legendre nodes and weights for `∫_{s_0}^{s_1} (2s)^{-γ} F(s) ds` in the
/// variable `z = s^{1-γ}`; `s_1 = ∞` is allowed.
pub fn tail_rule(gamma: f64, s0: f64, s1: f64, panels: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre_32();
    let e = 1.0 - gamma;
    let z0 = s0.powf(e);
    let z1 = if s1.is_infinite() { 0.0 } else { s1.powf(e) };
    let pre = 2f64.powf(-gamma) / (gamma - 1.0);
    let panels = panels.max(1);
    let width = (z0 - z1) / panels as f64;
    let mut out = Vec::with_capacity(panels * x.len());
    for p in 0..panels {
        let a = z1 + p as f64 * width;
        for (xi, wi) in x.iter().zip(&w) {
            let z = a + 0.5 * width * (xi + 1.0);
            out.push((z.powf(1.0 / e), pre * 0.5 * width * wi));
        }
    }
    out
}

/// `∫_{s_0}^{s_1} Q(e^{isΔ} f) ds` through the lens form; needs `s_0` past the chirp threshold.
pub fn q_integral_far(f: &ComplexField, dual_kernel: &HartreeKernel, s0: f64, s1: f64, panels: usize) -> f64 {
    tail_rule(dual_kernel.gamma(), s0, s1, panels)
        .into_iter()
        .map(|(s, w)| w * potential_q(&far_field(f, s), dual_kernel))
        .sum()
}

/// `∫_0^{s_1} Q(e^{isΔ} f) ds` by the trapezoid rule on `intervals` uniform
/// steps with one Richardson correction.
pub fn q_integral_near(f: &ComplexField, kernel: &HartreeKernel, s1: f64, intervals: usize) -> f64 {
    let m = intervals.max(2).div_ceil(2) * 2;
    let times: Vec<f64> = (0..=m).map(|i| s1 * i as f64 / m as f64).collect();
    let q: Vec<f64> = times.iter().map(|s| potential_q(&free_propagate(f, *s), kernel)).collect();
    let fine = trapezoid(&times, &q);
    let t2: Vec<f64> = times.iter().step_by(2).copied().collect();
    let q2: Vec<f64> = q.iter().step_by(2).copied().collect();
    let coarse = trapezoid(&t2, &q2);
    fine + (fine - coarse) / 3.0
}

/// `e^{-isΔ} T(e^{isΔ}a, e^{isΔ}b, e^{isΔ}c)` for profiles `a, b, c`, through the lens form.
pub fn trilinear_far(
    a: &ComplexField,
    b: &ComplexField,
    c: &ComplexField,
    s: f64,
    dual_kernel: &HartreeKernel,
) -> Result<ComplexField> {
    let grid = a.grid().clone();
    let t = trilinear_t(&far_field(a, s), &far_field(b, s), &far_field(c, s), dual_kernel)?;
    let back = fourier_from_dual(&t, &grid)?;
    Ok(chirp(&back, s, -1.0).scale(Complex64::new((2.0 * s).powf(-dual_kernel.gamma()), 0.0)))
}

/// `∫_{s_0}^{s_1} e^{-isΔ} T(e^{isΔ}a, e^{isΔ}b, e^{isΔ}c) ds` for profiles frozen at their values.
pub fn trilinear_integral_far(
    a: &ComplexField,
    b: &ComplexField,
    c: &ComplexField,
    dual_kernel: &HartreeKernel,
    s0: f64,
    s1: f64,
    panels: usize,
) -> Result<ComplexField> {
    let grid = a.grid().clone();
    let gamma = dual_kernel.gamma();
    let mut acc = ComplexField::zeros(&grid);
    for (s, w) in tail_rule(gamma, s0, s1, panels) {
        let t = trilinear_t(&far_field(a, s), &far_field(b, s), &far_field(c, s), dual_kernel)?;
        let back = chirp(&fourier_from_dual(&t, &grid)?, s, -1.0);
        acc.axpy(Complex64::new(w, 0.0), &back);
    }
    Ok(acc)
}

/// For each group of ordered index triples, `∫_{s_0}^{s_1} Σ e^{-isΔ} T(e^{isΔ}p_i, e^{isΔ}p_j, e^{isΔ}p_l) ds`
/// with all profiles frozen. Far fields and pair potentials are shared across groups.
pub fn trilinear_sums_far(
    profiles: &[ComplexField],
    groups: &[Vec<[usize; 3]>],
    dual_kernel: &HartreeKernel,
    s0: f64,
    s1: f64,
    panels: usize,
) -> Result<Vec<ComplexField>> {
    let grid = profiles.first().ok_or(Error::EmptyTrajectory)?.grid().clone();
    if groups.iter().flatten().flatten().any(|&i| i >= profiles.len()) {
        return Err(Error::MissingCoefficient(profiles.len()));
    }
    if !dual_kernel.grid().same_as(&grid.dual()) {
        return Err(Error::GridMismatch);
    }
    let mut acc: Vec<ComplexField> = groups.iter().map(|_| ComplexField::zeros(&grid)).collect();
    for (s, w) in tail_rule(dual_kernel.gamma(), s0, s1, panels) {
        let mut fields: BTreeMap<usize, ComplexField> = BTreeMap::new();
        let mut pairs: BTreeMap<(usize, usize), Vec<Complex64>> = BTreeMap::new();
        for &[i, j, l] in groups.iter().flatten() {
            for k in [i, j, l] {
                fields.entry(k).or_insert_with(|| far_field(&profiles[k], s));
            }
            pairs.entry((i, j)).or_insert_with(|| {
                let mut rho: Vec<Complex64> = fields[&i].values().iter().zip(fields[&j].values()).map(|(a, b)| a * b.conj()).collect();
                convolve_in_place(dual_kernel, &mut rho);
                rho
            });
        }
        for (group, out) in groups.iter().zip(acc.iter_mut()) {
            if group.is_empty() {
                continue;
            }
            let mut sum = vec![Complex64::new(0.0, 0.0); grid.len()];
            for [i, j, l] in group {
                for ((z, p), h) in sum.iter_mut().zip(&pairs[&(*i, *j)]).zip(fields[l].values()) {
                    *z += p * h;
                }
            }
            let ones = vec![Complex64::new(1.0, 0.0); grid.len()];
            let t = ComplexField::from_values(dual_kernel.grid(), potential_times(dual_kernel, &ones, &sum), Representation::Position)?;
            let back = chirp(&fourier_from_dual(&t, &grid)?, s, -1.0);
            out.axpy(Complex64::new(w, 0.0), &back);
        }
    }
    Ok(acc)
}
