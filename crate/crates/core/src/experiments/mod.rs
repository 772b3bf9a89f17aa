//! Scaling experiments on the rescaled family `v_{ε,σ}(x) = ε σ^{-d/2} v(x/σ)`.

pub mod breakdown;
pub mod fit;
pub mod free_energy;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use breakdown::{
    breakdown_off_origin, breakdown_origin, dominance_vs_radius, off_origin_point, validate_off_origin, validate_origin,
    BreakdownConfig, OffOriginRow, OffOriginTable, OriginRow, OriginTable, RadiusRow, RadiusSweep, Schedule,
};
pub use fit::{fit_exponents, line_fit, FitModel, FitReport, LineFit, Measurement};
pub use free_energy::{free_energy_integral, free_q_series, FreeEnergy, FreeEnergyConfig};

use crate::error::{Error, Result};
use crate::functionals::weighted_norms;
use crate::spectral::{ComplexField, Grid, HartreeKernel};
use crate::NormLedger;

/// Mass fraction allowed outside radius `L/2` for a scaled profile.
pub const WRAP_FRACTION: f64 = 1e-8;

pub fn make_scaled(v: &ComplexField, eps: f64, sigma: f64) -> Result<ComplexField> {
    make_scaled_on(v, eps, sigma, v.grid())
}

/// `ε σ^{-d/2} v(x/σ)` sampled on `grid`, evaluating the trigonometric
/// interpolant of `v`; points mapped outside `v`'s box read zero.
pub fn make_scaled_on(v: &ComplexField, eps: f64, sigma: f64, grid: &Grid) -> Result<ComplexField> {
    if !(sigma > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!("need σ > 0 and finite ε, got σ = {sigma}, ε = {eps}")));
    }
    let src = v.grid();
    if src.dim() != grid.dim() {
        return Err(Error::GridMismatch);
    }
    let d = grid.dim();
    let amp = eps * sigma.powf(-(d as f64) / 2.0);
    let v = v.to_position();
    if sigma == 1.0 && src.same_as(grid) {
        return Ok(v.scale(Complex64::new(amp, 0.0)));
    }
    let m = interpolation_matrix(src, grid, sigma);
    let (ns, nt) = (src.n(), grid.n());
    let values = match d {
        1 => apply_rows(&m, v.values(), ns),
        _ => {
            // rows first (axis 1), then columns (axis 0)
            let mut stage = vec![Complex64::new(0.0, 0.0); ns * nt];
            for a in 0..ns {
                let row = apply_rows(&m, &v.values()[a * ns..(a + 1) * ns], ns);
                stage[a * nt..(a + 1) * nt].copy_from_slice(&row);
            }
            let mut out = vec![Complex64::new(0.0, 0.0); nt * nt];
            let mut column = vec![Complex64::new(0.0, 0.0); ns];
            for b in 0..nt {
                for a in 0..ns {
                    column[a] = stage[a * nt + b];
                }
                for (a, z) in apply_rows(&m, &column, ns).into_iter().enumerate() {
                    out[a * nt + b] = z;
                }
            }
            out
        }
    };
    let values = values.into_iter().map(|z| z * amp).collect();
    let out = ComplexField::from_values(grid, values, crate::spectral::Representation::Position)?;
    let fraction = out.mass_fraction_outside(grid.half_width() / 2.0);
    if fraction > WRAP_FRACTION {
        return Err(Error::InvalidParameter(format!(
            "σ = {sigma} is too large for the box: mass fraction {fraction:.2e} outside L/2 = {}",
            grid.half_width() / 2.0
        )));
    }
    Ok(out)
}

/// `nt × ns` matrix taking samples of a periodic function on `src` to its
/// trigonometric interpolant at `x/σ` for the nodes `x` of `target`.
fn interpolation_matrix(src: &Grid, target: &Grid, sigma: f64) -> Vec<Complex64> {
    let (ns, nt) = (src.n(), target.n());
    let l = src.half_width();
    let xi = src.wavenumbers();
    let mut m = vec![Complex64::new(0.0, 0.0); nt * ns];
    for (j, x) in target.coords().iter().enumerate() {
        let y = x / sigma;
        if y.abs() > l {
            continue;
        }
        for (mm, xs) in src.coords().iter().enumerate() {
            let delta = y - xs;
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, w) in xi.iter().enumerate() {
                acc += if k == ns / 2 {
                    Complex64::new((w * delta).cos(), 0.0)
                } else {
                    Complex64::from_polar(1.0, w * delta)
                };
            }
            m[j * ns + mm] = acc / ns as f64;
        }
    }
    m
}

fn apply_rows(m: &[Complex64], x: &[Complex64], ns: usize) -> Vec<Complex64> {
    m.chunks(ns).map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

/// Grid for `v_{ε,σ}` at fixed resolution: half-width four times the scaled
/// `1e-8` mass radius, points per axis the next power of two with `dx ≤ dx_max`.
pub fn grid_for_sigma(dim: usize, base_radius: f64, sigma: f64, dx_max: f64) -> Result<Grid> {
    if !(base_radius > 0.0 && sigma > 0.0 && dx_max > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "grid sizing needs positive radius, σ and dx, got {base_radius}, {sigma}, {dx_max}"
        )));
    }
    let half_width = 4.0 * sigma * base_radius;
    let n = ((2.0 * half_width / dx_max).ceil() as usize).next_power_of_two().max(16);
    Grid::new(dim, n, half_width)
}

/// One point of a scaling sweep.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingRow {
    pub eps: f64,
    pub sigma: f64,
    pub grid_n: usize,
    pub half_width: f64,
    pub norms: NormLedger,
    pub free_energy: FreeEnergy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingMode {
    Eps,
    Sigma,
    Joint,
}

/// Free-energy sweep over an `(ε, σ)` schedule with its fitted exponents.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingExperiment {
    pub gamma: f64,
    pub epsilons: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub mode: ScalingMode,
    pub rows: Vec<ScalingRow>,
    pub fit: FitReport,
    /// `2 - γ` for σ-fits, `4` for ε-fits.
    pub expected: Vec<f64>,
    pub unreliable: usize,
}

/// Runs the free-energy integral for every scheduled point. `Eps` sweeps
/// `epsilons` at `σ = sigmas[0]`, `Sigma` sweeps `sigmas` at `ε = epsilons[0]`,
/// `Joint` takes the product.
pub fn scaling_sweep(
    v: &ComplexField,
    gamma: f64,
    epsilons: &[f64],
    sigmas: &[f64],
    mode: ScalingMode,
    dx_max: f64,
    cfg: &FreeEnergyConfig,
) -> Result<ScalingExperiment> {
    if epsilons.is_empty() || sigmas.is_empty() {
        return Err(Error::InvalidParameter("schedules must be nonempty".into()));
    }
    let points: Vec<(f64, f64)> = match mode {
        ScalingMode::Eps => epsilons.iter().map(|e| (*e, sigmas[0])).collect(),
        ScalingMode::Sigma => sigmas.iter().map(|s| (epsilons[0], *s)).collect(),
        ScalingMode::Joint => epsilons.iter().flat_map(|e| sigmas.iter().map(move |s| (*e, *s))).collect(),
    };
    let radius = v.to_position().mass_radius(WRAP_FRACTION);
    let d = v.grid().dim();
    let rows: Vec<ScalingRow> = points
        .par_iter()
        .map(|&(eps, sigma)| -> Result<ScalingRow> {
            let grid = grid_for_sigma(d, radius, sigma, dx_max)?;
            let kernel = HartreeKernel::new(&grid, gamma)?;
            let field = make_scaled_on(v, eps, sigma, &grid)?;
            Ok(ScalingRow {
                eps,
                sigma,
                grid_n: grid.n(),
                half_width: grid.half_width(),
                norms: weighted_norms(&field),
                free_energy: free_energy_integral(&field, &kernel, cfg)?,
            })
        })
        .collect::<Result<_>>()?;
    let measurements: Vec<Measurement> = rows
        .iter()
        .map(|r| Measurement {
            eps: r.eps,
            sigma: r.sigma,
            value: r.free_energy.value,
        })
        .collect();
    let model = match mode {
        ScalingMode::Eps => FitModel::EpsPower,
        ScalingMode::Sigma => FitModel::SigmaPower,
        ScalingMode::Joint => FitModel::Joint,
    };
    let expected = match mode {
        ScalingMode::Eps => vec![4.0],
        ScalingMode::Sigma => vec![2.0 - gamma],
        ScalingMode::Joint => vec![4.0, 2.0 - gamma],
    };
    Ok(ScalingExperiment {
        gamma,
        epsilons: epsilons.to_vec(),
        sigmas: sigmas.to_vec(),
        mode,
        unreliable: rows.iter().filter(|r| r.free_energy.unreliable).count(),
        fit: fit_exponents(&measurements, model)?,
        rows,
        expected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{kinetic, mass, moment_norm};

    #[test]
    fn unit_scaling_is_identity() {
        let g = Grid::new(2, 32, 8.0).unwrap();
        let v = ComplexField::gaussian(&g, 1.0, 1.0, [0.3, 0.0], [0.0; 2]);
        assert!(make_scaled(&v, 1.0, 1.0).unwrap().distance(&v) == 0.0);
    }

    #[test]
    fn interpolation_reproduces_grid_values() {
        let g = Grid::new(1, 64, 10.0).unwrap();
        let h = Grid::new(1, 64, 10.0).unwrap();
        let v = ComplexField::gaussian(&g, 1.0, 1.0, [0.0; 2], [0.5, 0.0]);
        let w = make_scaled_on(&v, 1.0, 1.0, &h).unwrap();
        assert!(w.distance(&v) < 1e-12);
    }

    #[test]
    fn scaled_norms_follow_change_of_variables() {
        let g = Grid::new(2, 64, 12.0).unwrap();
        let v = ComplexField::gaussian(&g, 1.0, 1.0, [0.0; 2], [0.0; 2]);
        let r = v.mass_radius(WRAP_FRACTION);
        for sigma in [2.0, 4.0] {
            let target = grid_for_sigma(2, r, sigma, 0.4).unwrap();
            let eps = 0.1;
            let w = make_scaled_on(&v, eps, sigma, &target).unwrap();
            assert!((w.l2_norm() - eps * v.l2_norm()).abs() < 1e-6 * eps);
            let grad = |f: &ComplexField| kinetic(f).sqrt();
            assert!((grad(&w) / grad(&v) - eps / sigma).abs() < 1e-4 * eps / sigma);
            assert!((moment_norm(&w) / moment_norm(&v) - eps * sigma).abs() < 1e-4 * eps * sigma);
            assert!((mass(&w) - eps * eps * mass(&v)).abs() < 1e-6 * mass(&w));
        }
    }

    #[test]
    fn too_wide_profile_is_rejected() {
        let g = Grid::new(2, 32, 8.0).unwrap();
        let v = ComplexField::gaussian(&g, 1.0, 1.0, [0.0; 2], [0.0; 2]);
        assert!(make_scaled(&v, 1.0, 4.0).is_err());
    }

    #[test]
    fn grid_sizing_keeps_dx() {
        let g = grid_for_sigma(2, 4.3, 8.0, 0.55).unwrap();
        assert!(g.dx() <= 0.55);
        assert!(g.half_width() >= 4.0 * 8.0 * 4.3);
        assert!(g.n().is_power_of_two());
    }
}
