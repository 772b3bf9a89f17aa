use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma as gamma_fn;

use super::grid::Grid;
use crate::error::{Error, Result};

/// How the singular part of the kernel at the lattice origin is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroModePolicy {
    /// Continuum symbol sampled on the frequency lattice; the `xi = 0` value is
    /// the average of the symbol over the fundamental frequency cell.
    CellAverage,
    /// `|x|^-gamma` sampled on the periodic box (minimum image), origin cell
    /// averaged, then transformed.
    TruncatedDirect,
}

/// Fourier multiplier of the Riesz kernel `|x|^-gamma` on a periodic grid.
#[derive(Debug, Clone)]
pub struct HartreeKernel {
    grid: Grid,
    gamma: f64,
    multiplier: Vec<f64>,
    policy: ZeroModePolicy,
    dealias: bool,
}

/// `c_{d,gamma}` with `F(|x|^-gamma)(xi) = c |xi|^(gamma - d)` for `F f = int f e^{-i x.xi}`.
pub fn riesz_constant(dim: usize, gamma: f64) -> f64 {
    let d = dim as f64;
    PI.powf(d / 2.0) * 2f64.powf(d - gamma) * gamma_fn((d - gamma) / 2.0) / gamma_fn(gamma / 2.0)
}

/// `int_{[-1/2,1/2]^d} |y|^-beta dy` for `0 <= beta < d`.
pub fn unit_cell_integral(dim: usize, beta: f64) -> f64 {
    match dim {
        1 => 2f64.powf(beta) / (1.0 - beta),
        _ => {
            // Polar coordinates over one eighth of the square, Gauss-Legendre in the angle.
            let p = 2.0 - beta;
            let (nodes, weights) = gauss_legendre_32();
            let half = PI / 8.0;
            let angular: f64 = nodes
                .iter()
                .zip(weights.iter())
                .map(|(x, w)| {
                    let theta = half * (x + 1.0);
                    w * half * theta.cos().powf(-p)
                })
                .sum();
            8.0 / p * 0.5f64.powf(p) * angular
        }
    }
}

pub(crate) fn gauss_legendre_32() -> (Vec<f64>, Vec<f64>) {
    // Newton iteration on P_32 from the Chebyshev guess.
    let n = 32usize;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let step = p / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

impl HartreeKernel {
    /// Kernel with the default cell-average zero mode and dealiasing enabled.
    pub fn new(grid: &Grid, gamma: f64) -> Result<Self> {
        Self::with_policy(grid, gamma, ZeroModePolicy::CellAverage)
    }

    pub fn with_policy(grid: &Grid, gamma: f64, policy: ZeroModePolicy) -> Result<Self> {
        validate_gamma(gamma)?;
        if gamma >= grid.dim() as f64 {
            return Err(Error::InvalidParameter(format!(
                "gamma = {gamma} must be below the dimension d = {} for |x|^-gamma to be locally integrable",
                grid.dim()
            )));
        }
        let multiplier = match policy {
            ZeroModePolicy::CellAverage => cell_average_symbol(grid, gamma),
            ZeroModePolicy::TruncatedDirect => truncated_direct_symbol(grid, gamma),
        };
        Ok(HartreeKernel {
            grid: grid.clone(),
            gamma,
            multiplier,
            policy,
            dealias: true,
        })
    }

    /// Vanishing kernel: the equation reduces to the free Schrödinger flow.
    pub fn zero(grid: &Grid, gamma: f64) -> Self {
        HartreeKernel {
            grid: grid.clone(),
            gamma,
            multiplier: vec![0.0; grid.len()],
            policy: ZeroModePolicy::CellAverage,
            dealias: true,
        }
    }

    pub fn with_dealias(mut self, on: bool) -> Self {
        self.dealias = on;
        self
    }

    /// Same kernel on another grid (e.g. the dual grid used by the far-field map).
    pub fn on_grid(&self, grid: &Grid) -> Result<Self> {
        if self.is_zero() {
            return Ok(Self::zero(grid, self.gamma).with_dealias(self.dealias));
        }
        Ok(Self::with_policy(grid, self.gamma, self.policy)?.with_dealias(self.dealias))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn multiplier(&self) -> &[f64] {
        &self.multiplier
    }

    pub fn policy(&self) -> ZeroModePolicy {
        self.policy
    }

    pub fn dealias(&self) -> bool {
        self.dealias
    }

    pub fn is_zero(&self) -> bool {
        self.multiplier.iter().all(|m| *m == 0.0)
    }
}

pub fn validate_gamma(gamma: f64) -> Result<()> {
    if gamma > 4.0 / 3.0 && gamma < 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("γ must lie in (4/3, 2), got {gamma}")))
    }
}

fn cell_average_symbol(grid: &Grid, gamma: f64) -> Vec<f64> {
    let d = grid.dim();
    let beta = d as f64 - gamma;
    let c = riesz_constant(d, gamma);
    let h = grid.dxi();
    let zero = c * h.powf(-beta) * unit_cell_integral(d, beta);
    grid.k2()
        .iter()
        .map(|&k2| if k2 == 0.0 { zero } else { c * k2.powf(-beta / 2.0) })
        .collect()
}

fn truncated_direct_symbol(grid: &Grid, gamma: f64) -> Vec<f64> {
    let d = grid.dim();
    let n = grid.n();
    let dx = grid.dx();
    let offset = |j: usize| {
        let s = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
        s * dx
    };
    let origin = dx.powf(-gamma) * unit_cell_integral(d, gamma);
    let mut samples: Vec<num_complex::Complex64> = (0..grid.len())
        .map(|idx| {
            let r2 = match d {
                1 => offset(idx).powi(2),
                _ => offset(idx / n).powi(2) + offset(idx % n).powi(2),
            };
            let v = if idx == 0 { origin } else { r2.powf(-gamma / 2.0) };
            num_complex::Complex64::new(v, 0.0)
        })
        .collect();
    grid.fft_in_place(&mut samples, false);
    let scale = (grid.len() as f64).sqrt() * grid.cell_volume();
    samples.iter().map(|z| z.re * scale).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn riesz_constant_reduces_to_known_cases() {
        // d = 2, gamma = 1: F(1/|x|) = 2 pi / |xi|.
        assert!((riesz_constant(2, 1.0) - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn unit_cell_integral_at_beta_zero_is_area() {
        assert!((unit_cell_integral(2, 0.0) - 1.0).abs() < 1e-12);
        assert!((unit_cell_integral(1, 0.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_cell_integral_matches_midpoint_sum() {
        // brute force on a fine midpoint grid, skipping the singular centre cell
        let beta = 0.5;
        let m = 2001usize;
        let h = 1.0 / m as f64;
        let mut sum = 0.0;
        for i in 0..m {
            for j in 0..m {
                let x = -0.5 + (i as f64 + 0.5) * h;
                let y = -0.5 + (j as f64 + 0.5) * h;
                let r2 = x * x + y * y;
                if i == m / 2 && j == m / 2 {
                    sum += h * h * h.powf(-beta) * unit_cell_integral(2, beta);
                } else {
                    sum += h * h * r2.powf(-beta / 2.0);
                }
            }
        }
        assert!((sum - unit_cell_integral(2, beta)).abs() < 1e-5, "{sum}");
    }

    #[test]
    fn multiplier_nonnegative_and_radial() {
        let g = Grid::new(2, 32, 8.0).unwrap();
        let k = HartreeKernel::new(&g, 1.5).unwrap();
        assert!(k.multiplier().iter().all(|m| m.is_finite() && *m >= 0.0));
        let n = g.n();
        for i in 0..n {
            for j in 0..n {
                assert_eq!(k.multiplier()[i * n + j], k.multiplier()[j * n + i]);
            }
        }
    }

    #[test]
    fn gamma_validation() {
        let g = Grid::new(2, 32, 8.0).unwrap();
        assert!(HartreeKernel::new(&g, 2.5).is_err());
        assert!(HartreeKernel::new(&g, 1.2).is_err());
        let g1 = Grid::new(1, 32, 8.0).unwrap();
        assert!(HartreeKernel::new(&g1, 1.5).is_err());
    }
}
