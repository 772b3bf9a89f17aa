//! Numerical values against closed forms and exact symmetries.

use std::f64::consts::PI;

use hnls_core::experiments::{free_energy_integral, free_q_series, make_scaled_on, FreeEnergyConfig};
use hnls_core::hierarchy::verify_remainder;
use hnls_core::{ComplexField, Grid, HartreeKernel, HierarchyConfig};
use statrs::function::gamma::gamma;

/// `Q(e^{isΔ}v)` for `v = e^{-|x|²/2}` in two dimensions: the density is a
/// Gaussian of variance `a²/2`, `a² = 1 + 4s²`, and `E|Z|^{-γ}` for
/// `Z ~ N(0, a² I₂)` is `a^{-γ} 2^{-γ/2} Γ(1-γ/2)`.
fn gaussian_q(s: f64, g: f64) -> f64 {
    let a2 = 1.0 + 4.0 * s * s;
    0.25 * PI * PI * a2.powf(-g / 2.0) * 2f64.powf(-g / 2.0) * gamma(1.0 - g / 2.0)
}

/// `∫_0^∞ (1+4s²)^{-γ/2} ds = √π Γ((γ-1)/2) / (4 Γ(γ/2))`.
fn gaussian_free_energy(g: f64) -> f64 {
    gaussian_q(0.0, g) * PI.sqrt() * gamma((g - 1.0) / 2.0) / (4.0 * gamma(g / 2.0))
}

#[test]
fn free_gaussian_potential_energy_matches_closed_form() {
    // lens-form values truncate the kernel at the dual half-width π/dx
    let grid = Grid::new(2, 256, 24.0).unwrap();
    let k = HartreeKernel::new(&grid, 1.5).unwrap();
    let v = ComplexField::gaussian(&grid, 1.0, 1.0, [0.0; 2], [0.0; 2]);
    for (s, q) in free_q_series(&v, &k, &[0.0, 0.2, 0.5, 1.0, 2.0, 4.0]).unwrap() {
        let exact = gaussian_q(s, 1.5);
        assert!((q - exact).abs() < 5e-3 * exact, "s = {s}: {q} vs {exact}");
    }
}

#[test]
fn gaussian_free_energy_matches_closed_form() {
    let grid = Grid::new(2, 64, 12.0).unwrap();
    for g in [1.4, 1.5, 1.75] {
        let k = HartreeKernel::new(&grid, g).unwrap();
        let v = ComplexField::gaussian(&grid, 1.0, 1.0, [0.0; 2], [0.0; 2]);
        let got = free_energy_integral(&v, &k, &FreeEnergyConfig::default()).unwrap();
        let exact = gaussian_free_energy(g);
        assert!(!got.unreliable);
        assert!((got.value - exact).abs() < 1e-2 * exact, "γ = {g}: {} vs {exact}", got.value);
    }
}

#[test]
fn origin_remainder_transports_under_scaling() {
    // on a grid stretched by σ with time stretched by σ², the discrete scheme
    // is exactly covariant, so the two remainders agree to roundoff
    let (n, l, g) = (32, 10.0, 1.5);
    let sigma: f64 = 2.0;
    let eps = 0.2;
    let base = Grid::new(2, n, l).unwrap();
    let wide = Grid::new(2, n, sigma * l).unwrap();
    let v = ComplexField::gaussian(&base, 1.0, 1.0, [0.4, 0.0], [0.0; 2]);
    let scaled = make_scaled_on(&v, eps, sigma, &wide).unwrap();
    let cfg = |stretch: f64| HierarchyConfig {
        horizon: 0.5 * stretch,
        ds: 0.05 * stretch,
        ledger: false,
        ..Default::default()
    };
    let c = eps * sigma.powf((2.0 - g) / 2.0);
    let at_base = verify_remainder(
        &ComplexField::zeros(&base),
        &v,
        &[c],
        3,
        &HartreeKernel::new(&base, g).unwrap(),
        &cfg(1.0),
    )
    .unwrap();
    let at_scale = verify_remainder(
        &ComplexField::zeros(&wide),
        &scaled,
        &[1.0],
        3,
        &HartreeKernel::new(&wide, g).unwrap(),
        &cfg(sigma * sigma),
    )
    .unwrap();
    let factor = sigma.powf(-(2.0 - g) / 2.0);
    for (a, b) in at_base.rows[0].remainders.iter().zip(&at_scale.rows[0].remainders) {
        assert!((factor * a - b).abs() < 1e-9 * b.max(1e-300), "{} vs {b}", factor * a);
    }
    assert!(at_scale.rows[0].remainders[3] > 0.0);
}
