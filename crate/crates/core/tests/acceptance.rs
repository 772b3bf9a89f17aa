//! Acceptance suite: one pass/fail line per criterion, nonzero exit if any fails.

use std::process::ExitCode;
use std::time::Instant;

use hnls_core::experiments::{
    breakdown_off_origin, breakdown_origin, dominance_vs_radius, scaling_sweep, BreakdownConfig, FreeEnergyConfig,
    ScalingMode, Schedule,
};
use hnls_core::functionals::{energy, mass, sigma_norm};
use hnls_core::hierarchy::{gronwall_sequence, nonlinear_n, solve_hierarchy, verify_remainder, IndexConvention};
use hnls_core::scattering::{calibrate_radius, scattering_state, wave_operator, ScatterOptions};
use hnls_core::spectral::free_propagate;
use hnls_core::*;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = (bool, String);

fn random_field(grid: &Grid, seed: u64) -> ComplexField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.len())
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    ComplexField::from_values(grid, values, Representation::Position).unwrap()
}

fn spectral_core() -> Check {
    let mut worst_round = 0.0f64;
    let mut worst_plancherel = 0.0f64;
    for (dim, seed) in [(1, 1), (2, 2)] {
        let g = Grid::new(dim, 256, 10.0).unwrap();
        let u = random_field(&g, seed);
        let hat = u.transform(Direction::Forward).unwrap();
        let back = hat.transform(Direction::Inverse).unwrap();
        worst_round = worst_round.max(back.distance(&u) / u.l2_norm());
        worst_plancherel = worst_plancherel.max((hat.sample_norm() - u.sample_norm()).abs() / u.sample_norm());
    }
    let g = Grid::new(1, 1024, 64.0).unwrap();
    let f = ComplexField::gaussian(&g, 1.0, 1.0, [0.0; 2], [0.0; 2]);
    let mut worst_free = 0.0f64;
    for t in [0.5, 1.0, 2.5, 5.0] {
        let z = Complex64::new(1.0, 2.0 * t);
        let exact = ComplexField::from_fn(&g, |p| z.powf(-0.5) * (-(p[0] * p[0]) / (2.0 * z)).exp());
        worst_free = worst_free.max(free_propagate(&f, t).distance(&exact));
    }
    (
        worst_round < 1e-12 && worst_plancherel < 1e-12 && worst_free < 1e-8,
        format!("round trip {worst_round:.1e}, Plancherel {worst_plancherel:.1e}, free Gaussian {worst_free:.1e}"),
    )
}

fn conservation() -> Check {
    let g = Grid::new(2, 128, 64.0).unwrap();
    let k = HartreeKernel::new(&g, 1.5).unwrap();
    let u0 = ComplexField::gaussian(&g, 0.1, 4.0, [0.0; 2], [0.0; 2]);
    let cfg = SolverConfig {
        record_every: 500,
        ..SolverConfig::new(1e-3, 0.0, 8.0)
    };
    let traj = evolve(&u0, &cfg, &k).unwrap();
    let (m0, e0) = (mass(&u0), energy(&u0, &k));
    let dm = traj.fields().iter().map(|u| (mass(u) - m0).abs() / m0).fold(0.0, f64::max);
    let de = traj.fields().iter().map(|u| (energy(u, &k) - e0).abs() / e0).fold(0.0, f64::max);
    // self-convergence on a shorter, strongly nonlinear run
    let g = Grid::new(2, 64, 16.0).unwrap();
    let k = HartreeKernel::new(&g, 1.5).unwrap();
    let u0 = ComplexField::gaussian(&g, 1.0, 1.0, [0.0; 2], [0.5, 0.0]);
    let end = |dt: f64| {
        let cfg = SolverConfig {
            monitor_energy: false,
            wrap_threshold: 1.0,
            ..SolverConfig::new(dt, 0.0, 1.0)
        };
        evolve(&u0, &cfg, &k).unwrap().last().clone()
    };
    let (a, b, c) = (end(0.04), end(0.02), end(0.01));
    let ratio = a.distance(&b) / b.distance(&c);
    (
        dm < 1e-10 && de < 1e-6 && (3.5..=4.5).contains(&ratio),
        format!("mass drift {dm:.1e}, energy drift {de:.1e}, Strang ratio {ratio:.3}"),
    )
}

fn free_energy_law() -> Check {
    let g = Grid::new(2, 64, 12.0).unwrap();
    let v = ComplexField::gaussian(&g, 1.0, 1.0, [0.0; 2], [0.0; 2]);
    let cfg = FreeEnergyConfig::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for gamma in [1.4, 1.5, 1.75] {
        let e = scaling_sweep(&v, gamma, &[1.0], &[2.0, 4.0, 8.0], ScalingMode::Sigma, 0.55, &cfg).unwrap();
        let b = e.fit.slope();
        ok &= (b - (2.0 - gamma)).abs() < 0.05;
        parts.push(format!("γ={gamma}: σ-exponent {b:.4}"));
    }
    let e = scaling_sweep(&v, 1.5, &[0.01, 0.02, 0.04], &[2.0], ScalingMode::Eps, 0.55, &cfg).unwrap();
    let a = e.fit.slope();
    ok &= (a - 4.0).abs() < 1e-3;
    parts.push(format!("ε-exponent {a:.6}"));
    (ok, parts.join(", "))
}

fn parity() -> Check {
    let g = Grid::new(2, 64, 16.0).unwrap();
    let k = HartreeKernel::new(&g, 1.5).unwrap();
    let cfg = HierarchyConfig {
        anchor: Anchor::Final,
        horizon: 2.0,
        ds: 0.02,
        record_every: 1,
        ledger: false,
        ..Default::default()
    };
    let v = ComplexField::gaussian(&g, 0.5, 1.0, [0.0; 2], [0.3, 0.0]);
    let h = solve_hierarchy(&ComplexField::zeros(&g), &v, 3, &k, &cfg).unwrap();
    let s = h.sup_norms();
    let even = s[2] / s[1];
    let n = nonlinear_n(&h.w[1], &h.w[1], &h.w[1], &k, None).unwrap();
    let odd = n.trajectory.sup_distance(&h.w[3]).unwrap() / h.w[3].sup_l2();
    (
        even < 1e-9 && odd < 1e-9,
        format!("‖w₂‖/‖w₁‖ {even:.1e}, ‖w₃ − 𝒩(w₁,w₁,w₁)‖/‖w₃‖ {odd:.1e}"),
    )
}

fn series_convergence() -> Check {
    let g = Grid::new(2, 128, 32.0).unwrap();
    let k = HartreeKernel::new(&g, 1.5).unwrap();
    let u0 = ComplexField::gaussian(&g, 0.16, 1.0, [0.0; 2], [0.0; 2]);
    let v = ComplexField::gaussian(&g, 3.0, 1.0, [0.5, 0.0], [0.0; 2]);
    let cfg = HierarchyConfig {
        horizon: 2.0,
        ds: 0.02,
        ..Default::default()
    };
    let t = verify_remainder(&u0, &v, &[0.01, 0.005], 5, &k, &cfg).unwrap();
    let lambda = t.lambda_fit.expect("fit").lambda;
    let eps_lambda = 0.01 * lambda;
    let spread = t.ratios[0][..4]
        .iter()
        .map(|r| (r / eps_lambda).ln().abs())
        .fold(0.0, f64::max)
        .exp();
    let r3 = t.rows[1].remainders[3] / t.rows[0].remainders[3];
    let expected = 0.5f64.powi(4);
    (
        spread < 3.0 && (r3 / expected - 1.0).abs() < 0.3,
        format!("εΛ_fit {eps_lambda:.3e}, worst ratio factor {spread:.2}, R₃(ε/2)/R₃(ε) {r3:.4} vs {expected}"),
    )
}

fn round_trip() -> Check {
    let g = Grid::new(2, 256, 72.0).unwrap();
    let k = HartreeKernel::new(&g, 1.5).unwrap();
    let shape = ComplexField::gaussian(&g, 1.0, 1.0, [0.0; 2], [0.0; 2]);
    let u0 = shape.scale(Complex64::new(0.05 / sigma_norm(&shape), 0.0));
    let cfg = SolverConfig {
        tol_energy: 1e-3,
        ..SolverConfig::new(0.02, 0.0, 4.0)
    };
    let s = scattering_state(&u0, &cfg, &k).unwrap();
    let w = wave_operator(&s.u_plus, &cfg, &k).unwrap();
    let err = w.u_plus.distance(&u0) / u0.l2_norm();
    let effect = s.u_plus.distance(&u0) / u0.l2_norm();
    (
        err < 1e-4,
        format!("‖𝒲𝒮u0 − u0‖/‖u0‖ {err:.2e} (nonlinear effect {effect:.2e}, {} Picard sweeps)", w.iterations),
    )
}

fn gronwall() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for (c, a1) in [(1.0, 0.5), (2.0, 0.1), (0.5, 1.0)] {
        let seq = gronwall_sequence(c, a1, 50, IndexConvention::FromOne).unwrap();
        let worst = seq.strengthened_ratio.iter().copied().fold(0.0, f64::max);
        ok &= seq.holds && worst <= 1.0 + 1e-12;
        parts.push(format!("(C,a1)=({c},{a1}): max ⟨N⟩²a_N/C₁(C₀a₁)^N {worst:.3}"));
    }
    (ok, parts.join(", "))
}

fn origin_breakdown() -> Check {
    let g = Grid::new(2, 64, 12.0).unwrap();
    let k = HartreeKernel::new(&g, 1.5).unwrap();
    let v = ComplexField::gaussian(&g, 1.0, 1.0, [0.0; 2], [0.0; 2]);
    let t = breakdown_origin(
        &v,
        &k,
        2.9,
        Schedule::Coupled { j: 2.3 },
        &[4.0, 8.0, 16.0],
        &BreakdownConfig::default(),
    )
    .unwrap();
    let slope = t.fit.expect("fit").slope;
    (
        (slope - t.expected_slope).abs() < 0.1 && t.monotone,
        format!(
            "slope {slope:.3} vs {:.2}, consecutive {:?}, monotone {}",
            t.expected_slope,
            t.slopes.iter().map(|s| format!("{s:.3}")).collect::<Vec<_>>(),
            t.monotone
        ),
    )
}

fn off_origin_dominance() -> Check {
    let g = Grid::new(2, 64, 16.0).unwrap();
    let k = HartreeKernel::new(&g, 1.5).unwrap();
    let shape = ComplexField::gaussian(&g, 1.0, 1.0, [1.0, 0.0], [0.0; 2]);
    let cal_cfg = SolverConfig {
        wrap_threshold: 1.0,
        ..SolverConfig::new(0.05, 0.0, 4.0)
    };
    let opts = ScatterOptions {
        far_tail: false,
        ..Default::default()
    };
    let unit = shape.scale(Complex64::new(1.0 / sigma_norm(&shape), 0.0));
    let cal = calibrate_radius(&unit, &[0.25, 0.5, 1.0, 2.0, 4.0], &cal_cfg, &k, &opts).unwrap();
    let radius = cal.radius.expect("calibrated radius");

    let g = Grid::new(2, 64, 12.0).unwrap();
    let k = HartreeKernel::new(&g, 1.5).unwrap();
    let v = ComplexField::gaussian(&g, 1.0, 1.0, [0.0; 2], [0.0; 2]);
    let base = ComplexField::gaussian(&g, 1.0, 1.0, [1.0, 0.0], [0.0; 2]);
    let base = base.scale(Complex64::new(1.0 / sigma_norm(&base), 0.0));
    let cfg = BreakdownConfig {
        radius: Some(radius),
        ..Default::default()
    };
    let sweep = dominance_vs_radius(
        &base,
        &v,
        &k,
        0.02,
        2.0,
        &[radius / 32.0, radius / 16.0, radius / 8.0],
        &cfg,
    )
    .unwrap();
    let beta = sweep.fit.expect("fit").slope;
    let u0 = base.scale(Complex64::new(radius / 32.0, 0.0));
    let table = breakdown_off_origin(
        &u0,
        &v,
        &k,
        3.0,
        Schedule::Decoupled { eps: 0.02 },
        &[2.0, 3.0, 4.0],
        &cfg,
    )
    .unwrap();
    let slope = table.resonant_fit.expect("fit").slope;
    (
        sweep.max_excess < 1.1 && (slope - table.expected_resonant_slope).abs() < 0.1,
        format!(
            "R {radius:.3}, ratio ≤ {:.3}·R² with max excess {:.4} (free slope {beta:.3}), resonant σ-slope {slope:.3} vs {:.2}",
            sweep.c_fit, sweep.max_excess, table.expected_resonant_slope
        ),
    )
}

fn panic_message(e: &Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>()
        .cloned()
        .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_default()
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("spectral core", spectral_core),
        ("conservation", conservation),
        ("free-energy scaling law", free_energy_law),
        ("hierarchy parity", parity),
        ("series convergence", series_convergence),
        ("scattering round trip", round_trip),
        ("Gronwall majorant", gronwall),
        ("breakdown at the origin", origin_breakdown),
        ("off-origin dominance", off_origin_dominance),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let (ok, detail) = std::panic::catch_unwind(check)
            .unwrap_or_else(|e| (false, format!("panicked: {}", panic_message(&e))));
        failed += usize::from(!ok);
        println!(
            "{} {name}: {detail} [{:.1}s]",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
