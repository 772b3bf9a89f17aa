use hnls_core::experiments::{grid_for_sigma, make_scaled_on, WRAP_FRACTION};
use hnls_core::functionals::{energy, mass};
use hnls_core::spectral::{free_propagate, trilinear_t};
use hnls_core::{step_strang, ComplexField, Grid, HartreeKernel};
use num_complex::Complex64;
use proptest::prelude::*;

fn setup() -> (Grid, HartreeKernel) {
    let g = Grid::new(2, 32, 8.0).unwrap();
    let k = HartreeKernel::new(&g, 1.5).unwrap();
    (g, k)
}

fn bump(g: &Grid, amp: f64, width: f64, cx: f64, px: f64) -> ComplexField {
    ComplexField::gaussian(g, amp, width, [cx, -0.5 * cx], [px, 0.3])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn free_flow_is_unitary(amp in 0.1f64..2.0, width in 0.7f64..1.5, cx in -1.0f64..1.0, t in -3.0f64..3.0) {
        let (g, _) = setup();
        let u = bump(&g, amp, width, cx, 0.5);
        let w = free_propagate(&u, t);
        prop_assert!((w.l2_norm() - u.l2_norm()).abs() < 1e-12 * u.l2_norm());
        prop_assert!(free_propagate(&w, -t).distance(&u) < 1e-12 * u.l2_norm());
    }

    #[test]
    fn strang_step_conserves_mass_and_commutes_with_gauge(
        amp in 0.1f64..1.5, cx in -1.0f64..1.0, px in -1.0f64..1.0, theta in 0.0f64..6.3, dt in 0.001f64..0.05
    ) {
        let (g, k) = setup();
        let u = bump(&g, amp, 1.0, cx, px);
        let a = step_strang(&u, dt, &k).unwrap();
        prop_assert!((mass(&a) - mass(&u)).abs() < 1e-12 * mass(&u));
        let phase = Complex64::from_polar(1.0, theta);
        let b = step_strang(&u.scale(phase), dt, &k).unwrap();
        prop_assert!(b.distance(&a.scale(phase)) < 1e-12 * u.l2_norm());
    }

    #[test]
    fn trilinear_form_is_homogeneous(amp in 0.1f64..1.5, r in 0.1f64..3.0, theta in 0.0f64..6.3) {
        let (g, k) = setup();
        let u = bump(&g, amp, 1.0, 0.3, 0.2);
        let v = bump(&g, 1.0, 1.2, -0.4, -0.5);
        let base = trilinear_t(&u, &v, &u, &k).unwrap();
        let c = Complex64::from_polar(r, theta);
        // linear in the first and third slots, antilinear in the second
        let got = trilinear_t(&u.scale(c), &v.scale(c), &u.scale(c), &k).unwrap();
        let expect = base.scale(c * c.conj() * c);
        prop_assert!(got.distance(&expect) < 1e-12 * expect.l2_norm());
    }

    #[test]
    fn energy_is_gauge_and_translation_invariant(amp in 0.1f64..1.5, theta in 0.0f64..6.3) {
        let (g, k) = setup();
        let u = bump(&g, amp, 1.0, 0.0, 0.4);
        let e = energy(&u, &k);
        prop_assert!((energy(&u.scale(Complex64::from_polar(1.0, theta)), &k) - e).abs() < 1e-12 * e);
        // shift by exactly one grid cell
        let shifted = ComplexField::gaussian(&g, amp, 1.0, [g.dx(), 0.0], [0.4, 0.3]);
        prop_assert!((energy(&shifted, &k) - e).abs() < 1e-12 * e);
    }

    #[test]
    fn scaled_profiles_keep_their_l2_norm(eps in 0.01f64..1.0, sigma in 1.2f64..3.0) {
        let g = Grid::new(2, 32, 10.0).unwrap();
        let v = ComplexField::gaussian(&g, 1.0, 1.0, [0.0; 2], [0.0; 2]);
        let target = grid_for_sigma(2, v.mass_radius(WRAP_FRACTION), sigma, 0.5).unwrap();
        let w = make_scaled_on(&v, eps, sigma, &target).unwrap();
        prop_assert!((w.l2_norm() - eps * v.l2_norm()).abs() < 1e-6 * eps * v.l2_norm());
    }
}
