use beltrami::{
    ap_characteristic, cauchy, d_zbar, evaluate_map, invert_map, principal_solution, resolvent,
    rh_characteristic, sigma_field, Complex64, ComplexField, CubeFamily, Dilatation, PeriodicGrid,
};
use proptest::prelude::*;

fn grid() -> PeriodicGrid {
    PeriodicGrid::new(64, 4.0).unwrap()
}

fn smooth_field(g: &PeriodicGrid, a: f64, b: f64, x0: f64) -> ComplexField {
    ComplexField::from_fn(g, |z| {
        let s = (z - Complex64::new(x0, 0.0)).norm_sqr();
        Complex64::new(a, b) * (-8.0 * s).exp() * (1.0 + z)
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn principal_solutions_satisfy_their_invariants(amp in 0.0f64..0.8, freq in -3.0f64..3.0) {
        let mu = Dilatation::bump(&grid(), amp, 0.9, freq).unwrap();
        let sol = principal_solution(&mu, 1e-10).unwrap();
        let inv = sol.invariants();
        prop_assert!(inv.holds(), "{inv:?}");
        prop_assert!(sol.jacobian().min() > 0.0);
    }

    #[test]
    fn resolvent_obeys_the_neumann_bound(amp in 0.0f64..0.9, a in -2.0f64..2.0, b in -2.0f64..2.0, x0 in -0.5f64..0.5) {
        let g = grid();
        let mu = Dilatation::bump(&g, amp, 0.9, 1.0).unwrap();
        let h = smooth_field(&g, a, b, x0);
        let tol = 1e-10;
        let x = resolvent(&mu, &h, tol).unwrap();
        prop_assert!(x.l2_norm() <= h.l2_norm() / (1.0 - mu.k()) + tol * h.l2_norm());
    }

    #[test]
    fn sigma_exponentiates_to_the_derivative(amp in 0.05f64..0.6) {
        // The exponential amplifies aliasing, so this one needs a finer grid.
        let g = PeriodicGrid::new(256, 4.0).unwrap();
        let mu = Dilatation::bump(&g, amp, 1.0, 0.5).unwrap();
        let sol = principal_solution(&mu, 1e-12).unwrap();
        let sigma = sigma_field(&mu, 1e-12).unwrap();
        let expd = sigma.map(|s| s.exp());
        prop_assert!(expd.relative_l2_error(sol.dzf()).unwrap() <= 1e-6);
    }

    #[test]
    fn map_inverse_roundtrip(amp in 0.0f64..0.7, re in -0.6f64..0.6, im in -0.6f64..0.6) {
        let mu = Dilatation::bump(&grid(), amp, 0.9, 0.0).unwrap();
        let sol = principal_solution(&mu, 1e-10).unwrap();
        let w = Complex64::new(re, im);
        let z = invert_map(&sol, &[w]).unwrap()[0];
        prop_assert!((evaluate_map(&sol, &[z])[0] - w).norm() <= 1e-8);
    }

    #[test]
    fn jacobian_powers_are_ap_and_rh_weights(amp in 0.0f64..0.7) {
        let mu = Dilatation::bump(&grid(), amp, 0.9, 1.0).unwrap();
        let sol = principal_solution(&mu, 1e-10).unwrap();
        let family = CubeFamily::centered(sol.grid(), 32).unwrap().with_shifts();
        let ap = ap_characteristic(sol.jacobian(), 2.0, &family).unwrap().characteristic;
        let rh = rh_characteristic(sol.jacobian(), 2.0, &family).unwrap().characteristic;
        prop_assert!(ap.is_finite() && ap >= 1.0 - 1e-9);
        prop_assert!(rh.is_finite() && rh >= 1.0 - 1e-9);
    }

    #[test]
    fn cauchy_of_dbar_recovers_zero_mean_fields(r in 0.1f64..2.0, phase in 0.0f64..6.3, x0 in -0.5f64..0.5) {
        let g = grid();
        let f = smooth_field(&g, r * phase.cos(), r * phase.sin(), x0);
        let f = &f + (-f.mean());
        let back = cauchy(&d_zbar(&f)).unwrap();
        prop_assert!(back.relative_l2_error(&f).unwrap() <= 1e-8);
    }
}
