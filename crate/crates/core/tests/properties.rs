use faer::c64;
use photodiss::experiment::fit_saturation;
use photodiss::fedvr::FedvrGrid;
use photodiss::lindblad::{propagate, DensityState, IntegratorConfig};
use photodiss::system::SystemOperators;
use photodiss::units::fs_to_au;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn kinetic_energy_of_a_constant_vanishes(
        r_min in 0.1f64..2.0,
        len in 2.0f64..20.0,
        ne in 1usize..30,
        order in 3usize..12,
    ) {
        let g = FedvrGrid::new(r_min, r_min + len, ne, order).unwrap();
        let t = g.kinetic_operator(918.0).unwrap().to_dense();
        let c: Vec<f64> = g.weights().iter().map(|w| w.sqrt()).collect();
        let scale = (0..g.n_basis()).map(|i| t[(i, i)].abs()).fold(0.0, f64::max);
        for i in 0..g.n_basis() {
            let v: f64 = (0..g.n_basis()).map(|j| t[(i, j)] * c[j]).sum();
            prop_assert!(v.abs() <= 1e-10 * scale, "row {i}: {v}");
        }
    }

    #[test]
    fn clamped_populations_follow_the_two_level_solution(
        detuning in -0.02f64..0.02,
        g in 0.0f64..0.01,
        kappa in 1e-3f64..0.03,
    ) {
        let omega_p = 0.28;
        let ops = SystemOperators::clamped(2.0, omega_p + detuning, omega_p, kappa, g).unwrap();
        let mut s0 = DensityState::zeros(1);
        s0.rho11[(0, 0)] = c64::new(1.0, 0.0);
        let (rec, fin) = propagate(&s0, &ops, 5.0, &IntegratorConfig::default(), &mut |_| {}).unwrap();
        prop_assert!(fin.trace_deficit().abs() <= 1e-12);
        // closed-form amplitude on B0
        let a = c64::new(omega_p + detuning, 0.0);
        let d = c64::new(omega_p, -0.5 * kappa);
        let half = (a - d) * 0.5;
        let w = (half * half + c64::new(g * g, 0.0)).sqrt();
        for (k, &t) in rec.times_fs.iter().enumerate() {
            let t = fs_to_au(t);
            let phase = ((a + d) * c64::new(0.0, -0.5 * t)).exp();
            let cb = if w.norm() == 0.0 {
                phase
            } else {
                phase * ((w * t).cos() - c64::new(0.0, 1.0) * half / w * (w * t).sin())
            };
            prop_assert!((rec.active[1][k] - cb.norm_sqr()).abs() <= 1e-9);
        }
    }

    #[test]
    fn saturation_fit_recovers_the_curve(
        limit in 0.05f64..0.9,
        tau in 200.0f64..3000.0,
        t0 in 0.0f64..200.0,
    ) {
        let t: Vec<f64> = (0..=200).map(|k| 50.0 * k as f64).collect();
        let y: Vec<f64> = t.iter().map(|&t| limit * (1.0 - (-(t - t0) / tau).exp())).collect();
        let fit = fit_saturation(&t, &y, Some(500.0)).unwrap();
        prop_assert!((fit.limit / limit - 1.0).abs() < 1e-6, "{fit:?}");
        prop_assert!((fit.tau() / tau - 1.0).abs() < 1e-5, "{fit:?}");
    }
}
