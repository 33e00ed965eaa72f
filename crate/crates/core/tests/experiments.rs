use photodiss::experiment::{run_single, scan_coupling, scan_frequency, ExperimentConfig, PointOutcome};

fn small() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_toml(
        r#"
        [grid]
        r_min = 0.5
        r_max = 10.0
        n_elements = 12
        order = 6

        [cap]
        r_abs = 7.0

        [run]
        t_final = 6.0
        output_stride = 0.5
        density_stride = 2.0
        "#,
    )
    .unwrap();
    cfg.scan.omega_p = vec![6.0, 7.6, 9.0];
    cfg.scan.e_1ph = vec![0.0, 40.0, 70.0];
    cfg
}

#[test]
fn runs_are_bit_identical() {
    let cfg = small();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        run_single(&cfg).unwrap().write(d.path()).unwrap();
    }
    for file in ["trajectory.csv", "densities.csv", "metadata.json"] {
        let a = std::fs::read(dirs[0].path().join(file)).unwrap();
        let b = std::fs::read(dirs[1].path().join(file)).unwrap();
        assert!(a == b, "{file} differs between identical runs");
    }
}

#[test]
fn scan_point_equals_single_run() {
    let cfg = small();
    let scan = scan_frequency(&cfg).unwrap();
    let mut one = cfg.clone();
    one.mode.omega_p = 7.6;
    let single = run_single(&one).unwrap().record;
    let point = scan.points[1].outcome.record().unwrap();
    assert_eq!(point.times_fs, single.times_fs);
    assert_eq!(point.dissipated, single.dissipated);
    assert_eq!(point.active, single.active);
}

#[test]
fn scan_order_does_not_matter() {
    let cfg = small();
    let mut shuffled = cfg.clone();
    shuffled.scan.omega_p = vec![9.0, 6.0, 7.6];
    shuffled.run.threads = 3;
    let a = scan_frequency(&cfg).unwrap();
    let b = scan_frequency(&shuffled).unwrap();
    for (ia, ib) in [(0, 1), (1, 2), (2, 0)] {
        assert_eq!(a.points[ia].omega_p, b.points[ib].omega_p);
        assert_eq!(a.points[ia].outcome.final_pd().to_bits(), b.points[ib].outcome.final_pd().to_bits());
        assert_eq!(a.kappa_b[ia], b.kappa_b[ib]);
    }
}

#[test]
fn uncoupled_row_matches_bare_run() {
    let cfg = small();
    let grid = scan_coupling(&cfg).unwrap();
    assert_eq!(grid.points.len(), 9);
    let mut bare = cfg.clone();
    bare.mode.e_1ph = 0.0;
    let bare = run_single(&bare).unwrap().record;
    let want = *bare.total_dissipated().last().unwrap();
    for iw in 0..3 {
        let p = grid.at(0, iw);
        assert_eq!(p.e_1ph, 0.0);
        assert!((p.outcome.final_pd() - want).abs() < 1e-12, "omega_p = {}", p.omega_p);
        // nothing reaches the plasmon channel without coupling
        let rec = p.outcome.record().unwrap();
        assert!(rec.active[2].iter().all(|&v| v.abs() < 1e-14));
    }
    assert!(grid.at(2, 1).outcome.final_pd() > want);
}

#[test]
fn failed_points_are_recorded_not_raised() {
    let mut cfg = small();
    cfg.run.method = photodiss::lindblad::Method::Rk45;
    cfg.run.max_steps = 5;
    let scan = scan_frequency(&cfg).unwrap();
    assert_eq!(scan.failures(), 3);
    for p in &scan.points {
        assert!(matches!(p.outcome, PointOutcome::Failed { numerical: true, .. }));
        assert!(p.outcome.final_pd().is_nan());
    }
    let dir = tempfile::tempdir().unwrap();
    scan.write(dir.path()).unwrap();
    let summary = std::fs::read_to_string(dir.path().join("scan_summary.csv")).unwrap();
    assert_eq!(summary.lines().filter(|l| l.contains("failed")).count(), 3, "{summary}");
}
