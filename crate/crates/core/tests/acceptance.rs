//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails at
//! the end if any criterion failed.
//!
//! Criteria 8-12 need tabulated H2 curves: point `PHOTODISS_H2_CONFIG` at an
//! experiment TOML whose `[molecule]` section loads them. Without it those
//! lines report SKIP.

mod common;

use std::time::Instant;

use faer::c64;
use photodiss::experiment::{fit_saturation, scan_coupling, scan_frequency, ExperimentConfig, Setup};
use photodiss::fedvr::{Boundary, FedvrGrid};
use photodiss::lindblad::{
    dense_oracle_propagate, initial_state, initial_wavefunction, propagate, pure_state_effective_propagate,
    DensityState, IntegratorConfig, Method, StepControl,
};
use photodiss::molecule::{MoleculeModel, Surface, SurrogateParams};
use photodiss::plasmon::PlasmonMode;
use photodiss::system::{CapParams, Channel, SystemOperators};
use photodiss::units::{ev_to_hartree, fs_to_au, hartree_to_ev, H2_REDUCED_MASS};

const TRACE_TOL: f64 = 1e-8;
const RUNTIME_LIMIT_S: f64 = 600.0;
const ORACLE_TOL: f64 = 1e-8;
const PURE_STATE_TOL: f64 = 1e-10;
const HARMONIC_REL_TOL: f64 = 1e-8;
const NUMEROV_REL_TOL: f64 = 1e-6;
const RABI_TOL: f64 = 1e-6;
const LORENTZ_REL_TOL: f64 = 0.05;
const SUM_RULE_TOL: f64 = 1e-12;

const BARE_PD: (f64, f64) = (0.005, 0.02);
const GROUND_PD: (f64, f64) = (0.45, 0.65);
const B0_CHECK_FS: f64 = 100.0;
const B0_REMAINING_MAX: f64 = 0.5;
const PEAK_BELOW_MAX_EV: f64 = 0.5;
const LONG_RUN_FS: f64 = 10_000.0;
const LONG_RUN_OMEGA_EV: f64 = 4.0;
const LONG_RUN_PD_MIN: f64 = 0.40;
const LONG_RUN_LIMIT: (f64, f64) = (0.44, 0.54);

#[derive(Default)]
struct Report {
    failed: Vec<String>,
}

impl Report {
    fn line(&mut self, id: u32, name: &str, pass: bool, detail: String) {
        println!("[{}] {id:>2} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed.push(format!("{id} {name}"));
        }
    }

    fn error(&mut self, id: u32, name: &str, e: impl std::fmt::Display) {
        self.line(id, name, false, format!("error: {e}"));
    }

    fn skip(&self, id: u32, name: &str, why: &str) {
        println!("[SKIP] {id:>2} {name}: {why}");
    }
}

fn small_grid_system() -> (MoleculeModel, SystemOperators) {
    let grid = FedvrGrid::with_boundary(0.5, 9.0, 5, 6, Boundary::Dirichlet).unwrap();
    assert_eq!(grid.n_basis(), 24);
    let m = MoleculeModel::surrogate(&SurrogateParams::default(), grid).unwrap();
    let mode = PlasmonMode::new(7.6, 0.476, 70.0).unwrap();
    let cap = CapParams { strength: 5e-3, r_abs: 5.0 };
    let ops = SystemOperators::assemble(&m, &mode, cap).unwrap();
    (m, ops)
}

fn trace_conservation(r: &mut Report) {
    let name = "trace conservation, 1000 fs at n = 369";
    let cfg = ExperimentConfig::default();
    let start = Instant::now();
    let run = Setup::build(&cfg).and_then(|s| {
        let n = s.ops.n_basis();
        s.propagate(1000.0, &IntegratorConfig::default()).map(|rec| (n, rec))
    });
    let secs = start.elapsed().as_secs_f64();
    match run {
        Ok((n, rec)) => {
            let dev = rec.summary.max_abs_trace_deficit;
            r.line(
                1,
                name,
                n == 369 && dev <= TRACE_TOL && secs <= RUNTIME_LIMIT_S,
                format!("n = {n}, max |deficit| = {dev:.2e} (<= {TRACE_TOL:e}), {secs:.0} s (<= {RUNTIME_LIMIT_S} s)"),
            );
        }
        Err(e) => r.error(1, name, e),
    }
}

fn oracle_equivalence(r: &mut Report) {
    let name = "block solver vs dense oracle, 24 nodes, 50 fs";
    let (m, ops) = small_grid_system();
    let s0 = initial_state(&m).unwrap();
    let ctl = StepControl { rel_tol: 1e-12, abs_tol: 1e-14, max_step: 20.0, max_steps: 10_000_000 };
    let got = dense_oracle_propagate(&s0, &ops, 50.0, ctl)
        .and_then(|want| propagate(&s0, &ops, 50.0, &IntegratorConfig::default(), &mut |_| {}).map(|(_, s)| s.max_difference(&want)));
    match got {
        Ok(diff) => r.line(2, name, diff <= ORACLE_TOL, format!("max |diff| = {diff:.2e} (<= {ORACLE_TOL:e})")),
        Err(e) => r.error(2, name, e),
    }
}

fn pure_state_equivalence(r: &mut Report) {
    let name = "pure-state effective Hamiltonian reproduces rho11";
    let (m, ops) = small_grid_system();
    let psi0 = initial_wavefunction(&m).unwrap();
    let times = [10.0, 25.0, 50.0];
    let cfg = IntegratorConfig { method: Method::Rk45, rel_tol: 1e-13, abs_tol: 1e-15, ..Default::default() };
    let psis = match pure_state_effective_propagate(&psi0, &ops, &times, &cfg) {
        Ok(p) => p,
        Err(e) => return r.error(3, name, e),
    };
    let mut worst = 0.0f64;
    let mut state = initial_state(&m).unwrap();
    for (t, psi) in times.iter().zip(&psis) {
        state = match propagate(&state, &ops, t - state.time_fs, &IntegratorConfig::default(), &mut |_| {}) {
            Ok((_, s)) => s,
            Err(e) => return r.error(3, name, e),
        };
        for i in 0..psi.len() {
            for j in 0..psi.len() {
                worst = worst.max((psi[i] * psi[j].conj() - state.rho11[(i, j)]).norm());
            }
        }
    }
    r.line(3, name, worst <= PURE_STATE_TOL, format!("max |diff| = {worst:.2e} (<= {PURE_STATE_TOL:e}) at 10, 25, 50 fs"));
}

fn fedvr_fidelity(r: &mut Report) {
    let name = "FEDVR harmonic levels and Numerov bound states";
    // H2-like oscillator across the full span; order 13 converges it, the
    // production order 9 is reported alongside
    let omega = 0.02;
    let harmonic_err = |order: usize| {
        let grid = FedvrGrid::new(0.5, 17.0, 46, order).unwrap();
        let mass = H2_REDUCED_MASS;
        let mut h = grid.kinetic_operator(mass).unwrap().to_dense();
        for (i, x) in grid.nodes().iter().enumerate() {
            h[(i, i)] += 0.5 * mass * omega * omega * (x - 8.75).powi(2);
        }
        let (vals, _) = photodiss::linalg::symmetric_eigen(&h).unwrap();
        (0..10)
            .map(|k| (vals[k] / (omega * (k as f64 + 0.5)) - 1.0).abs())
            .fold(0.0, f64::max)
    };
    let (harmonic, production) = (harmonic_err(13), harmonic_err(9));

    let grid = FedvrGrid::new(0.5, 17.0, 46, 9).unwrap();
    let params = SurrogateParams::default();
    let m = MoleculeModel::surrogate(&params, grid.clone()).unwrap();
    let mut numerov = 0.0f64;
    for (surface, curve) in [(Surface::X, params.x_curve()), (Surface::B, params.b_curve())] {
        let fedvr = m.vibrational_states(surface, 5).unwrap();
        let want = common::numerov_levels(|x| curve.eval(x), m.reduced_mass, 0.5, 17.0, 40_000, 5);
        let floor = m.surface(surface).values.iter().copied().fold(f64::INFINITY, f64::min);
        for ((e, _), w) in fedvr.iter().zip(&want) {
            numerov = numerov.max(((e - floor) / (w - floor) - 1.0).abs());
        }
    }
    r.line(
        4,
        name,
        harmonic <= HARMONIC_REL_TOL && numerov <= NUMEROV_REL_TOL,
        format!(
            "harmonic max rel err {harmonic:.2e} (<= {HARMONIC_REL_TOL:e}; {production:.1e} at order 9), \
             Numerov max rel err {numerov:.2e} (<= {NUMEROV_REL_TOL:e})"
        ),
    );
}

fn clamped_start() -> DensityState {
    let mut s = DensityState::zeros(1);
    s.rho11[(0, 0)] = c64::new(1.0, 0.0);
    s
}

/// Amplitudes on (B0, X1) of the clamped two-level problem started on B0.
fn two_level(omega_m: f64, omega_p: f64, kappa: f64, g: f64, t: f64) -> (c64, c64) {
    let a = c64::new(omega_m, 0.0);
    let d = c64::new(omega_p, -0.5 * kappa);
    let mean = (a + d) * 0.5;
    let half = (a - d) * 0.5;
    let w = (half * half + c64::new(g * g, 0.0)).sqrt();
    let phase = (mean * c64::new(0.0, -t)).exp();
    let (cos, sin) = ((w * t).cos(), (w * t).sin());
    let cb = phase * (cos - c64::new(0.0, 1.0) * half / w * sin);
    let cx = phase * (c64::new(0.0, -g) / w * sin);
    (cb, cx)
}

fn damped_rabi(r: &mut Report) {
    let name = "clamped damped Rabi vs closed form, 20 fs";
    let kappa = ev_to_hartree(0.476);
    let omega_p = ev_to_hartree(7.6);
    let omega_m = omega_p + ev_to_hartree(0.1);
    let g = ev_to_hartree(0.12);
    let ops = SystemOperators::clamped(3.0, omega_m, omega_p, kappa, g).unwrap();
    let cfg = IntegratorConfig { output_stride: 0.25, ..Default::default() };
    let rec = match propagate(&clamped_start(), &ops, 20.0, &cfg, &mut |_| {}) {
        Ok((rec, _)) => rec,
        Err(e) => return r.error(5, name, e),
    };
    let mut worst = 0.0f64;
    for (k, &t) in rec.times_fs.iter().enumerate() {
        let (cb, cx) = two_level(omega_m, omega_p, kappa, g, fs_to_au(t));
        let (pb, px) = (cb.norm_sqr(), cx.norm_sqr());
        let want = [1.0 - pb - px, pb, px];
        for c in Channel::ALL {
            worst = worst.max((rec.active[c.index()][k] - want[c.index()]).abs());
        }
    }
    r.line(5, name, worst <= RABI_TOL, format!("max |diff| = {worst:.2e} (<= {RABI_TOL:e}) over {} samples", rec.times_fs.len()));
}

/// Least-squares slope of ln P against time.
fn log_slope(t: &[f64], p: &[f64]) -> f64 {
    let n = t.len() as f64;
    let y: Vec<f64> = p.iter().map(|v| v.ln()).collect();
    let (mt, my) = (t.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = t.iter().zip(&y).map(|(a, b)| (a - mt) * (b - my)).sum();
    let sxx: f64 = t.iter().map(|a| (a - mt).powi(2)).sum();
    sxy / sxx
}

fn lorentzian(r: &mut Report) {
    let name = "weak-coupling decay rate follows the Lorentzian";
    let kappa = ev_to_hartree(0.476);
    let g = kappa / 40.0;
    let omega_p = ev_to_hartree(7.6);
    let cfg = IntegratorConfig { output_stride: 10.0, ..Default::default() };
    let mut worst = 0.0f64;
    for k in -4..=4 {
        let delta = 0.5 * k as f64 * kappa;
        let ops = SystemOperators::clamped(3.0, omega_p + delta, omega_p, kappa, g).unwrap();
        let rec = match propagate(&clamped_start(), &ops, 1000.0, &cfg, &mut |_| {}) {
            Ok((rec, _)) => rec,
            Err(e) => return r.error(6, name, e),
        };
        // skip the fast transient of the photon-like branch
        let first = rec.times_fs.partition_point(|&t| t < 100.0);
        let t: Vec<f64> = rec.times_fs[first..].iter().map(|&t| fs_to_au(t)).collect();
        let rate = -log_slope(&t, &rec.active[Channel::B0.index()][first..]);
        let want = 4.0 * g * g * kappa / (4.0 * delta * delta + kappa * kappa);
        worst = worst.max((rate / want - 1.0).abs());
    }
    r.line(
        6,
        name,
        worst <= LORENTZ_REL_TOL,
        format!("g = kappa/40, delta in [-2, 2] kappa: max rel err {worst:.2e} (<= {LORENTZ_REL_TOL})"),
    );
}

fn sum_rule(r: &mut Report) {
    let name = "sum of polariton decay rates equals kappa";
    let grid = FedvrGrid::new(0.5, 17.0, 46, 9).unwrap();
    let m = MoleculeModel::surrogate(&SurrogateParams::default(), grid).unwrap();
    let mut worst = 0.0f64;
    for (wp, e) in [(7.6, 70.0), (4.0, 100.0), (11.0, 10.0)] {
        let mode = PlasmonMode::new(wp, 0.476, e).unwrap();
        let ops = SystemOperators::assemble(&m, &mode, CapParams::default()).unwrap();
        let pc = ops.polaritonic_curves();
        for i in 0..ops.n_basis() {
            worst = worst.max((-2.0 * (pc.plus[i].im + pc.minus[i].im) - ops.kappa).abs());
        }
    }
    r.line(7, name, worst <= SUM_RULE_TOL, format!("max |sum - kappa| = {worst:.2e} Eh (<= {SUM_RULE_TOL:e}) at every node"));
}

fn curves_suite(r: &mut Report) {
    let names = [
        (8, "bare-molecule dissociation"),
        (9, "reference-mode dissociation"),
        (10, "frequency scan peak below min omega_m"),
        (11, "4 eV saturation to 10 ps"),
        (12, "interior optimum of the coupling scan"),
    ];
    let Some(path) = std::env::var_os("PHOTODISS_H2_CONFIG") else {
        for (id, name) in names {
            r.skip(id, name, "needs tabulated H2 curves (set PHOTODISS_H2_CONFIG)");
        }
        return;
    };
    let base = match ExperimentConfig::load(&path) {
        Ok(c) => c,
        Err(e) => {
            for (id, name) in names {
                r.error(id, name, &e);
            }
            return;
        }
    };
    let ic = base.run.integrator();

    let (id, name) = names[0];
    let mut bare = base.clone();
    bare.mode.e_1ph = 0.0;
    match Setup::build(&bare).and_then(|s| s.propagate(1000.0, &ic)) {
        Ok(rec) => {
            let pd = rec.total_dissipated().last().copied().unwrap_or(f64::NAN);
            r.line(id, name, (BARE_PD.0..=BARE_PD.1).contains(&pd), format!("P_D(1000 fs) = {pd:.4} in {BARE_PD:?}"));
        }
        Err(e) => r.error(id, name, e),
    }

    let (id, name) = names[1];
    match Setup::build(&base).and_then(|s| s.propagate(1000.0, &ic)) {
        Ok(rec) => {
            let ground = rec.final_dissipated(Channel::X0);
            let k = rec.times_fs.partition_point(|&t| t < B0_CHECK_FS).min(rec.times_fs.len() - 1);
            let b0 = rec.active[Channel::B0.index()][k];
            r.line(
                id,
                name,
                (GROUND_PD.0..=GROUND_PD.1).contains(&ground) && b0 <= B0_REMAINING_MAX,
                format!("ground P_D = {ground:.4} in {GROUND_PD:?}, B0 population at {B0_CHECK_FS} fs = {b0:.3} (<= {B0_REMAINING_MAX})"),
            );
        }
        Err(e) => r.error(id, name, e),
    }

    let (id, name) = names[2];
    let mut best_omega = None;
    match scan_frequency(&base) {
        Ok(scan) => {
            let (w, pd) = scan
                .points
                .iter()
                .map(|p| (p.omega_p, p.outcome.final_pd()))
                .filter(|p| p.1.is_finite())
                .fold((f64::NAN, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
            let min_wm = base.build_molecule().map(|m| hartree_to_ev(m.excitation_energy().min)).unwrap_or(f64::NAN);
            best_omega = Some(w);
            let below = min_wm - w;
            r.line(
                id,
                name,
                (0.0..=PEAK_BELOW_MAX_EV).contains(&below) && scan.failures() == 0,
                format!("peak P_D = {pd:.4} at {w:.2} eV, min omega_m = {min_wm:.3} eV, {} failed points", scan.failures()),
            );
        }
        Err(e) => r.error(id, name, e),
    }

    let (id, name) = names[3];
    let mut long = base.clone();
    long.mode.omega_p = LONG_RUN_OMEGA_EV;
    long.run.output_stride = long.run.output_stride.max(10.0);
    let long_ic = long.run.integrator();
    match Setup::build(&long).and_then(|s| s.propagate(LONG_RUN_FS, &long_ic)) {
        Ok(rec) => {
            let total = rec.total_dissipated();
            let pd = total.last().copied().unwrap_or(f64::NAN);
            match fit_saturation(&rec.times_fs, &total, None) {
                Ok(fit) => r.line(
                    id,
                    name,
                    pd > LONG_RUN_PD_MIN && (LONG_RUN_LIMIT.0..=LONG_RUN_LIMIT.1).contains(&fit.limit),
                    format!("P_D(10 ps) = {pd:.4} (> {LONG_RUN_PD_MIN}), fitted limit {:.4} in {LONG_RUN_LIMIT:?}", fit.limit),
                ),
                Err(e) => r.error(id, name, format!("P_D(10 ps) = {pd:.4}; fit: {e}")),
            }
        }
        Err(e) => r.error(id, name, e),
    }

    let (id, name) = names[4];
    let mut grid = base.clone();
    grid.scan.omega_p = vec![best_omega.unwrap_or(base.mode.omega_p)];
    match scan_coupling(&grid) {
        Ok(scan) => {
            let pd: Vec<f64> = (0..scan.e_1ph.len()).map(|ie| scan.at(ie, 0).outcome.final_pd()).collect();
            let (k, _) = pd
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
            let interior = k > 0 && k + 1 < pd.len();
            r.line(
                id,
                name,
                interior && scan.failures() == 0,
                format!("omega_p = {:.2} eV, best E_1ph = {} mV/bohr over {:?}", grid.scan.omega_p[0], scan.e_1ph[k], scan.e_1ph),
            );
        }
        Err(e) => r.error(id, name, e),
    }
}

#[test]
fn acceptance() {
    let mut r = Report::default();
    trace_conservation(&mut r);
    oracle_equivalence(&mut r);
    pure_state_equivalence(&mut r);
    fedvr_fidelity(&mut r);
    damped_rabi(&mut r);
    lorentzian(&mut r);
    sum_rule(&mut r);
    curves_suite(&mut r);
    assert!(r.failed.is_empty(), "failed criteria: {:?}", r.failed);
}
