//! Reference propagators without the sector decomposition: the full
//! `(3n + 3)^2` Lindblad equation with explicit jump operators, and the
//! no-jump wavefunction evolution under the effective Hamiltonian.

use faer::{c64, Mat};

use super::dopri::{Dopri5, StepControl};
use super::propagate::{IntegratorConfig, Method};
use super::rhs::BlockGenerator;
use super::state::DensityState;
use crate::error::{Error, Result};
use crate::linalg::Eigensystem;
use crate::system::{Channel, SystemOperators};
use crate::units::fs_to_au;

/// Largest nuclear basis the dense oracle accepts.
pub const ORACLE_MAX_BASIS: usize = 64;

const I: c64 = c64 { re: 0.0, im: 1.0 };

/// Full-space density matrix: `3n` channel states followed by one dump
/// state per channel that collects absorbed probability.
pub fn embed(state: &DensityState) -> Mat<c64> {
    let n = state.n_basis();
    let dim = 3 * n + 3;
    let mut rho = Mat::<c64>::zeros(dim, dim);
    for i in 0..n {
        for j in 0..n {
            rho[(i, j)] = state.rho00[(i, j)];
        }
    }
    for i in 0..2 * n {
        for j in 0..2 * n {
            rho[(n + i, n + j)] = state.rho11[(i, j)];
        }
    }
    for c in 0..3 {
        rho[(3 * n + c, 3 * n + c)] = c64::new(state.dissipated[c], 0.0);
    }
    rho
}

/// Inverse of [`embed`]; cross-sector coherences are dropped.
pub fn project(rho: &Mat<c64>, n: usize, time_fs: f64) -> DensityState {
    DensityState {
        rho00: Mat::from_fn(n, n, |i, j| rho[(i, j)]),
        rho11: Mat::from_fn(2 * n, 2 * n, |i, j| rho[(n + i, n + j)]),
        dissipated: [0, 1, 2].map(|c| rho[(3 * n + c, 3 * n + c)].re),
        time_fs,
    }
}

/// Full Lindbladian with jumps `sqrt(kappa) a` and
/// `sqrt(2 V_abs(R_i)) |D_c><c, i|`.
struct DenseLindblad {
    n: usize,
    h_eff: Mat<c64>,
    kappa: f64,
    rates: [Vec<f64>; 3],
}

impl DenseLindblad {
    fn new(ops: &SystemOperators) -> Self {
        let n = ops.n_basis();
        let dim = 3 * n + 3;
        let h = ops.h_eff_dense();
        let h_eff = Mat::from_fn(dim, dim, |i, j| {
            if i < 3 * n && j < 3 * n {
                h[(i, j)]
            } else {
                c64::new(0.0, 0.0)
            }
        });
        Self {
            n,
            h_eff,
            kappa: ops.kappa,
            rates: Channel::ALL.map(|c| ops.cap_rates(c)),
        }
    }

    fn apply(&self, rho: &Mat<c64>) -> Mat<c64> {
        let n = self.n;
        let hr = &self.h_eff * rho;
        let dim = rho.nrows();
        let mut d = Mat::from_fn(dim, dim, |i, j| -I * (hr[(i, j)] - hr[(j, i)].conj()));
        // a rho a^dagger maps the X1 block onto the X0 block
        for i in 0..n {
            for j in 0..n {
                d[(i, j)] += rho[(2 * n + i, 2 * n + j)] * self.kappa;
            }
        }
        for c in 0..3 {
            let fed: f64 = (0..n)
                .map(|i| self.rates[c][i] * rho[(c * n + i, c * n + i)].re)
                .sum();
            d[(3 * n + c, 3 * n + c)] += c64::new(fed, 0.0);
        }
        d
    }
}

fn to_vec(m: &Mat<c64>) -> Vec<c64> {
    let mut v = Vec::with_capacity(m.nrows() * m.ncols());
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            v.push(m[(i, j)]);
        }
    }
    v
}

fn from_vec(v: &[c64], dim: usize) -> Mat<c64> {
    Mat::from_fn(dim, dim, |i, j| v[j * dim + i])
}

/// Propagate the full-space density matrix; returns it projected back to
/// sector form together with the full matrix.
pub fn dense_oracle_propagate_full(
    state0: &DensityState,
    ops: &SystemOperators,
    t_final_fs: f64,
    ctl: StepControl,
) -> Result<(DensityState, Mat<c64>)> {
    let n = ops.n_basis();
    if n > ORACLE_MAX_BASIS {
        return Err(Error::Parameter(format!(
            "dense oracle is limited to {ORACLE_MAX_BASIS} basis functions, got {n}"
        )));
    }
    if state0.n_basis() != n {
        return Err(Error::Parameter("state and operators have different grids".into()));
    }
    let l = DenseLindblad::new(ops);
    let dim = 3 * n + 3;
    let mut y = to_vec(&embed(state0));
    let mut t = fs_to_au(state0.time_fs);
    let mut solver = Dopri5::new(y.len(), ctl);
    let mut f = |_t: f64, y: &[c64], dy: &mut [c64]| {
        let d = l.apply(&from_vec(y, dim));
        dy.copy_from_slice(&to_vec(&d));
    };
    solver.integrate(&mut f, &mut t, &mut y, fs_to_au(state0.time_fs + t_final_fs))?;
    let full = from_vec(&y, dim);
    Ok((project(&full, n, state0.time_fs + t_final_fs), full))
}

pub fn dense_oracle_propagate(
    state0: &DensityState,
    ops: &SystemOperators,
    t_final_fs: f64,
    ctl: StepControl,
) -> Result<DensityState> {
    dense_oracle_propagate_full(state0, ops, t_final_fs, ctl).map(|(s, _)| s)
}

/// psi(t) under `i d psi/dt = H1_eff psi` at the requested times (fs,
/// ascending, relative to 0). `Method::Spectral` uses the exact
/// eigenvector expansion, `Method::Rk45` adaptive integration.
pub fn pure_state_effective_propagate(
    psi0: &[c64],
    ops: &SystemOperators,
    times_fs: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<Vec<c64>>> {
    let n = ops.n_basis();
    if psi0.len() != 2 * n {
        return Err(Error::Parameter(format!(
            "one-excitation vector has length {}, expected {}",
            psi0.len(),
            2 * n
        )));
    }
    if times_fs.windows(2).any(|w| w[1] < w[0]) || times_fs.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::Parameter("output times must be non-negative and ascending".into()));
    }
    cfg.validate()?;
    match cfg.method {
        Method::Spectral => {
            let eig = Eigensystem::new(&ops.h1_eff())?;
            let psi = Mat::from_fn(2 * n, 1, |i, _| psi0[i]);
            let k = &eig.inverse * &psi;
            Ok(times_fs
                .iter()
                .map(|&t| {
                    let ta = fs_to_au(t);
                    let z = Mat::from_fn(2 * n, 1, |j, _| (eig.values[j] * c64::new(0.0, -ta)).exp() * k[(j, 0)]);
                    let v = &eig.vectors * &z;
                    (0..2 * n).map(|i| v[(i, 0)]).collect()
                })
                .collect())
        }
        Method::Rk45 => {
            let gen = BlockGenerator::new(ops);
            let mut f = |_t: f64, y: &[c64], dy: &mut [c64]| {
                gen.apply_h1(y, dy);
                dy.iter_mut().for_each(|v| *v *= -I);
            };
            let mut solver = Dopri5::new(2 * n, cfg.step_control());
            let mut y = psi0.to_vec();
            let mut t = 0.0;
            let mut out = Vec::with_capacity(times_fs.len());
            for &tf in times_fs {
                solver.integrate(&mut f, &mut t, &mut y, fs_to_au(tf))?;
                out.push(y.clone());
            }
            Ok(out)
        }
    }
}
