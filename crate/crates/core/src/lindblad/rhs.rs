//! Block form of the master equation.
//!
//! With `H1` and `H0` the effective Hamiltonians of the two sectors,
//!
//! ```text
//! d rho11/dt = -i (H1 rho11 - rho11 H1^dagger)
//! d rho00/dt = -i (H0 rho00 - rho00 H0^dagger) + kappa rho11[X1, X1]
//! d D_c/dt   = sum_i 2 V_abs(R_i) rho_c,ii
//! ```

use faer::c64;
use rayon::prelude::*;

use super::state::DensityState;
use crate::system::{Channel, SystemOperators};

/// Matrix-free application of the sector Hamiltonians.
#[derive(Debug, Clone)]
pub struct BlockGenerator {
    ops: SystemOperators,
    diag1: Vec<c64>,
    diag0: Vec<c64>,
    rates: [Vec<f64>; 3],
}

const I: c64 = c64 { re: 0.0, im: 1.0 };

impl BlockGenerator {
    pub fn new(ops: &SystemOperators) -> Self {
        let n = ops.n_basis();
        let mut diag1 = Vec::with_capacity(2 * n);
        for i in 0..n {
            diag1.push(c64::new(ops.v_b[i], -ops.cap[Channel::B0.index()][i]));
        }
        for i in 0..n {
            diag1.push(c64::new(
                ops.v_x[i] + ops.omega_p,
                -0.5 * ops.kappa - ops.cap[Channel::X1.index()][i],
            ));
        }
        let diag0 = (0..n)
            .map(|i| c64::new(ops.v_x[i], -ops.cap[Channel::X0.index()][i]))
            .collect();
        Self {
            rates: Channel::ALL.map(|c| ops.cap_rates(c)),
            ops: ops.clone(),
            diag1,
            diag0,
        }
    }

    pub fn n_basis(&self) -> usize {
        self.ops.n_basis()
    }

    /// out = H1_eff v on the `[B0, X1]` space.
    pub fn apply_h1(&self, v: &[c64], out: &mut [c64]) {
        let n = self.n_basis();
        for (o, (d, x)) in out.iter_mut().zip(self.diag1.iter().zip(v)) {
            *o = d * x;
        }
        let (vb, vx) = v.split_at(n);
        let (ob, ox) = out.split_at_mut(n);
        self.ops.kinetic.mul_add_complex(vb, ob);
        self.ops.kinetic.mul_add_complex(vx, ox);
        for i in 0..n {
            let g = self.ops.coupling[i];
            ob[i] += vx[i] * g;
            ox[i] += vb[i] * g;
        }
    }

    /// out = H0_eff v on the X0 space.
    pub fn apply_h0(&self, v: &[c64], out: &mut [c64]) {
        for (o, (d, x)) in out.iter_mut().zip(self.diag0.iter().zip(v)) {
            *o = d * x;
        }
        self.ops.kinetic.mul_add_complex(v, out);
    }

    /// Time derivative of the flat state `[rho11, rho00, D_X0, D_B0, D_X1]`.
    pub fn derivative(&self, y: &[c64], dy: &mut [c64]) {
        let n = self.n_basis();
        let m = 2 * n;
        let (r11, rest) = y.split_at(m * m);
        let (r00, _) = rest.split_at(n * n);
        let (d11, drest) = dy.split_at_mut(m * m);
        let (d00, dtally) = drest.split_at_mut(n * n);

        // columns of H rho, stored temporarily in the output
        d11.par_chunks_mut(m)
            .zip(r11.par_chunks(m))
            .for_each(|(o, col)| self.apply_h1(col, o));
        d00.par_chunks_mut(n)
            .zip(r00.par_chunks(n))
            .for_each(|(o, col)| self.apply_h0(col, o));
        antihermitian_part(d11, m);
        antihermitian_part(d00, n);
        let kappa = self.ops.kappa;
        for j in 0..n {
            for i in 0..n {
                d00[j * n + i] += r11[(n + j) * m + n + i] * kappa;
            }
        }

        let mut rates = [0.0; 3];
        for i in 0..n {
            rates[0] += self.rates[0][i] * r00[i * n + i].re;
            rates[1] += self.rates[1][i] * r11[i * m + i].re;
            rates[2] += self.rates[2][i] * r11[(n + i) * m + n + i].re;
        }
        for (d, r) in dtally.iter_mut().zip(rates) {
            *d = c64::new(r, 0.0);
        }
    }
}

/// Replace `M` (column-major, `m x m`) by `-i (M - M^dagger)`.
fn antihermitian_part(a: &mut [c64], m: usize) {
    for j in 0..m {
        for i in 0..=j {
            let mij = a[j * m + i];
            let mji = a[i * m + j];
            let v = -I * (mij - mji.conj());
            a[j * m + i] = v;
            a[i * m + j] = v.conj();
        }
    }
}

/// d(state)/dt as a state-shaped object.
pub fn rhs(state: &DensityState, ops: &SystemOperators) -> DensityState {
    let n = ops.n_basis();
    let gen = BlockGenerator::new(ops);
    let y = state.to_flat();
    let mut dy = vec![c64::new(0.0, 0.0); y.len()];
    gen.derivative(&y, &mut dy);
    DensityState::from_flat(&dy, n, state.time_fs)
}
