use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::linalg::hermitian_eigenvalues;
use crate::molecule::{MoleculeModel, Surface};
use crate::system::Channel;

/// Sector-blocked density matrix.
///
/// `rho11` lives on the one-excitation space ordered `[B0, X1]`, `rho00`
/// on the X0 nuclear space. Coherences between the sectors are never
/// created by the dynamics and are not stored. `dissipated[c]` is the
/// probability absorbed from channel `c` (indexed by [`Channel::index`]).
#[derive(Debug, Clone)]
pub struct DensityState {
    pub rho11: Mat<c64>,
    pub rho00: Mat<c64>,
    pub dissipated: [f64; 3],
    pub time_fs: f64,
}

impl DensityState {
    pub fn zeros(n: usize) -> Self {
        Self {
            rho11: Mat::zeros(2 * n, 2 * n),
            rho00: Mat::zeros(n, n),
            dissipated: [0.0; 3],
            time_fs: 0.0,
        }
    }

    /// Pure one-excitation state |psi><psi| with `psi` ordered `[B0, X1]`.
    pub fn from_wavefunction(psi: &[c64]) -> Result<Self> {
        if psi.len() % 2 != 0 {
            return Err(Error::Parameter("one-excitation vector must have even length".into()));
        }
        let n = psi.len() / 2;
        let mut s = Self::zeros(n);
        s.rho11 = Mat::from_fn(2 * n, 2 * n, |i, j| psi[i] * psi[j].conj());
        Ok(s)
    }

    pub fn n_basis(&self) -> usize {
        self.rho00.nrows()
    }

    pub fn trace_rho11(&self) -> f64 {
        (0..self.rho11.nrows()).map(|i| self.rho11[(i, i)].re).sum()
    }

    pub fn trace_rho00(&self) -> f64 {
        (0..self.rho00.nrows()).map(|i| self.rho00[(i, i)].re).sum()
    }

    /// tr rho11 + tr rho00 + all tallies.
    pub fn total(&self) -> f64 {
        self.trace_rho11() + self.trace_rho00() + self.dissipated.iter().sum::<f64>()
    }

    /// 1 - total probability.
    pub fn trace_deficit(&self) -> f64 {
        1.0 - self.total()
    }

    /// Population left on each channel (the "active" probability).
    pub fn populations(&self) -> [f64; 3] {
        let n = self.n_basis();
        let b: f64 = (0..n).map(|i| self.rho11[(i, i)].re).sum();
        let x1: f64 = (n..2 * n).map(|i| self.rho11[(i, i)].re).sum();
        [self.trace_rho00(), b, x1]
    }

    /// Diagonal rho_ii of one channel.
    pub fn channel_diagonal(&self, c: Channel) -> Vec<f64> {
        let n = self.n_basis();
        match c {
            Channel::X0 => (0..n).map(|i| self.rho00[(i, i)].re).collect(),
            Channel::B0 => (0..n).map(|i| self.rho11[(i, i)].re).collect(),
            Channel::X1 => (0..n).map(|i| self.rho11[(n + i, n + i)].re).collect(),
        }
    }

    /// Largest |rho - rho^dagger| element over both blocks.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for m in [&self.rho11, &self.rho00] {
            for i in 0..m.nrows() {
                for j in 0..=i {
                    worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
                }
            }
        }
        worst
    }

    /// Smallest eigenvalues of (rho11, rho00).
    pub fn min_eigenvalues(&self) -> Result<(f64, f64)> {
        let lo = |m: &Mat<c64>| -> Result<f64> {
            if m.nrows() == 0 {
                return Ok(0.0);
            }
            let h = Mat::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5);
            Ok(hermitian_eigenvalues(&h)?.first().copied().unwrap_or(0.0))
        };
        Ok((lo(&self.rho11)?, lo(&self.rho00)?))
    }

    /// tr(rho^2) over both blocks.
    pub fn purity(&self) -> f64 {
        let mut p = 0.0;
        for m in [&self.rho11, &self.rho00] {
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    p += (m[(i, j)] * m[(j, i)]).re;
                }
            }
        }
        p
    }

    /// <R> over the probability still on the grid.
    pub fn mean_r(&self, nodes: &[f64]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for c in Channel::ALL {
            for (r, p) in nodes.iter().zip(self.channel_diagonal(c)) {
                num += r * p;
                den += p;
            }
        }
        num / den
    }

    /// Largest elementwise difference of both blocks and tallies.
    pub fn max_difference(&self, other: &DensityState) -> f64 {
        let mut worst = 0.0f64;
        for (a, b) in [(&self.rho11, &other.rho11), (&self.rho00, &other.rho00)] {
            for i in 0..a.nrows() {
                for j in 0..a.ncols() {
                    worst = worst.max((a[(i, j)] - b[(i, j)]).norm());
                }
            }
        }
        for (a, b) in self.dissipated.iter().zip(&other.dissipated) {
            worst = worst.max((a - b).abs());
        }
        worst
    }

    pub(crate) fn flat_len(n: usize) -> usize {
        5 * n * n + 3
    }

    /// `[rho11 column-major, rho00 column-major, D_X0, D_B0, D_X1]`.
    pub(crate) fn to_flat(&self) -> Vec<c64> {
        let n = self.n_basis();
        let mut y = Vec::with_capacity(Self::flat_len(n));
        for j in 0..2 * n {
            for i in 0..2 * n {
                y.push(self.rho11[(i, j)]);
            }
        }
        for j in 0..n {
            for i in 0..n {
                y.push(self.rho00[(i, j)]);
            }
        }
        y.extend(self.dissipated.iter().map(|&d| c64::new(d, 0.0)));
        y
    }

    pub(crate) fn from_flat(y: &[c64], n: usize, time_fs: f64) -> Self {
        let m = 2 * n;
        let rho11 = Mat::from_fn(m, m, |i, j| y[j * m + i]);
        let o = m * m;
        let rho00 = Mat::from_fn(n, n, |i, j| y[o + j * n + i]);
        let t = o + n * n;
        Self {
            rho11,
            rho00,
            dissipated: [y[t].re, y[t + 1].re, y[t + 2].re],
            time_fs,
        }
    }
}

/// Vibrational ground state of V_X placed on the B0 channel, as a
/// one-excitation vector `[B0, X1]`.
pub fn initial_wavefunction(model: &MoleculeModel) -> Result<Vec<c64>> {
    let (_, chi) = model.vibrational_ground_state(Surface::X)?;
    let n = chi.len();
    let mut psi = vec![c64::new(0.0, 0.0); 2 * n];
    for (p, c) in psi.iter_mut().zip(&chi) {
        *p = c64::new(*c, 0.0);
    }
    Ok(psi)
}

/// Vertical excitation: rho11 = |chi0><chi0| on B0, everything else empty.
pub fn initial_state(model: &MoleculeModel) -> Result<DensityState> {
    DensityState::from_wavefunction(&initial_wavefunction(model)?)
}
