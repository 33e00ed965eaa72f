//! Eigenbasis propagator for the block master equation.
//!
//! The one-excitation block evolves without feeding, so with
//! `H1 = V1 L1 V1^-1` and `rho11(0) = C0 C0^dagger` it is exactly
//! `rho11(t) = C(t) C(t)^dagger`, `C(t) = V1 exp(-i L1 t) V1^-1 C0`.
//!
//! The ground block is kept as `rho00 = V0 X V0^dagger` in the eigenbasis
//! of `H0`. Over a substep of length `h` the coefficients obey
//!
//! ```text
//! X(t+h) = E0(h) X(t) E0(h)^dagger
//!        + kappa int_0^h E0(h-s) Y(t+s) Y(t+s)^dagger E0(h-s)^dagger ds
//! Y(t)   = V0^-1 P_X1 C(t)
//! ```
//!
//! and the integral is done by Gauss–Legendre quadrature, which turns the
//! update into `X += B B^dagger`. The substep keeps `h * nu` below a fixed
//! phase budget, where `nu` bounds the spread of the retained eigenvalues.
//! Absorber tallies of the B0 and X1 channels use the same nodes. The X0
//! tally is the probability fed into X0 during a substep minus the growth
//! of `tr rho00` over it.

use faer::{c64, Mat};

use super::state::DensityState;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, Eigensystem};
use crate::system::{Channel, SystemOperators};

#[derive(Debug, Clone, Copy)]
pub struct SpectralSettings {
    /// Amplitude below which eigencomponents are discarded.
    pub truncation: f64,
    /// Largest accumulated phase `h * nu` per substep.
    pub phase_budget: f64,
    /// Gauss–Legendre nodes per substep.
    pub quadrature_nodes: usize,
}

impl Default for SpectralSettings {
    fn default() -> Self {
        Self {
            truncation: 1e-14,
            phase_budget: 36.0,
            quadrature_nodes: 24,
        }
    }
}

/// Gauss–Legendre nodes and weights on [0, 1].
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; q];
    let mut w = vec![0.0; q];
    for i in 0..q {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=q {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            if q == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = q as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = 0.5 * (1.0 - z);
        w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

fn spread(values: &[c64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let (mut lo, mut hi, mut damp) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for v in values {
        lo = lo.min(v.re);
        hi = hi.max(v.re);
        damp = damp.max(-v.im);
    }
    hi - lo + damp
}

/// Indices to keep: drop the smallest `amps` while their running sum stays
/// below `budget`.
fn keep_above(amps: &[f64], budget: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..amps.len()).collect();
    order.sort_by(|&a, &b| amps[a].total_cmp(&amps[b]));
    let mut acc = 0.0;
    let mut cut = 0;
    for (k, &i) in order.iter().enumerate() {
        acc += amps[i];
        if acc > budget {
            break;
        }
        cut = k + 1;
    }
    let mut keep: Vec<usize> = order[cut..].to_vec();
    keep.sort_unstable();
    keep
}

pub struct SpectralPropagator {
    n: usize,
    kappa: f64,
    lam1: Vec<c64>,
    /// Retained right eigenvectors of H1 (2n x J).
    v1: Mat<c64>,
    /// Eigen-coefficients of C0 (J x r).
    k: Mat<c64>,
    lam0: Vec<c64>,
    /// Retained right eigenvectors of H0 (n x A).
    v0: Mat<c64>,
    /// Gram matrix V0^dagger V0 on the retained set.
    gram0: Mat<c64>,
    /// V0^-1 P_X1 V1 on retained sets (A x J).
    m: Mat<c64>,
    /// Ground-block coefficients (A x A).
    x: Mat<c64>,
    /// X1 rows of V1 (n x J).
    x1_rows: Mat<c64>,
    /// Rows of V1 carrying an absorber, with their rates.
    cap_rows: [(Mat<c64>, Vec<f64>); 2],
    nodes: Vec<f64>,
    weights: Vec<f64>,
    max_substep: f64,
    /// a.u. since the start
    t: f64,
    t0_fs: f64,
    tallies: [f64; 3],
    x0_absorbs: bool,
    table: Option<NodeTable>,
    pub substeps: usize,
}

/// Phase factors at the quadrature nodes for one substep length.
struct NodeTable {
    h: f64,
    /// exp(-i lam1_j s_q), J x Q
    one: Mat<c64>,
    /// sqrt(kappa w_q h) exp(-i lam0_a (h - s_q)), A x Q
    ground: Mat<c64>,
    step0: Vec<c64>,
}

impl SpectralPropagator {
    /// Prepare propagation of `state0` over a horizon of `horizon` a.u.
    pub fn new(
        state0: &DensityState,
        ops: &SystemOperators,
        horizon: f64,
        settings: SpectralSettings,
    ) -> Result<Self> {
        let n = ops.n_basis();
        if state0.n_basis() != n {
            return Err(Error::Parameter("state and operators have different grids".into()));
        }
        let eig1 = Eigensystem::new(&ops.h1_eff())?;
        let eig0 = Eigensystem::new(&ops.h0_eff())?;
        for l in eig1.values.iter().chain(&eig0.values) {
            if l.im > 1e-10 {
                return Err(Error::Integrity(format!(
                    "effective Hamiltonian has a growing mode (Im = {:.3e})",
                    l.im
                )));
            }
        }

        // rho11(0) = C0 C0^dagger
        let herm = Mat::from_fn(2 * n, 2 * n, |i, j| (state0.rho11[(i, j)] + state0.rho11[(j, i)].conj()) * 0.5);
        let c0 = psd_factor(&herm)?;
        let k_full = &eig1.inverse * &c0;
        let r = c0.ncols();
        let amp1: Vec<f64> = (0..2 * n)
            .map(|j| (0..r).map(|c| k_full[(j, c)].norm_sqr()).sum::<f64>().sqrt())
            .collect();
        let jset = keep_above(&amp1, settings.truncation);

        let x_full = {
            let inv0 = &eig0.inverse;
            let tmp = inv0 * &state0.rho00;
            &tmp * inv0.adjoint()
        };
        let has_ground = (0..n).any(|i| (0..n).any(|j| state0.rho00[(i, j)].norm() > 0.0));

        // P_X1 V1 restricted to J, then into the H0 eigenbasis
        let pv1 = Mat::from_fn(n, jset.len(), |i, jj| eig1.vectors[(n + i, jset[jj])]);
        let m_full = &eig0.inverse * &pv1;
        let kj = Mat::from_fn(jset.len(), r, |jj, c| k_full[(jset[jj], c)]);
        let aset: Vec<usize> = if has_ground || ops.kappa == 0.0 {
            if has_ground {
                (0..n).collect()
            } else {
                Vec::new()
            }
        } else {
            let b: Vec<f64> = (0..n)
                .map(|a| {
                    (0..jset.len())
                        .map(|jj| m_full[(a, jj)].norm() * amp1[jset[jj]])
                        .sum()
                })
                .collect();
            let total: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            // error in rho00 from dropping rows D is at most 2 kappa T |b_D| |b|
            let budget = settings.truncation / (2.0 * ops.kappa * horizon.max(1.0) * total.max(1e-300));
            keep_above(&b, budget)
        };

        let lam1: Vec<c64> = jset.iter().map(|&j| eig1.values[j]).collect();
        let lam0: Vec<c64> = aset.iter().map(|&a| eig0.values[a]).collect();
        let v1 = Mat::from_fn(2 * n, jset.len(), |i, jj| eig1.vectors[(i, jset[jj])]);
        let v0 = Mat::from_fn(n, aset.len(), |i, aa| eig0.vectors[(i, aset[aa])]);
        let gram0 = v0.adjoint() * &v0;
        let m = Mat::from_fn(aset.len(), jset.len(), |aa, jj| m_full[(aset[aa], jj)]);
        let x = Mat::from_fn(aset.len(), aset.len(), |a, b| x_full[(aset[a], aset[b])]);

        let rows_for = |c: Channel| {
            let off = if c == Channel::B0 { 0 } else { n };
            let rates = ops.cap_rates(c);
            let idx: Vec<usize> = (0..n).filter(|&i| rates[i] > 0.0).collect();
            (
                Mat::from_fn(idx.len(), jset.len(), |ii, jj| v1[(off + idx[ii], jj)]),
                idx.iter().map(|&i| rates[i]).collect::<Vec<f64>>(),
            )
        };
        let cap_rows = [rows_for(Channel::B0), rows_for(Channel::X1)];
        let x1_rows = Mat::from_fn(n, jset.len(), |i, jj| v1[(n + i, jj)]);

        let nu = (spread(&lam1) + spread(&lam0)).max(2.0 * spread(&lam1)).max(1e-300);
        let (nodes, weights) = gauss_legendre(settings.quadrature_nodes);
        let p = Self {
            n,
            kappa: ops.kappa,
            lam1,
            v1,
            k: kj,
            lam0,
            v0,
            gram0,
            m,
            x,
            x1_rows,
            cap_rows,
            nodes,
            weights,
            max_substep: settings.phase_budget / nu,
            t: 0.0,
            t0_fs: state0.time_fs,
            tallies: state0.dissipated,
            x0_absorbs: ops.cap[Channel::X0.index()].iter().any(|&v| v > 0.0),
            table: None,
            substeps: 0,
        };
        Ok(p)
    }

    /// Number of retained (one-excitation, ground) eigencomponents.
    pub fn active_sizes(&self) -> (usize, usize) {
        (self.lam1.len(), self.lam0.len())
    }

    pub fn max_substep(&self) -> f64 {
        self.max_substep
    }

    pub fn time_au(&self) -> f64 {
        self.t
    }

    /// z = exp(-i L1 t) K
    fn coefficients(&self, t: f64) -> Mat<c64> {
        Mat::from_fn(self.k.nrows(), self.k.ncols(), |j, c| {
            (self.lam1[j] * c64::new(0.0, -t)).exp() * self.k[(j, c)]
        })
    }

    pub fn advance_to(&mut self, t_target: f64) {
        while self.t < t_target {
            let h = (t_target - self.t).min(self.max_substep);
            self.substep(h);
            if t_target - self.t < 1e-12 * t_target.abs().max(1.0) {
                self.t = t_target;
            }
        }
    }

    fn node_table(&self, h: f64) -> NodeTable {
        let q = self.nodes.len();
        NodeTable {
            h,
            one: Mat::from_fn(self.lam1.len(), q, |j, qi| {
                (self.lam1[j] * c64::new(0.0, -self.nodes[qi] * h)).exp()
            }),
            ground: Mat::from_fn(self.lam0.len(), q, |a, qi| {
                let scale = (self.kappa * self.weights[qi] * h).sqrt();
                (self.lam0[a] * c64::new(0.0, -(1.0 - self.nodes[qi]) * h)).exp() * scale
            }),
            step0: self.lam0.iter().map(|l| (l * c64::new(0.0, -h)).exp()).collect(),
        }
    }

    fn substep(&mut self, h: f64) {
        if self.table.as_ref().is_none_or(|t| t.h != h) {
            self.table = Some(self.node_table(h));
        }
        let tab = self.table.take().expect("node table");
        let q = self.nodes.len();
        let r = self.k.ncols();
        let na = self.lam0.len();
        // z(t + s_q) for every node side by side, J x (Q r)
        let now: Vec<c64> = self.lam1.iter().map(|l| (l * c64::new(0.0, -self.t)).exp()).collect();
        let z = Mat::from_fn(self.lam1.len(), q * r, |j, col| {
            now[j] * tab.one[(j, col / r)] * self.k[(j, col % r)]
        });
        let wh: Vec<f64> = self.weights.iter().map(|w| w * h).collect();
        let quadrature = |m: &Mat<c64>, rates: Option<&[f64]>| -> f64 {
            let mut acc = 0.0;
            for col in 0..q * r {
                let mut s = 0.0;
                for i in 0..m.nrows() {
                    s += rates.map_or(1.0, |g| g[i]) * m[(i, col)].norm_sqr();
                }
                acc += wh[col / r] * s;
            }
            acc
        };
        for (ch, (rows, rates)) in self.cap_rows.iter().enumerate() {
            if !rates.is_empty() {
                self.tallies[1 + ch] += quadrature(&(rows * &z), Some(rates));
            }
        }
        let absorbs = self.x0_absorbs && self.kappa > 0.0;
        let fed = if absorbs { self.kappa * quadrature(&(&self.x1_rows * &z), None) } else { 0.0 };
        let tr_before = if self.x0_absorbs { self.trace_rho00() } else { 0.0 };
        if na > 0 {
            for j in 0..na {
                for i in 0..na {
                    self.x[(i, j)] = tab.step0[i] * self.x[(i, j)] * tab.step0[j].conj();
                }
            }
            if self.kappa > 0.0 {
                let y = &self.m * &z;
                let b = Mat::from_fn(na, q * r, |a, col| tab.ground[(a, col / r)] * y[(a, col)]);
                self.x += &b * b.adjoint();
            }
        }
        if self.x0_absorbs {
            // whatever entered X0 and is no longer there was absorbed; the
            // true increment is non-negative, so rounding noise is dropped
            let lost = tr_before + fed - self.trace_rho00();
            self.tallies[0] += lost.max(0.0);
        }
        self.table = Some(tab);
        self.t += h;
        self.substeps += 1;
    }

    fn trace_rho00(&self) -> f64 {
        let na = self.lam0.len();
        let mut tr = 0.0;
        for a in 0..na {
            for b in 0..na {
                tr += (self.gram0[(b, a)] * self.x[(a, b)]).re;
            }
        }
        tr
    }

    /// C(t) at the current time (2n x r).
    fn factor(&self) -> Mat<c64> {
        &self.v1 * self.coefficients(self.t)
    }

    /// Channel populations [X0, B0, X1] at the current time.
    pub fn populations(&self) -> [f64; 3] {
        let c = self.factor();
        let n = self.n;
        let sum = |rows: std::ops::Range<usize>| -> f64 {
            rows.map(|i| (0..c.ncols()).map(|k| c[(i, k)].norm_sqr()).sum::<f64>()).sum()
        };
        [self.trace_rho00(), sum(0..n), sum(n..2 * n)]
    }

    /// Absorbed probability per channel at the current time.
    pub fn dissipated(&self) -> [f64; 3] {
        self.tallies
    }

    /// Diagonals rho_ii of each channel.
    pub fn diagonals(&self) -> [Vec<f64>; 3] {
        let n = self.n;
        let c = self.factor();
        let row = |i: usize| (0..c.ncols()).map(|k| c[(i, k)].norm_sqr()).sum::<f64>();
        let x0 = if self.lam0.is_empty() {
            vec![0.0; n]
        } else {
            let w = &self.v0 * &self.x;
            (0..n)
                .map(|i| {
                    (0..self.lam0.len())
                        .map(|a| (w[(i, a)] * self.v0[(i, a)].conj()).re)
                        .sum()
                })
                .collect()
        };
        [x0, (0..n).map(row).collect(), (n..2 * n).map(row).collect()]
    }

    pub fn state(&self) -> DensityState {
        let c = self.factor();
        let rho11 = &c * c.adjoint();
        let rho00 = if self.lam0.is_empty() {
            Mat::zeros(self.n, self.n)
        } else {
            let w = &self.v0 * &self.x;
            &w * self.v0.adjoint()
        };
        DensityState {
            rho11,
            rho00,
            dissipated: self.dissipated(),
            time_fs: self.t0_fs + crate::units::au_to_fs(self.t),
        }
    }
}

/// C with C C^dagger = rho for a Hermitian positive semidefinite rho.
fn psd_factor(rho: &Mat<c64>) -> Result<Mat<c64>> {
    let m = rho.nrows();
    // a pure state needs no eigensolver
    let (imax, dmax) = (0..m)
        .map(|i| (i, rho[(i, i)].re))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((0, 0.0));
    if dmax <= 0.0 {
        return Ok(Mat::zeros(m, 0));
    }
    let scale = 1.0 / dmax.sqrt();
    let cand = Mat::from_fn(m, 1, |i, _| rho[(i, imax)] * scale);
    let rank1 = (0..m).all(|i| {
        (0..m).all(|j| (cand[(i, 0)] * cand[(j, 0)].conj() - rho[(i, j)]).norm() <= 1e-15 * dmax.max(1.0))
    });
    if rank1 {
        return Ok(cand);
    }
    let (vals, vecs) = hermitian_eigen(rho)?;
    let top = vals.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..m).filter(|&k| vals[k] > 1e-15 * top).collect();
    if let Some(k) = (0..m).find(|&k| vals[k] < -1e-9) {
        return Err(Error::Parameter(format!(
            "initial rho11 is not positive semidefinite (eigenvalue {:.3e})",
            vals[k]
        )));
    }
    Ok(Mat::from_fn(m, keep.len(), |i, kk| vecs[(i, keep[kk])] * vals[keep[kk]].sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(5);
        for p in 0..10 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
            assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "degree {p}");
        }
    }

    #[test]
    fn psd_factor_rebuilds_mixed_state() {
        let a = Mat::from_fn(4, 2, |i, j| c64::new((i + j) as f64 * 0.3, i as f64 * 0.1 - j as f64));
        let rho = &a * a.adjoint();
        let c = psd_factor(&rho).unwrap();
        let back = &c * c.adjoint();
        for i in 0..4 {
            for j in 0..4 {
                assert!((back[(i, j)] - rho[(i, j)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn truncation_keeps_large_components() {
        let keep = keep_above(&[1e-20, 0.5, 1e-16, 0.2], 1e-14);
        assert_eq!(keep, vec![1, 3]);
    }
}
