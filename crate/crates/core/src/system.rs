//! Coupled molecule–pseudomode operators in the zero- and one-excitation
//! sectors, plus Born–Oppenheimer polaritonic curves.
//!
//! Channel order is fixed: `[X0, B0, X1]` where `X0 = |X,0>` (no
//! excitation), `B0 = |B,0>` and `X1 = |X,1>` (one excitation). A full
//! state vector stacks the three channel blocks of `n_basis` nuclear
//! coefficients in that order.

use std::io::Write;
use std::path::Path;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fedvr::CsrMatrix;
use crate::molecule::MoleculeModel;
use crate::plasmon::PlasmonMode;
use crate::units::hartree_to_ev;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    X0,
    B0,
    X1,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::X0, Channel::B0, Channel::X1];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Number of electronic plus photonic excitations.
    pub fn excitations(self) -> usize {
        match self {
            Channel::X0 => 0,
            Channel::B0 | Channel::X1 => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Channel::X0 => "X0",
            Channel::B0 => "B0",
            Channel::X1 => "X1",
        }
    }
}

/// Truncated electronic-photonic ⊗ nuclear space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateSpace {
    pub n_basis: usize,
}

impl StateSpace {
    pub fn n_total(&self) -> usize {
        3 * self.n_basis
    }

    /// Offset of a channel block in a full state vector.
    pub fn offset(&self, c: Channel) -> usize {
        c.index() * self.n_basis
    }
}

/// Quartic absorber `C (R - r_abs)^4` beyond `r_abs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapParams {
    /// hartree / bohr^4
    pub strength: f64,
    /// bohr
    pub r_abs: f64,
}

impl Default for CapParams {
    fn default() -> Self {
        Self {
            strength: 1e-4,
            r_abs: 12.0,
        }
    }
}

impl CapParams {
    pub fn none() -> Self {
        Self {
            strength: 0.0,
            r_abs: 0.0,
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r > self.r_abs {
            self.strength * (r - self.r_abs).powi(4)
        } else {
            0.0
        }
    }
}

/// Everything the propagators need, in atomic units.
#[derive(Debug, Clone)]
pub struct SystemOperators {
    pub space: StateSpace,
    pub nodes: Vec<f64>,
    /// Quadrature weights of the nodes; rho_ii / w_i is a density in R.
    pub weights: Vec<f64>,
    pub kinetic: CsrMatrix,
    pub v_x: Vec<f64>,
    pub v_b: Vec<f64>,
    /// Mode energy (hartree).
    pub omega_p: f64,
    /// Cavity loss rate (hartree).
    pub kappa: f64,
    /// g(R_i) = E_1ph mu_XB(R_i) (hartree).
    pub coupling: Vec<f64>,
    /// Absorber V_abs(R_i) on each channel; the Lindblad rate is 2 V_abs.
    pub cap: [Vec<f64>; 3],
    /// Identifies the nuclear grid in run metadata.
    pub grid_hash: String,
}

impl SystemOperators {
    pub fn assemble(model: &MoleculeModel, mode: &PlasmonMode, cap: CapParams) -> Result<Self> {
        if !(cap.strength >= 0.0 && cap.strength.is_finite() && cap.r_abs.is_finite()) {
            return Err(Error::Parameter("absorber strength must be non-negative".into()));
        }
        let mode = PlasmonMode::new(mode.omega_p, mode.kappa, mode.e_1ph)?;
        let n = model.n_basis();
        let nodes = model.grid.nodes().to_vec();
        let e = mode.e_1ph_au();
        let coupling = model.dipole.values.iter().map(|mu| e * mu).collect();
        let v_abs: Vec<f64> = nodes.iter().map(|&r| cap.eval(r)).collect();
        Ok(Self {
            space: StateSpace { n_basis: n },
            kinetic: model.kinetic()?,
            v_x: model.v_x.values.clone(),
            v_b: model.v_b.values.clone(),
            omega_p: mode.omega_au(),
            kappa: mode.kappa_au(),
            coupling,
            cap: [v_abs.clone(), v_abs.clone(), v_abs],
            nodes,
            weights: model.grid.weights().to_vec(),
            grid_hash: model.grid.fingerprint(),
        })
    }

    /// Single nuclear configuration with no kinetic energy: a driven
    /// two-level emitter (excitation energy `omega_m`) in a lossy cavity.
    /// All energies in hartree.
    pub fn clamped(r: f64, omega_m: f64, omega_p: f64, kappa: f64, g: f64) -> Result<Self> {
        if !(kappa >= 0.0 && omega_m.is_finite() && omega_p.is_finite() && g.is_finite()) {
            return Err(Error::Parameter("clamped system needs finite energies and kappa >= 0".into()));
        }
        Ok(Self {
            space: StateSpace { n_basis: 1 },
            nodes: vec![r],
            weights: vec![1.0],
            kinetic: CsrMatrix::from_triplets(1, Vec::new()),
            v_x: vec![0.0],
            v_b: vec![omega_m],
            omega_p,
            kappa,
            coupling: vec![g],
            cap: [vec![0.0], vec![0.0], vec![0.0]],
            grid_hash: format!("clamped@{r}"),
        })
    }

    pub fn n_basis(&self) -> usize {
        self.space.n_basis
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    /// Keep the absorber only on the channels flagged `true`.
    pub fn with_cap_channels(mut self, keep: [bool; 3]) -> Self {
        for (c, k) in keep.iter().enumerate() {
            if !k {
                self.cap[c].iter_mut().for_each(|v| *v = 0.0);
            }
        }
        self
    }

    /// Lindblad rates 2 V_abs(R_i) of one channel.
    pub fn cap_rates(&self, c: Channel) -> Vec<f64> {
        self.cap[c.index()].iter().map(|v| 2.0 * v).collect()
    }

    pub fn has_cap(&self) -> bool {
        self.cap.iter().flatten().any(|&v| v > 0.0)
    }

    fn diagonal(&self, c: Channel) -> Vec<f64> {
        match c {
            Channel::X0 => self.v_x.clone(),
            Channel::B0 => self.v_b.clone(),
            Channel::X1 => self.v_x.iter().map(|v| v + self.omega_p).collect(),
        }
    }

    /// Hermitian Hamiltonian on the full 3n space.
    pub fn h_dense(&self) -> Mat<c64> {
        self.full_dense(false)
    }

    /// Non-Hermitian H - i kappa/2 P_X1 - i V_abs on the full 3n space.
    pub fn h_eff_dense(&self) -> Mat<c64> {
        self.full_dense(true)
    }

    fn full_dense(&self, effective: bool) -> Mat<c64> {
        let n = self.n_basis();
        let mut h = Mat::<c64>::zeros(3 * n, 3 * n);
        for c in Channel::ALL {
            let o = c.index() * n;
            self.fill_channel(&mut h, o, c, effective);
        }
        let (b, x1) = (n, 2 * n);
        for i in 0..n {
            h[(b + i, x1 + i)] = c64::new(self.coupling[i], 0.0);
            h[(x1 + i, b + i)] = c64::new(self.coupling[i], 0.0);
        }
        h
    }

    fn fill_channel(&self, h: &mut Mat<c64>, o: usize, c: Channel, effective: bool) {
        let n = self.n_basis();
        for r in 0..n {
            for (col, v) in self.kinetic.row(r) {
                h[(o + r, o + col)] += c64::new(v, 0.0);
            }
        }
        let diag = self.diagonal(c);
        for i in 0..n {
            let mut im = 0.0;
            if effective {
                im -= self.cap[c.index()][i];
                if c == Channel::X1 {
                    im -= 0.5 * self.kappa;
                }
            }
            h[(o + i, o + i)] += c64::new(diag[i], im);
        }
    }

    /// Effective Hamiltonian of the one-excitation sector, basis `[B0, X1]`.
    pub fn h1_eff(&self) -> Mat<c64> {
        let n = self.n_basis();
        let mut h = Mat::<c64>::zeros(2 * n, 2 * n);
        self.fill_channel(&mut h, 0, Channel::B0, true);
        self.fill_channel(&mut h, n, Channel::X1, true);
        for i in 0..n {
            h[(i, n + i)] = c64::new(self.coupling[i], 0.0);
            h[(n + i, i)] = c64::new(self.coupling[i], 0.0);
        }
        h
    }

    /// Effective Hamiltonian of the ground sector (X0 only).
    pub fn h0_eff(&self) -> Mat<c64> {
        let n = self.n_basis();
        let mut h = Mat::<c64>::zeros(n, n);
        self.fill_channel(&mut h, 0, Channel::X0, true);
        h
    }

    pub fn polaritonic_curves(&self) -> PolaritonicCurves {
        polaritonic_curves(self)
    }
}

/// Born–Oppenheimer eigenvalues of the 2x2 one-excitation potential block
/// `[[V_B, g], [g, V_X + omega_p - i kappa/2]]` at every node (absorber
/// excluded).
#[derive(Debug, Clone)]
pub struct PolaritonicCurves {
    pub r: Vec<f64>,
    /// Branch that follows the B0 character continuously from the first node.
    pub plus: Vec<c64>,
    pub minus: Vec<c64>,
    /// |<X1|v_plus>|^2; the minus branch carries the complement.
    pub weight_plus: Vec<f64>,
    pub weight_minus: Vec<f64>,
}

fn eigen2(a: c64, d: c64, g: f64) -> [(c64, [c64; 2]); 2] {
    let (one, zero) = (c64::new(1.0, 0.0), c64::new(0.0, 0.0));
    if g == 0.0 {
        return [(a, [one, zero]), (d, [zero, one])];
    }
    let mean = (a + d) * 0.5;
    let half = (a - d) * 0.5;
    let root = (half * half + c64::new(g * g, 0.0)).sqrt();
    let gc = c64::new(g, 0.0);
    [mean + root, mean - root].map(|lam| {
        let u = [gc, lam - a];
        let w = [lam - d, gc];
        let nu = u[0].norm_sqr() + u[1].norm_sqr();
        let nw = w[0].norm_sqr() + w[1].norm_sqr();
        let (v, nn) = if nu >= nw { (u, nu) } else { (w, nw) };
        let s = nn.sqrt();
        (lam, [v[0] / s, v[1] / s])
    })
}

fn overlap(u: &[c64; 2], v: &[c64; 2]) -> f64 {
    (u[0].conj() * v[0] + u[1].conj() * v[1]).norm()
}

pub fn polaritonic_curves(ops: &SystemOperators) -> PolaritonicCurves {
    let n = ops.n_basis();
    let mut out = PolaritonicCurves {
        r: ops.nodes.clone(),
        plus: Vec::with_capacity(n),
        minus: Vec::with_capacity(n),
        weight_plus: Vec::with_capacity(n),
        weight_minus: Vec::with_capacity(n),
    };
    let mut prev: Option<[c64; 2]> = None;
    for i in 0..n {
        let a = c64::new(ops.v_b[i], 0.0);
        let d = c64::new(ops.v_x[i] + ops.omega_p, -0.5 * ops.kappa);
        let [p, q] = eigen2(a, d, ops.coupling[i]);
        let first_is_plus = match prev {
            None => p.1[0].norm_sqr() >= q.1[0].norm_sqr(),
            Some(v) => overlap(&v, &p.1) >= overlap(&v, &q.1),
        };
        let (plus, minus) = if first_is_plus { (p, q) } else { (q, p) };
        prev = Some(plus.1);
        out.plus.push(plus.0);
        out.minus.push(minus.0);
        out.weight_plus.push(plus.1[1].norm_sqr());
        out.weight_minus.push(minus.1[1].norm_sqr());
    }
    out
}

impl PolaritonicCurves {
    /// Induced decay rate kappa_B*(R) = -2 Im E_plus (hartree).
    pub fn induced_decay_rate(&self) -> Vec<f64> {
        self.plus.iter().map(|e| -2.0 * e.im).collect()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut body = String::from(
            "r_bohr,re_e_plus_ev,im_e_plus_ev,re_e_minus_ev,im_e_minus_ev,x1_weight_plus\n",
        );
        for i in 0..self.r.len() {
            body.push_str(&format!(
                "{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}\n",
                self.r[i],
                hartree_to_ev(self.plus[i].re),
                hartree_to_ev(self.plus[i].im),
                hartree_to_ev(self.minus[i].re),
                hartree_to_ev(self.minus[i].im),
                self.weight_plus[i]
            ));
        }
        write_text(path.as_ref(), &body)
    }

    pub fn write_decay_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut body = String::from("r_bohr,kappa_b_ev\n");
        for (r, k) in self.r.iter().zip(self.induced_decay_rate()) {
            body.push_str(&format!("{r:.10e},{:.10e}\n", hartree_to_ev(k)));
        }
        write_text(path.as_ref(), &body)
    }
}

/// kappa_B*(R) for every node (hartree).
pub fn induced_decay_rate(ops: &SystemOperators) -> Vec<f64> {
    polaritonic_curves(ops).induced_decay_rate()
}

pub(crate) fn write_text(path: &Path, body: &str) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))
}
