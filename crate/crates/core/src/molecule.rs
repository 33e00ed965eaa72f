//! Two-surface diatomic: ground (X) and excited (B) potential curves, the
//! X–B transition dipole and the nuclear reduced mass.

use std::path::Path;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fedvr::{CsrMatrix, CurveTable, Extrapolation, FedvrGrid, NaturalCubicSpline, Quantity};
use crate::linalg::symmetric_eigen;
use crate::units::{ev_to_hartree, H2_REDUCED_MASS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Surface {
    X,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveOrigin {
    Tabulated,
    Surrogate,
}

/// Closed-form curves, all parameters in atomic units.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticCurve {
    /// `offset + depth (1 - exp(-alpha (R - r0)))^2 + wall exp(-wall_decay R)`
    Morse {
        offset: f64,
        depth: f64,
        alpha: f64,
        r0: f64,
        wall: f64,
        wall_decay: f64,
    },
    /// `offset + k/2 (R - r0)^2`
    Harmonic { offset: f64, k: f64, r0: f64 },
    /// `peak exp(-((R - center)/width)^2)`
    Gaussian { peak: f64, center: f64, width: f64 },
    Constant(f64),
}

impl AnalyticCurve {
    pub fn morse(offset: f64, depth: f64, alpha: f64, r0: f64) -> Self {
        AnalyticCurve::Morse {
            offset,
            depth,
            alpha,
            r0,
            wall: 0.0,
            wall_decay: 0.0,
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            AnalyticCurve::Morse {
                offset,
                depth,
                alpha,
                r0,
                wall,
                wall_decay,
            } => {
                let u = 1.0 - (-alpha * (r - r0)).exp();
                offset + depth * u * u + wall * (-wall_decay * r).exp()
            }
            AnalyticCurve::Harmonic { offset, k, r0 } => offset + 0.5 * k * (r - r0).powi(2),
            AnalyticCurve::Gaussian {
                peak,
                center,
                width,
            } => peak * (-((r - center) / width).powi(2)).exp(),
            AnalyticCurve::Constant(c) => c,
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        match *self {
            AnalyticCurve::Morse {
                depth,
                alpha,
                r0,
                wall,
                wall_decay,
                ..
            } => {
                let e = (-alpha * (r - r0)).exp();
                2.0 * depth * alpha * (1.0 - e) * e - wall * wall_decay * (-wall_decay * r).exp()
            }
            AnalyticCurve::Harmonic { k, r0, .. } => k * (r - r0),
            AnalyticCurve::Gaussian {
                peak,
                center,
                width,
            } => {
                let z = (r - center) / width;
                -2.0 * z / width * peak * (-z * z).exp()
            }
            AnalyticCurve::Constant(_) => 0.0,
        }
    }
}

/// Continuous representation of a curve, used for off-node queries.
#[derive(Debug, Clone)]
pub enum Curve {
    Spline(NaturalCubicSpline, Extrapolation),
    Analytic(AnalyticCurve),
    /// `a(R) - b(R)`, e.g. V_B - V_X.
    Shifted(Box<Curve>, f64),
}

impl Curve {
    pub fn eval(&self, r: f64) -> Result<f64> {
        match self {
            Curve::Spline(s, rule) => s.eval_with(r, *rule),
            Curve::Analytic(a) => Ok(a.eval(r)),
            Curve::Shifted(c, shift) => Ok(c.eval(r)? + shift),
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        match self {
            Curve::Spline(s, _) => s.derivative(r),
            Curve::Analytic(a) => a.derivative(r),
            Curve::Shifted(c, _) => c.derivative(r),
        }
    }

    fn origin(&self) -> CurveOrigin {
        match self {
            Curve::Spline(..) => CurveOrigin::Tabulated,
            Curve::Analytic(_) => CurveOrigin::Surrogate,
            Curve::Shifted(c, _) => c.origin(),
        }
    }

    fn sample(&self, grid: &FedvrGrid) -> Result<Vec<f64>> {
        match self {
            Curve::Spline(s, rule) => grid.interpolate_spline(s, *rule),
            _ => {
                let vals = grid
                    .nodes()
                    .iter()
                    .map(|&r| self.eval(r))
                    .collect::<Result<Vec<_>>>()?;
                if let Some((i, v)) = vals.iter().enumerate().find(|(_, v)| !v.is_finite()) {
                    return Err(Error::Evaluation(format!(
                        "curve is {v} at R = {}",
                        grid.nodes()[i]
                    )));
                }
                Ok(vals)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct PotentialCurve {
    pub label: Surface,
    /// Values at the grid nodes (hartree).
    pub values: Vec<f64>,
    pub source: CurveOrigin,
    pub curve: Curve,
}

#[derive(Debug, Clone)]
pub struct TransitionDipole {
    /// |mu_XB(R)| at the grid nodes (e·bohr).
    pub values: Vec<f64>,
    pub curve: Curve,
}

/// Parameters of the analytic stand-in molecule, in eV and bohr.
///
/// Defaults give an H2-like topology: Franck–Condon excitation near
/// 12.75 eV, excited-state asymptote above it, and the closest approach
/// of the two curves (7.6 eV) near R = 4 bohr.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateParams {
    pub x_depth_ev: f64,
    pub x_alpha: f64,
    pub x_r0: f64,
    pub b_min_ev: f64,
    pub b_depth_ev: f64,
    pub b_alpha: f64,
    pub b_r0: f64,
    pub b_wall_ev: f64,
    pub b_wall_decay: f64,
    pub dipole: DipoleModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DipoleModel {
    /// `peak exp(-((R - center)/width)^2)` in e·bohr.
    Gaussian { peak: f64, center: f64, width: f64 },
    Constant { value: f64 },
}

impl Default for SurrogateParams {
    fn default() -> Self {
        Self {
            x_depth_ev: 4.747,
            x_alpha: 1.0287,
            x_r0: 1.401,
            b_min_ev: 11.167,
            b_depth_ev: 3.779,
            b_alpha: 0.3524,
            b_r0: 2.641,
            b_wall_ev: 30.0,
            b_wall_decay: 3.0,
            dipole: DipoleModel::Gaussian {
                peak: 1.61,
                center: 3.1,
                width: 2.2,
            },
        }
    }
}

impl SurrogateParams {
    pub fn x_curve(&self) -> AnalyticCurve {
        AnalyticCurve::morse(0.0, ev_to_hartree(self.x_depth_ev), self.x_alpha, self.x_r0)
    }

    pub fn b_curve(&self) -> AnalyticCurve {
        AnalyticCurve::Morse {
            offset: ev_to_hartree(self.b_min_ev),
            depth: ev_to_hartree(self.b_depth_ev),
            alpha: self.b_alpha,
            r0: self.b_r0,
            wall: ev_to_hartree(self.b_wall_ev),
            wall_decay: self.b_wall_decay,
        }
    }

    pub fn dipole_curve(&self) -> AnalyticCurve {
        match self.dipole {
            DipoleModel::Gaussian {
                peak,
                center,
                width,
            } => AnalyticCurve::Gaussian {
                peak,
                center,
                width,
            },
            DipoleModel::Constant { value } => AnalyticCurve::Constant(value),
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            ("x_depth_ev", self.x_depth_ev),
            ("x_alpha", self.x_alpha),
            ("b_depth_ev", self.b_depth_ev),
            ("b_alpha", self.b_alpha),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parameter(format!("surrogate {name} must be positive")));
            }
        }
        if self.b_wall_ev < 0.0 || self.b_wall_decay < 0.0 {
            return Err(Error::Parameter("surrogate wall terms must be non-negative".into()));
        }
        if let DipoleModel::Gaussian { width, .. } = self.dipole {
            if !(width > 0.0) {
                return Err(Error::Parameter("dipole width must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Molecular excitation energy on the grid.
#[derive(Debug, Clone)]
pub struct ExcitationProfile {
    /// V_B - V_X at the nodes (hartree).
    pub values: Vec<f64>,
    pub min: f64,
    /// Node position of the minimum (bohr).
    pub argmin: f64,
}

#[derive(Debug, Clone)]
pub struct MoleculeModel {
    pub grid: FedvrGrid,
    pub v_x: PotentialCurve,
    pub v_b: PotentialCurve,
    pub dipole: TransitionDipole,
    /// Nuclear reduced mass (electron masses).
    pub reduced_mass: f64,
}

impl MoleculeModel {
    /// Sample continuous curves on `grid` and check the invariants.
    pub fn from_curves(
        grid: FedvrGrid,
        v_x: Curve,
        v_b: Curve,
        dipole: Curve,
        reduced_mass: f64,
    ) -> Result<Self> {
        if !(reduced_mass > 0.0 && reduced_mass.is_finite()) {
            return Err(Error::Parameter(format!(
                "reduced mass must be positive, got {reduced_mass}"
            )));
        }
        let vx = v_x.sample(&grid)?;
        let vb = v_b.sample(&grid)?;
        let mu: Vec<f64> = dipole.sample(&grid)?.into_iter().map(f64::abs).collect();
        if let Some(i) = vx.iter().zip(&vb).position(|(x, b)| b - x <= 0.0) {
            return Err(Error::DataConsistency(format!(
                "excitation energy V_B - V_X is not positive at R = {}",
                grid.nodes()[i]
            )));
        }
        Ok(Self {
            v_x: PotentialCurve {
                label: Surface::X,
                values: vx,
                source: v_x.origin(),
                curve: v_x,
            },
            v_b: PotentialCurve {
                label: Surface::B,
                values: vb,
                source: v_b.origin(),
                curve: v_b,
            },
            dipole: TransitionDipole {
                values: mu,
                curve: dipole,
            },
            grid,
            reduced_mass,
        })
    }

    /// Load tabulated curves (see [`CurveTable`] for the file format).
    pub fn load(
        vx_file: impl AsRef<Path>,
        vb_file: impl AsRef<Path>,
        dipole_file: impl AsRef<Path>,
        grid: FedvrGrid,
        reduced_mass: f64,
        extrapolation: Extrapolation,
    ) -> Result<Self> {
        let spline = |path: &Path, q| -> Result<Curve> {
            let t = CurveTable::load(path, q)?;
            let s = NaturalCubicSpline::new(&t.r, &t.values)?;
            let (lo, hi) = s.domain();
            if extrapolation == Extrapolation::Forbid {
                let tol = 1e-9;
                if lo > grid.nodes()[0] + tol || hi < grid.nodes()[grid.n_basis() - 1] - tol {
                    return Err(Error::Coverage(format!(
                        "{} spans [{lo}, {hi}] bohr, grid needs [{}, {}]",
                        path.display(),
                        grid.nodes()[0],
                        grid.nodes()[grid.n_basis() - 1]
                    )));
                }
            }
            Ok(Curve::Spline(s, extrapolation))
        };
        let vx = spline(vx_file.as_ref(), Quantity::Energy)?;
        let vb = spline(vb_file.as_ref(), Quantity::Energy)?;
        let mu = spline(dipole_file.as_ref(), Quantity::Dipole)?;
        Self::from_curves(grid, vx, vb, mu, reduced_mass)
    }

    /// Analytic stand-in molecule on `grid`.
    pub fn surrogate(params: &SurrogateParams, grid: FedvrGrid) -> Result<Self> {
        Self::surrogate_with_mass(params, grid, H2_REDUCED_MASS)
    }

    pub fn surrogate_with_mass(
        params: &SurrogateParams,
        grid: FedvrGrid,
        reduced_mass: f64,
    ) -> Result<Self> {
        params.validate()?;
        Self::from_curves(
            grid,
            Curve::Analytic(params.x_curve()),
            Curve::Analytic(params.b_curve()),
            Curve::Analytic(params.dipole_curve()),
            reduced_mass,
        )
        .map_err(|e| match e {
            Error::DataConsistency(msg) => Error::Parameter(msg),
            other => other,
        })
    }

    pub fn n_basis(&self) -> usize {
        self.grid.n_basis()
    }

    pub fn kinetic(&self) -> Result<CsrMatrix> {
        self.grid.kinetic_operator(self.reduced_mass)
    }

    pub fn surface(&self, s: Surface) -> &PotentialCurve {
        match s {
            Surface::X => &self.v_x,
            Surface::B => &self.v_b,
        }
    }

    /// omega_m(R) = V_B(R) - V_X(R) with its minimum over the grid.
    pub fn excitation_energy(&self) -> ExcitationProfile {
        let values: Vec<f64> = self
            .v_b
            .values
            .iter()
            .zip(&self.v_x.values)
            .map(|(b, x)| b - x)
            .collect();
        let (i, &min) = values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("grid is never empty");
        ExcitationProfile {
            min,
            argmin: self.grid.nodes()[i],
            values,
        }
    }

    /// Lowest `count` eigenpairs of T + V on the chosen surface. Vectors
    /// are in the weight-normalised basis with unit norm.
    pub fn vibrational_states(&self, surface: Surface, count: usize) -> Result<Vec<(f64, Vec<f64>)>> {
        let n = self.n_basis();
        let mut h = self.kinetic()?.to_dense();
        for (i, v) in self.surface(surface).values.iter().enumerate() {
            h[(i, i)] += v;
        }
        let (vals, vecs) = symmetric_eigen(&h)?;
        Ok((0..count.min(n))
            .map(|k| {
                let mut v: Vec<f64> = (0..n).map(|i| vecs[(i, k)]).collect();
                let peak = v
                    .iter()
                    .copied()
                    .max_by(|a, b| a.abs().total_cmp(&b.abs()))
                    .unwrap_or(1.0);
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                let s = peak.signum() / norm;
                v.iter_mut().for_each(|x| *x *= s);
                (vals[k], v)
            })
            .collect())
    }

    /// Vibrational ground state of a surface: (energy in hartree, unit-norm
    /// coefficients with a positive maximum).
    pub fn vibrational_ground_state(&self, surface: Surface) -> Result<(f64, Vec<f64>)> {
        let mut states = self.vibrational_states(surface, 1)?;
        let (e, v) = states.pop().ok_or_else(|| Error::Physics("empty grid".into()))?;
        let asymptote = *self.surface(surface).values.last().unwrap();
        if e >= asymptote {
            return Err(Error::Physics(format!(
                "{surface:?} surface has no bound state: lowest level {e:.6} Eh is not below \
                 the asymptote {asymptote:.6} Eh"
            )));
        }
        Ok((e, v))
    }

    /// Minimum position of the continuous ground-state curve.
    pub fn franck_condon_point(&self) -> Result<f64> {
        let nodes = self.grid.nodes();
        let vals = &self.v_x.values;
        let (i, _) = vals
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        if i == 0 || i == vals.len() - 1 {
            return Err(Error::Physics(format!(
                "ground-state minimum lies on the grid edge (R = {})",
                nodes[i]
            )));
        }
        let curve = &self.v_x.curve;
        let (mut lo, mut hi) = (nodes[i - 1], nodes[i + 1]);
        let (mut dlo, dhi) = (curve.derivative(lo), curve.derivative(hi));
        if !(dlo < 0.0 && dhi > 0.0) {
            return Err(Error::Physics(
                "could not bracket the ground-state minimum".into(),
            ));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let d = curve.derivative(mid);
            if d == 0.0 {
                return Ok(mid);
            }
            if (d < 0.0) == (dlo < 0.0) {
                lo = mid;
                dlo = d;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Same curves with the ground-state curve shifted by `shift` hartree
    /// and the excited state by the same amount.
    pub fn with_energy_shift(&self, shift: f64) -> Result<Self> {
        Self::from_curves(
            self.grid.clone(),
            Curve::Shifted(Box::new(self.v_x.curve.clone()), shift),
            Curve::Shifted(Box::new(self.v_b.curve.clone()), shift),
            self.dipole.curve.clone(),
            self.reduced_mass,
        )
    }
}

/// Dense ground-state Hamiltonian T + V_X, mostly for diagnostics.
pub fn surface_hamiltonian(model: &MoleculeModel, surface: Surface) -> Result<Mat<f64>> {
    let mut h = model.kinetic()?.to_dense();
    for (i, v) in model.surface(surface).values.iter().enumerate() {
        h[(i, i)] += v;
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{hartree_to_ev, HARTREE_EV};

    fn grid() -> FedvrGrid {
        FedvrGrid::new(0.5, 17.0, 46, 9).unwrap()
    }

    #[test]
    fn surrogate_has_photostable_topology() {
        let m = MoleculeModel::surrogate(&SurrogateParams::default(), grid()).unwrap();
        let rfc = m.franck_condon_point().unwrap();
        assert!((rfc - 1.401).abs() < 1e-10);
        let vertical = m.v_b.curve.eval(rfc).unwrap();
        let b_inf = m.v_b.curve.eval(1e3).unwrap();
        assert!(vertical < b_inf, "vertical {vertical} vs asymptote {b_inf}");
        assert!((hartree_to_ev(vertical) - 12.75).abs() < 0.01);
        let ex = m.excitation_energy();
        assert!((hartree_to_ev(ex.min) - 7.6).abs() < 0.01);
        assert!((ex.argmin - 4.0).abs() < 0.1);
    }

    #[test]
    fn constant_offset_gives_constant_excitation() {
        let p = SurrogateParams::default();
        let x = Curve::Analytic(p.x_curve());
        let b = Curve::Shifted(Box::new(x.clone()), 0.3);
        let m = MoleculeModel::from_curves(
            grid(),
            x,
            b,
            Curve::Analytic(AnalyticCurve::Constant(1.0)),
            918.0,
        )
        .unwrap();
        let ex = m.excitation_energy();
        assert!(ex.values.iter().all(|w| (w - 0.3).abs() < 1e-14));
        assert!(m.dipole.values.iter().all(|&d| d == 1.0));
    }

    #[test]
    fn identical_curves_are_rejected() {
        let p = SurrogateParams::default();
        let x = Curve::Analytic(p.x_curve());
        let err = MoleculeModel::from_curves(grid(), x.clone(), x, Curve::Analytic(AnalyticCurve::Constant(1.0)), 918.0)
            .unwrap_err();
        assert!(matches!(err, Error::DataConsistency(_)));
    }

    #[test]
    fn franck_condon_point_translates_and_ignores_offsets() {
        let mut p = SurrogateParams::default();
        let m0 = MoleculeModel::surrogate(&p, grid()).unwrap();
        p.x_r0 -= 0.2;
        let m1 = MoleculeModel::surrogate(&p, grid()).unwrap();
        let (a, b) = (m0.franck_condon_point().unwrap(), m1.franck_condon_point().unwrap());
        assert!((a - b - 0.2).abs() < 1e-10);
        let shifted = m0.with_energy_shift(0.25).unwrap();
        assert!((shifted.franck_condon_point().unwrap() - a).abs() < 1e-12);
    }

    #[test]
    fn morse_levels_match_closed_form() {
        let p = SurrogateParams::default();
        let m = MoleculeModel::surrogate(&p, grid()).unwrap();
        let d = p.x_depth_ev / HARTREE_EV;
        let w = p.x_alpha * (2.0 * d / m.reduced_mass).sqrt();
        let states = m.vibrational_states(Surface::X, 5).unwrap();
        for (n, (e, _)) in states.iter().enumerate() {
            let x = w * (n as f64 + 0.5);
            let exact = x - x * x / (4.0 * d);
            assert!(((e - exact) / exact).abs() < 1e-6, "level {n}: {e} vs {exact}");
        }
    }

    #[test]
    fn ground_state_is_normalised_and_positive() {
        let m = MoleculeModel::surrogate(&SurrogateParams::default(), grid()).unwrap();
        let (e, v) = m.vibrational_ground_state(Surface::X).unwrap();
        let norm: f64 = v.iter().map(|x| x * x).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        let peak = v.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap();
        assert!(peak > 0.0);
        // zero-point energy of an H2-like Morse well is ~0.27 eV
        assert!((hartree_to_ev(e) - 0.27).abs() < 0.01);
    }

    #[test]
    fn unbound_surface_is_a_physics_error() {
        let g = FedvrGrid::new(0.5, 17.0, 20, 6).unwrap();
        let flat = Curve::Analytic(AnalyticCurve::Gaussian { peak: 0.01, center: 8.0, width: 3.0 });
        let m = MoleculeModel::from_curves(
            g,
            flat.clone(),
            Curve::Shifted(Box::new(flat), 0.5),
            Curve::Analytic(AnalyticCurve::Constant(1.0)),
            918.0,
        )
        .unwrap();
        assert!(matches!(m.vibrational_ground_state(Surface::X), Err(Error::Physics(_))));
    }

    #[test]
    fn surrogate_rejects_crossing_curves() {
        let p = SurrogateParams {
            b_min_ev: 1.0,
            b_r0: 1.4,
            b_wall_ev: 0.0,
            ..SurrogateParams::default()
        };
        assert!(matches!(MoleculeModel::surrogate(&p, grid()), Err(Error::Parameter(_))));
    }
}
