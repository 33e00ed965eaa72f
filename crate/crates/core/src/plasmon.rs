//! Quasistatic spectral density of a dipole next to a Drude nanosphere and
//! its single-Lorentzian pseudomode.
//!
//! Units: frequencies, linewidths and `J` in eV. The tabulated quantity is
//! `J(w)/mu^2` in eV/(e·bohr)^2, so a pseudomode with coupling `g = E mu`
//! contributes `E^2 (kappa/2pi) / ((w - w_p)^2 + kappa^2/4)` with `E` in
//! V/bohr.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{levenberg_marquardt, LmOptions};
use crate::units::{
    ev_to_hartree, hartree_to_ev, mv_per_bohr_to_au, mv_per_bohr_to_v_per_m, nm_to_bohr,
    ELEMENTARY_CHARGE, EPSILON_0, HBAR_EV_FS,
};

type C = faer::c64;

/// Defaults are the calibrated silver-like metal of the reference mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DrudeMetal {
    /// eV
    pub plasma_frequency: f64,
    /// eV
    pub damping_rate: f64,
}

impl Default for DrudeMetal {
    fn default() -> Self {
        Self {
            plasma_frequency: 15.1,
            damping_rate: 0.44,
        }
    }
}

impl DrudeMetal {
    pub fn new(plasma_frequency: f64, damping_rate: f64) -> Result<Self> {
        let m = Self {
            plasma_frequency,
            damping_rate,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.plasma_frequency > 0.0 && self.plasma_frequency.is_finite()) {
            return Err(Error::Parameter("plasma frequency must be positive".into()));
        }
        if !(self.damping_rate > 0.0 && self.damping_rate.is_finite()) {
            return Err(Error::Parameter("damping rate must be positive".into()));
        }
        Ok(())
    }

    /// eps(w) = 1 - wP^2 / (w (w + i gamma))
    pub fn permittivity(&self, omega: f64) -> C {
        let w = C::new(omega, 0.0);
        C::new(1.0, 0.0)
            - C::new(self.plasma_frequency * self.plasma_frequency, 0.0)
                / (w * C::new(omega, self.damping_rate))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DipoleOrientation {
    #[default]
    Radial,
    Tangential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SphereEmitterGeometry {
    /// nm
    pub radius: f64,
    pub background_index: f64,
    /// Gap between sphere surface and emitter (nm).
    pub emitter_distance: f64,
    pub dipole_orientation: DipoleOrientation,
    /// Highest multipole order the sum may reach before giving up.
    pub multipole_cutoff: usize,
}

impl Default for SphereEmitterGeometry {
    fn default() -> Self {
        Self {
            radius: 20.0,
            background_index: 1.75,
            emitter_distance: 0.7,
            dipole_orientation: DipoleOrientation::Radial,
            multipole_cutoff: 4000,
        }
    }
}

impl SphereEmitterGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::Parameter("sphere radius must be positive".into()));
        }
        if !(self.emitter_distance > 0.0 && self.emitter_distance.is_finite()) {
            return Err(Error::Parameter("emitter distance must be positive".into()));
        }
        if !(self.background_index > 0.0 && self.background_index.is_finite()) {
            return Err(Error::Parameter("background index must be positive".into()));
        }
        if self.multipole_cutoff < 1 {
            return Err(Error::Parameter("multipole cutoff must be at least 1".into()));
        }
        Ok(())
    }

    fn background_permittivity(&self) -> f64 {
        self.background_index * self.background_index
    }
}

/// Relative tail bound at which the multipole sum is accepted.
const MULTIPOLE_RTOL: f64 = 1e-4;

/// Contribution of multipole `l` to J/mu^2 (eV/(e·bohr)^2).
pub fn multipole_term(metal: &DrudeMetal, geom: &SphereEmitterGeometry, omega: f64, l: usize) -> f64 {
    let eps = metal.permittivity(omega);
    let eh = geom.background_permittivity();
    let lf = l as f64;
    let beta = lf * (eps - eh) / (eps * lf + eh * (lf + 1.0));
    let a = nm_to_bohr(geom.radius);
    let r0 = a + nm_to_bohr(geom.emitter_distance);
    let angular = match geom.dipole_orientation {
        DipoleOrientation::Radial => (lf + 1.0) * (lf + 1.0),
        DipoleOrientation::Tangential => 0.5 * lf * (lf + 1.0),
    };
    // a^(2l+1) / r0^(2l+4), formed as a ratio power to avoid overflow
    let geo = (a / r0).powi(2 * l as i32 + 1) / r0.powi(3);
    hartree_to_ev(angular * beta.im * geo / (std::f64::consts::PI * eh))
}

/// J/mu^2 at one frequency, summing multipoles until the geometric tail
/// estimate drops below `MULTIPOLE_RTOL` of the partial sum.
pub fn spectral_density_at(metal: &DrudeMetal, geom: &SphereEmitterGeometry, omega: f64) -> Result<f64> {
    let mut sum = 0.0;
    let mut prev = f64::NAN;
    for l in 1..=geom.multipole_cutoff {
        let term = multipole_term(metal, geom, omega, l);
        sum += term;
        if l >= 3 && term > 0.0 && prev > 0.0 {
            let q = term / prev;
            if q < 1.0 {
                let tail = term * q / (1.0 - q);
                if tail <= MULTIPOLE_RTOL * sum {
                    return Ok(sum);
                }
            }
        } else if term == 0.0 && l >= 3 {
            return Ok(sum);
        }
        prev = term;
    }
    Err(Error::Convergence(format!(
        "multipole sum not converged at l = {} (omega = {omega} eV); raise the cutoff",
        geom.multipole_cutoff
    )))
}

/// Tabulated J(w)/mu^2.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// eV
    pub omega: Vec<f64>,
    /// eV/(e·bohr)^2
    pub j_per_mu2: Vec<f64>,
}

impl Spectrum {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
        let mut body = String::from("omega_ev,j_per_mu2_ev_per_ebohr2\n");
        for (w, j) in self.omega.iter().zip(&self.j_per_mu2) {
            body.push_str(&format!("{w:.10e},{j:.10e}\n"));
        }
        f.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

pub fn spectral_density(metal: &DrudeMetal, geom: &SphereEmitterGeometry, omega: &[f64]) -> Result<Spectrum> {
    metal.validate()?;
    geom.validate()?;
    if omega.is_empty() {
        return Err(Error::Parameter("empty frequency list".into()));
    }
    if omega.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(Error::Parameter("frequencies must be positive".into()));
    }
    if omega.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parameter("frequencies must be strictly increasing".into()));
    }
    let j = omega
        .par_iter()
        .map(|&w| spectral_density_at(metal, geom, w))
        .collect::<Result<Vec<_>>>()?;
    Ok(Spectrum {
        omega: omega.to_vec(),
        j_per_mu2: j,
    })
}

/// Evenly spaced frequency axis, both ends included.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Quantized lossy pseudomode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlasmonMode {
    /// eV
    pub omega_p: f64,
    /// FWHM linewidth (eV)
    pub kappa: f64,
    /// Single-photon field amplitude (mV/bohr).
    pub e_1ph: f64,
    /// hbar/kappa (fs)
    pub tau: f64,
    /// hbar omega_p / (2 eps0 E^2) (nm^3); infinite for a vanishing field.
    pub mode_volume: f64,
}

impl PlasmonMode {
    pub fn new(omega_p: f64, kappa: f64, e_1ph: f64) -> Result<Self> {
        if !(omega_p > 0.0 && omega_p.is_finite()) {
            return Err(Error::Parameter(format!("omega_p must be positive, got {omega_p}")));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::Parameter(format!("kappa must be positive, got {kappa}")));
        }
        if !(e_1ph >= 0.0 && e_1ph.is_finite()) {
            return Err(Error::Parameter(format!("E_1ph must be non-negative, got {e_1ph}")));
        }
        let field = mv_per_bohr_to_v_per_m(e_1ph);
        let mode_volume = if field > 0.0 {
            omega_p * ELEMENTARY_CHARGE / (2.0 * EPSILON_0 * field * field) * 1e27
        } else {
            f64::INFINITY
        };
        Ok(Self {
            omega_p,
            kappa,
            e_1ph,
            tau: HBAR_EV_FS / kappa,
            mode_volume,
        })
    }

    pub fn omega_au(&self) -> f64 {
        ev_to_hartree(self.omega_p)
    }

    pub fn kappa_au(&self) -> f64 {
        ev_to_hartree(self.kappa)
    }

    pub fn e_1ph_au(&self) -> f64 {
        mv_per_bohr_to_au(self.e_1ph)
    }
}

pub fn mode_from_values(omega_p: f64, kappa: f64, e_1ph: f64) -> Result<PlasmonMode> {
    PlasmonMode::new(omega_p, kappa, e_1ph)
}

/// Normalised RMS residual above which a single Lorentzian is rejected.
pub const FIT_RESIDUAL_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct PseudomodeFit {
    pub mode: PlasmonMode,
    /// Lorentzian area A = E^2 in eV^2/(e·bohr)^2.
    pub area: f64,
    /// RMS residual over the fit window divided by the peak height.
    pub residual: f64,
    pub window: (f64, f64),
}

/// Fit one Lorentzian to `j` (J(w) in eV for a probe dipole `mu_probe`
/// e·bohr) within three linewidths of the global maximum.
pub fn fit_pseudomode(omega: &[f64], j: &[f64], mu_probe: f64) -> Result<PseudomodeFit> {
    if omega.len() != j.len() {
        return Err(Error::Parameter("frequency and spectrum lengths differ".into()));
    }
    if !(mu_probe > 0.0 && mu_probe.is_finite()) {
        return Err(Error::Parameter("probe dipole must be positive".into()));
    }
    let mu2 = mu_probe * mu_probe;
    let y: Vec<f64> = j.iter().map(|v| v / mu2).collect();
    let (imax, &peak) = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::Parameter("empty spectrum".into()))?;
    if !(peak > 0.0) {
        return Err(Error::FitQuality("spectrum has no positive peak".into()));
    }
    let half = 0.5 * peak;
    let left = (0..imax).rev().find(|&i| y[i] < half);
    let right = (imax + 1..y.len()).find(|&i| y[i] < half);
    let cross = |i: usize, k: usize| omega[i] + (half - y[i]) * (omega[k] - omega[i]) / (y[k] - y[i]);
    let fwhm = match (left, right) {
        (Some(l), Some(r)) => cross(r - 1, r) - cross(l, l + 1),
        (Some(l), None) => 2.0 * (omega[imax] - cross(l, l + 1)),
        (None, Some(r)) => 2.0 * (cross(r - 1, r) - omega[imax]),
        (None, None) => {
            return Err(Error::FitQuality(
                "spectrum has no resolvable peak (flat over the whole range)".into(),
            ))
        }
    };
    if !(fwhm > 0.0) {
        return Err(Error::FitQuality("could not estimate the peak width".into()));
    }
    let w0 = omega[imax];
    let window = (w0 - 3.0 * fwhm, w0 + 3.0 * fwhm);
    let idx: Vec<usize> = (0..omega.len())
        .filter(|&i| omega[i] >= window.0 && omega[i] <= window.1)
        .collect();
    if idx.len() < 5 {
        return Err(Error::FitQuality(format!(
            "only {} samples inside the fit window",
            idx.len()
        )));
    }
    let xs: Vec<f64> = idx.iter().map(|&i| omega[i]).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| y[i] / peak).collect();
    // parameters: (area / peak, centre, width)
    let p0 = [std::f64::consts::PI * fwhm / 2.0, w0, fwhm];
    let fit = levenberg_marquardt(
        |p, r, jac| {
            let (a, c, k) = (p[0], p[1], p[2]);
            for (i, (&x, &yv)) in xs.iter().zip(&ys).enumerate() {
                let d = x - c;
                let den = d * d + 0.25 * k * k;
                let shape = k / (2.0 * std::f64::consts::PI) / den;
                r[i] = a * shape - yv;
                jac[i * 3] = shape;
                jac[i * 3 + 1] = a * shape * 2.0 * d / den;
                jac[i * 3 + 2] = a * (shape / k - shape * 0.5 * k / den);
            }
        },
        &p0,
        xs.len(),
        LmOptions::default(),
    )?;
    let (a, c, k) = (fit.params[0] * peak, fit.params[1], fit.params[2].abs());
    let residual = (fit.cost / xs.len() as f64).sqrt();
    if !(residual <= FIT_RESIDUAL_THRESHOLD) {
        return Err(Error::FitQuality(format!(
            "single-Lorentzian residual {residual:.3} exceeds {FIT_RESIDUAL_THRESHOLD}"
        )));
    }
    if !(a > 0.0) {
        return Err(Error::FitQuality("fitted peak area is not positive".into()));
    }
    let mode = PlasmonMode::new(c, k, 1000.0 * a.sqrt())?;
    Ok(PseudomodeFit {
        mode,
        area: a,
        residual,
        window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metal() -> DrudeMetal {
        DrudeMetal::new(15.1, 0.43).unwrap()
    }

    fn geom(d: f64) -> SphereEmitterGeometry {
        SphereEmitterGeometry {
            radius: 20.0,
            background_index: 1.75,
            emitter_distance: d,
            dipole_orientation: DipoleOrientation::Radial,
            multipole_cutoff: 4000,
        }
    }

    fn lorentz(w: f64, a: f64, c: f64, k: f64) -> f64 {
        a * k / (2.0 * std::f64::consts::PI) / ((w - c).powi(2) + 0.25 * k * k)
    }

    #[test]
    fn recovers_exact_lorentzian() {
        let w = linspace(5.0, 10.0, 2001);
        let j: Vec<f64> = w.iter().map(|&x| lorentz(x, 0.0049, 7.6, 0.476)).collect();
        let fit = fit_pseudomode(&w, &j, 1.0).unwrap();
        assert!((fit.mode.omega_p / 7.6 - 1.0).abs() < 1e-6);
        assert!((fit.mode.kappa / 0.476 - 1.0).abs() < 1e-6);
        assert!((fit.mode.e_1ph / 70.0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn probe_dipole_scale_invariance() {
        let w = linspace(3.0, 12.0, 901);
        let s = spectral_density(&metal(), &geom(0.7), &w).unwrap();
        let a = fit_pseudomode(&w, &s.j_per_mu2, 1.0).unwrap();
        let j4: Vec<f64> = s.j_per_mu2.iter().map(|v| 4.0 * v).collect();
        let b = fit_pseudomode(&w, &j4, 2.0).unwrap();
        assert!((a.mode.omega_p - b.mode.omega_p).abs() < 1e-12);
        assert!((a.mode.kappa - b.mode.kappa).abs() < 1e-12);
        assert!((a.mode.e_1ph - b.mode.e_1ph).abs() < 1e-9);
    }

    #[test]
    fn double_peak_is_rejected() {
        let w = linspace(4.0, 11.0, 1401);
        let j: Vec<f64> = w
            .iter()
            .map(|&x| lorentz(x, 1.0, 7.0, 0.4) + lorentz(x, 1.0, 7.9, 0.4))
            .collect();
        assert!(matches!(fit_pseudomode(&w, &j, 1.0), Err(Error::FitQuality(_))));
        let flat = vec![1.0; w.len()];
        assert!(matches!(fit_pseudomode(&w, &flat, 1.0), Err(Error::FitQuality(_))));
    }

    #[test]
    fn derived_mode_quantities() {
        let m = mode_from_values(7.6, 0.476, 70.0).unwrap();
        assert!((m.tau - 1.383).abs() < 1e-3);
        let v = mode_from_values(7.6, 0.476, 100.0).unwrap().mode_volume;
        assert!(v > 10.0 && v < 40.0, "{v}");
        assert!(mode_from_values(0.0, 0.4, 1.0).is_err());
        assert!(mode_from_values(7.0, -0.4, 1.0).is_err());
        assert!(mode_from_values(7.0, 0.4, -1.0).is_err());
    }

    #[test]
    fn spectrum_is_non_negative() {
        let w = linspace(0.5, 20.0, 400);
        for d in [0.5, 2.0, 20.0] {
            let s = spectral_density(&metal(), &geom(d), &w).unwrap();
            assert!(s.j_per_mu2.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn calibrated_geometry_gives_target_mode() {
        let w = linspace(3.0, 12.0, 1801);
        let m = DrudeMetal::new(15.1, 0.44).unwrap();
        let s = spectral_density(&m, &geom(0.7), &w).unwrap();
        let f = fit_pseudomode(&w, &s.j_per_mu2, 1.0).unwrap().mode;
        assert!((f.omega_p / 7.6 - 1.0).abs() < 0.15, "{f:?}");
        assert!((f.kappa / 0.476 - 1.0).abs() < 0.15, "{f:?}");
        assert!((f.e_1ph / 70.0 - 1.0).abs() < 0.15, "{f:?}");
    }

    #[test]
    fn far_field_is_the_dipole_term() {
        // at d >> a the l = 1 term alone peaks where Re eps = -2 eps_h
        let m = DrudeMetal::new(15.1, 0.05).unwrap();
        let mut g = geom(400.0);
        g.radius = 5.0;
        let w = linspace(5.0, 9.0, 4001);
        let s = spectral_density(&m, &g, &w).unwrap();
        let top = s.j_per_mu2.iter().cloned().fold(0.0, f64::max);
        for (&x, &j) in w.iter().zip(&s.j_per_mu2) {
            if j > 0.01 * top {
                let one = multipole_term(&m, &g, x, 1);
                assert!((j - one).abs() <= 1e-3 * j, "omega {x}: {j} vs {one}");
            }
        }
        let eh = 1.75f64 * 1.75;
        let frohlich = 15.1 / (1.0 + 2.0 * eh).sqrt();
        let imax = (0..w.len()).max_by(|&a, &b| s.j_per_mu2[a].total_cmp(&s.j_per_mu2[b])).unwrap();
        assert!((w[imax] - frohlich).abs() < 0.01, "{} vs {frohlich}", w[imax]);
    }

    #[test]
    fn lossless_multipoles_sit_at_frohlich_frequencies() {
        let m = DrudeMetal::new(15.1, 1e-4).unwrap();
        let g = geom(1.0);
        let eh = 1.75f64 * 1.75;
        for l in [1usize, 2, 5] {
            let lf = l as f64;
            let exact = 15.1 / (1.0 + eh * (lf + 1.0) / lf).sqrt();
            let w = linspace(exact - 0.05, exact + 0.05, 20001);
            let imax = (0..w.len())
                .max_by(|&a, &b| multipole_term(&m, &g, w[a], l).total_cmp(&multipole_term(&m, &g, w[b], l)))
                .unwrap();
            assert!((w[imax] - exact).abs() < 1e-4, "l = {l}: {} vs {exact}", w[imax]);
        }
    }

    #[test]
    fn linewidth_approaches_drude_damping_up_close() {
        let w = linspace(5.0, 10.0, 2001);
        let m = DrudeMetal::new(15.1, 0.44).unwrap();
        let s = spectral_density(&m, &geom(0.4), &w).unwrap();
        let f = fit_pseudomode(&w, &s.j_per_mu2, 1.0).unwrap();
        assert!((f.mode.kappa / 0.44 - 1.0).abs() < 0.10, "{}", f.mode.kappa);
    }

    #[test]
    fn field_grows_as_emitter_approaches() {
        let w = linspace(5.0, 10.0, 1001);
        let m = DrudeMetal::new(15.1, 0.44).unwrap();
        let ds = [0.5, 0.7, 1.0, 1.4];
        let pts: Vec<(f64, f64)> = ds
            .iter()
            .map(|&d| {
                let s = spectral_density(&m, &geom(d), &w).unwrap();
                let e = fit_pseudomode(&w, &s.j_per_mu2, 1.0).unwrap().mode.e_1ph;
                (d.ln(), e.ln())
            })
            .collect();
        let n = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
        let (mx, my) = (sx / n, sy / n);
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!(slope < 0.0, "{slope}");
        assert!(pts.windows(2).all(|p| p[1].1 < p[0].1));
    }

    #[test]
    fn radial_sum_converges_monotonically() {
        let m = DrudeMetal::new(15.1, 0.44).unwrap();
        let g = geom(0.7);
        let mut partial = 0.0;
        for l in 1..200 {
            let t = multipole_term(&m, &g, 7.4, l);
            assert!(t >= 0.0);
            partial += t;
        }
        assert!(partial > 0.0);
    }

    #[test]
    fn tiny_cutoff_fails_to_converge() {
        let mut g = geom(0.5);
        g.multipole_cutoff = 5;
        assert!(matches!(
            spectral_density(&metal(), &g, &[7.5]),
            Err(Error::Convergence(_))
        ));
    }
}

