use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fedvr::{Boundary, Extrapolation, FedvrGrid};
use crate::lindblad::{IntegratorConfig, Method};
use crate::molecule::{MoleculeModel, SurrogateParams};
use crate::plasmon::{
    fit_pseudomode, linspace, spectral_density, DrudeMetal, PlasmonMode, PseudomodeFit,
    SphereEmitterGeometry,
};
use crate::system::CapParams;
use crate::units::H2_REDUCED_MASS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub molecule: MoleculeConfig,
    pub grid: GridConfig,
    pub mode: ModeConfig,
    pub cap: CapParams,
    pub run: RunConfig,
    pub scan: ScanConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MoleculeSource {
    #[default]
    Surrogate,
    Files,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MoleculeConfig {
    pub source: MoleculeSource,
    /// electron masses
    pub reduced_mass: f64,
    pub x_file: Option<PathBuf>,
    pub b_file: Option<PathBuf>,
    pub dipole_file: Option<PathBuf>,
    pub extrapolation: Extrapolation,
    pub surrogate: SurrogateParams,
}

impl Default for MoleculeConfig {
    fn default() -> Self {
        Self {
            source: MoleculeSource::Surrogate,
            reduced_mass: H2_REDUCED_MASS,
            x_file: None,
            b_file: None,
            dipole_file: None,
            extrapolation: Extrapolation::Forbid,
            surrogate: SurrogateParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub r_min: f64,
    pub r_max: f64,
    pub n_elements: usize,
    pub order: usize,
    pub boundary: Boundary,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            r_min: 0.5,
            r_max: 17.0,
            n_elements: 46,
            order: 9,
            boundary: Boundary::Free,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ModeSource {
    /// Use `omega_p`, `kappa` and `e_1ph` as given.
    #[default]
    Direct,
    /// Fit a pseudomode to the nanosphere spectral density.
    Sphere,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModeConfig {
    pub source: ModeSource,
    /// eV
    pub omega_p: f64,
    /// eV
    pub kappa: f64,
    /// mV/bohr
    pub e_1ph: f64,
    pub metal: DrudeMetal,
    pub geometry: SphereEmitterGeometry,
    /// Frequency axis of the spectral density (eV).
    pub spectrum_min: f64,
    pub spectrum_max: f64,
    pub spectrum_points: usize,
    /// e·bohr
    pub mu_probe: f64,
}

impl Default for ModeConfig {
    fn default() -> Self {
        Self {
            source: ModeSource::Direct,
            omega_p: 7.6,
            kappa: 0.476,
            e_1ph: 70.0,
            metal: DrudeMetal::default(),
            geometry: SphereEmitterGeometry::default(),
            spectrum_min: 3.0,
            spectrum_max: 12.0,
            spectrum_points: 1801,
            mu_probe: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// fs
    pub t_final: f64,
    pub method: Method,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// fs
    pub max_step: f64,
    pub max_steps: usize,
    /// fs
    pub output_stride: f64,
    /// Nuclear density snapshot spacing (fs); 0 disables snapshots.
    pub density_stride: f64,
    /// Worker threads; 0 lets the runtime decide.
    pub threads: usize,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let ic = IntegratorConfig::default();
        Self {
            t_final: 1000.0,
            method: ic.method,
            rel_tol: ic.rel_tol,
            abs_tol: ic.abs_tol,
            max_step: ic.max_step,
            max_steps: ic.max_steps,
            output_stride: ic.output_stride,
            density_stride: 1.0,
            threads: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig {
            method: self.method,
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step,
            output_stride: self.output_stride,
            density_stride: (self.density_stride > 0.0).then_some(self.density_stride),
            max_steps: self.max_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    /// eV
    pub omega_p: Vec<f64>,
    /// mV/bohr
    pub e_1ph: Vec<f64>,
    /// Store nuclear densities for scan trajectories too.
    pub keep_densities: bool,
    /// Start of the saturation-fit window (fs); the later half of the
    /// series when absent.
    pub fit_start: Option<f64>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            omega_p: (0..=70).map(|k| 4.0 + 0.1 * k as f64).collect(),
            e_1ph: (1..=10).map(|k| 10.0 * k as f64).collect(),
            keep_densities: false,
            fit_start: None,
        }
    }
}

/// Command-line overrides; `None` keeps the file value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub omega_p: Option<f64>,
    pub e_1ph: Option<f64>,
    pub kappa: Option<f64>,
    pub t_final: Option<f64>,
    pub threads: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        // curve files are relative to the config file
        if let Some(dir) = path.parent() {
            for f in [&mut cfg.molecule.x_file, &mut cfg.molecule.b_file, &mut cfg.molecule.dipole_file]
                .into_iter()
                .flatten()
            {
                if f.is_relative() {
                    *f = dir.join(&*f);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable as TOML")
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        let touches_mode = o.omega_p.is_some() || o.e_1ph.is_some() || o.kappa.is_some();
        if touches_mode && self.mode.source == ModeSource::Sphere {
            return Err(Error::Config(
                "mode overrides need mode.source = \"direct\"".into(),
            ));
        }
        if let Some(v) = o.omega_p {
            self.mode.omega_p = v;
        }
        if let Some(v) = o.e_1ph {
            self.mode.e_1ph = v;
        }
        if let Some(v) = o.kappa {
            self.mode.kappa = v;
        }
        if let Some(v) = o.t_final {
            self.run.t_final = v;
        }
        if let Some(v) = o.threads {
            self.run.threads = v;
        }
        if let Some(v) = &o.output_dir {
            self.run.output_dir = v.clone();
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if !(g.r_max > g.r_min && g.r_min.is_finite() && g.r_max.is_finite()) {
            return Err(Error::Config("grid.r_max must exceed grid.r_min".into()));
        }
        if g.n_elements < 1 || g.order < 2 {
            return Err(Error::Config("grid needs at least one element of order >= 2".into()));
        }
        positive("molecule.reduced_mass", self.molecule.reduced_mass)?;
        if self.molecule.source == MoleculeSource::Files {
            let m = &self.molecule;
            if m.x_file.is_none() || m.b_file.is_none() || m.dipole_file.is_none() {
                return Err(Error::Config(
                    "molecule.source = \"files\" needs x_file, b_file and dipole_file".into(),
                ));
            }
        }
        let md = &self.mode;
        positive("mode.omega_p", md.omega_p)?;
        positive("mode.kappa", md.kappa)?;
        if !(md.e_1ph >= 0.0 && md.e_1ph.is_finite()) {
            return Err(Error::Config("mode.e_1ph must be non-negative".into()));
        }
        if md.source == ModeSource::Sphere {
            md.metal.validate().map_err(config)?;
            md.geometry.validate().map_err(config)?;
            positive("mode.mu_probe", md.mu_probe)?;
            if !(md.spectrum_max > md.spectrum_min && md.spectrum_min > 0.0) || md.spectrum_points < 16 {
                return Err(Error::Config("mode spectrum axis is invalid".into()));
            }
        }
        if !(self.cap.strength >= 0.0 && self.cap.strength.is_finite() && self.cap.r_abs.is_finite()) {
            return Err(Error::Config("cap.strength must be non-negative".into()));
        }
        let r = &self.run;
        if !(r.t_final >= 0.0 && r.t_final.is_finite()) {
            return Err(Error::Config("run.t_final must be non-negative".into()));
        }
        if !(r.density_stride >= 0.0) {
            return Err(Error::Config("run.density_stride must be non-negative".into()));
        }
        r.integrator().validate().map_err(config)?;
        for (name, axis) in [("scan.omega_p", &self.scan.omega_p), ("scan.e_1ph", &self.scan.e_1ph)] {
            if axis.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Config(format!("{name} entries must be finite and non-negative")));
            }
        }
        if self.scan.omega_p.contains(&0.0) {
            return Err(Error::Config("scan.omega_p entries must be positive".into()));
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<FedvrGrid> {
        let g = &self.grid;
        FedvrGrid::with_boundary(g.r_min, g.r_max, g.n_elements, g.order, g.boundary)
    }

    pub fn build_molecule(&self) -> Result<MoleculeModel> {
        let grid = self.build_grid()?;
        let m = &self.molecule;
        match m.source {
            MoleculeSource::Surrogate => MoleculeModel::surrogate_with_mass(&m.surrogate, grid, m.reduced_mass),
            MoleculeSource::Files => {
                let need = |f: &Option<PathBuf>| f.clone().ok_or_else(|| Error::Config("missing curve file".into()));
                MoleculeModel::load(
                    need(&m.x_file)?,
                    need(&m.b_file)?,
                    need(&m.dipole_file)?,
                    grid,
                    m.reduced_mass,
                    m.extrapolation,
                )
            }
        }
    }

    /// The pseudomode, plus the fit when it came from the sphere model.
    pub fn build_mode(&self) -> Result<(PlasmonMode, Option<PseudomodeFit>)> {
        let md = &self.mode;
        match md.source {
            ModeSource::Direct => Ok((PlasmonMode::new(md.omega_p, md.kappa, md.e_1ph)?, None)),
            ModeSource::Sphere => {
                let w = linspace(md.spectrum_min, md.spectrum_max, md.spectrum_points);
                let s = spectral_density(&md.metal, &md.geometry, &w)?;
                let fit = fit_pseudomode(&w, &s.j_per_mu2, md.mu_probe)?;
                Ok((fit.mode, Some(fit)))
            }
        }
    }
}

fn config(e: Error) -> Error {
    match e {
        Error::Parameter(msg) => Error::Config(msg),
        other => other,
    }
}

// Where each default comes from, shown by `--print-config`.
const REFERENCE: &str = "reference setup";
const CALIBRATED: &str = "calibrated to the reference mode";
const CHOICE: &str = "numerical choice";
const SURROGATE: &str = "surrogate fit to H2-like curves";

fn annotation(section: &str, key: &str) -> Option<&'static str> {
    let note = match (section, key) {
        ("molecule", "source") => "surrogate by default; tabulated curves are user-supplied",
        ("molecule", "reduced_mass") => "H2 reduced mass, proton mass / 2",
        ("molecule", "extrapolation") => CHOICE,
        ("molecule.surrogate", _) | ("molecule.surrogate.dipole", _) => SURROGATE,
        ("grid", "r_min" | "r_max" | "n_elements" | "order") => REFERENCE,
        ("grid", "boundary") => "keeps both end functions so 46 x 9 gives 369",
        ("mode", "omega_p" | "kappa" | "e_1ph") => REFERENCE,
        ("mode", "source") => CHOICE,
        ("mode.metal", _) => CALIBRATED,
        ("mode.geometry", "radius" | "background_index" | "dipole_orientation") => REFERENCE,
        ("mode.geometry", "emitter_distance") => CALIBRATED,
        ("mode.geometry", "multipole_cutoff") => CHOICE,
        ("mode", _) => CHOICE,
        ("cap", _) => REFERENCE,
        ("run", "t_final") => REFERENCE,
        ("run", _) => CHOICE,
        ("scan", "omega_p" | "e_1ph") => "reference scan range",
        ("scan", _) => CHOICE,
        _ => return None,
    };
    Some(note)
}

impl ExperimentConfig {
    /// TOML text of this config with the origin of each value as comments.
    pub fn annotated(&self) -> String {
        let ours = toml::Table::try_from(self).expect("config is always representable as TOML");
        let defaults = toml::Table::try_from(Self::default()).expect("config is always representable as TOML");
        let lookup = |t: &toml::Table, section: &str, key: &str| -> Option<toml::Value> {
            let mut cur = t;
            for part in section.split('.').filter(|p| !p.is_empty()) {
                cur = cur.get(part)?.as_table()?;
            }
            cur.get(key).cloned()
        };
        let mut out = String::new();
        let mut section = String::new();
        for line in self.to_toml().lines() {
            out.push_str(line);
            let t = line.trim();
            if t.starts_with('[') && !t.contains('=') {
                section = t.trim_matches(|c| c == '[' || c == ']').to_string();
            } else if let Some((key, _)) = t.split_once(" = ") {
                if let Some(note) = annotation(&section, key) {
                    if lookup(&ours, &section, key) == lookup(&defaults, &section, key) {
                        out.push_str(&format!("  # {note}"));
                    } else {
                        out.push_str("  # user value");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}
