use std::path::Path;

use serde::Serialize;

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::lindblad::{initial_state, propagate, DensityState, IntegratorConfig, RunSummary, TrajectoryRecord};
use crate::molecule::MoleculeModel;
use crate::plasmon::{
    fit_pseudomode, linspace, spectral_density, DrudeMetal, PlasmonMode, PseudomodeFit, SphereEmitterGeometry,
};
use crate::system::{write_text, SystemOperators};

/// Everything built from a config before propagation.
pub struct Setup {
    pub molecule: MoleculeModel,
    pub mode: PlasmonMode,
    pub fit: Option<PseudomodeFit>,
    pub ops: SystemOperators,
    pub initial: DensityState,
}

impl Setup {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let molecule = cfg.build_molecule()?;
        let (mode, fit) = cfg.build_mode()?;
        Self::with_mode(cfg, molecule, mode, fit)
    }

    pub(crate) fn with_mode(
        cfg: &ExperimentConfig,
        molecule: MoleculeModel,
        mode: PlasmonMode,
        fit: Option<PseudomodeFit>,
    ) -> Result<Self> {
        let ops = SystemOperators::assemble(&molecule, &mode, cfg.cap)?;
        let initial = initial_state(&molecule)?;
        Ok(Self {
            molecule,
            mode,
            fit,
            ops,
            initial,
        })
    }

    pub fn propagate(&self, t_final: f64, ic: &IntegratorConfig) -> Result<TrajectoryRecord> {
        propagate(&self.initial, &self.ops, t_final, ic, &mut |_| {}).map(|(rec, _)| rec)
    }
}

/// JSON sidecar written next to every CSV output.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub program: &'static str,
    pub version: &'static str,
    pub grid_hash: String,
    pub n_basis: usize,
    pub mode: PlasmonMode,
    /// Normalised residual of the Lorentzian fit when the mode came from
    /// the sphere model.
    pub pseudomode_fit_residual: Option<f64>,
    pub summary: Option<RunSummary>,
    pub config: ExperimentConfig,
}

impl Metadata {
    pub(crate) fn new(cfg: &ExperimentConfig, setup: &Setup, summary: Option<RunSummary>) -> Self {
        Self {
            program: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            grid_hash: setup.ops.grid_hash.clone(),
            n_basis: setup.ops.n_basis(),
            mode: setup.mode,
            pseudomode_fit_residual: setup.fit.as_ref().map(|f| f.residual),
            summary,
            config: cfg.clone(),
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let body = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        write_text(path.as_ref(), &(body + "\n"))
    }
}

pub struct RunOutput {
    pub record: TrajectoryRecord,
    pub metadata: Metadata,
}

impl RunOutput {
    /// `trajectory.csv`, `densities.csv` (when snapshots were taken) and
    /// `metadata.json` in `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.record.write_csv(dir.join("trajectory.csv"))?;
        if !self.record.density_times_fs.is_empty() {
            self.record.write_densities_csv(dir.join("densities.csv"))?;
        }
        self.metadata.write(dir.join("metadata.json"))
    }
}

pub fn run_single(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let setup = Setup::build(cfg)?;
    let record = with_threads(cfg.run.threads, || setup.propagate(cfg.run.t_final, &cfg.run.integrator()))??;
    let metadata = Metadata::new(cfg, &setup, Some(record.summary.clone()));
    Ok(RunOutput { record, metadata })
}

/// Run `f` on a pool of `threads` workers, or on the global pool for 0.
pub(crate) fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} worker threads: {e}")))?;
    Ok(pool.install(f))
}


/// Polaritonic curves and kappa_B*(R) for the configured system:
/// `popes.csv`, `kappa_b.csv` and `metadata.json` in `dir`.
pub fn write_popes(cfg: &ExperimentConfig, dir: impl AsRef<Path>) -> Result<Setup> {
    let dir = dir.as_ref();
    let setup = Setup::build(cfg)?;
    let curves = setup.ops.polaritonic_curves();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    curves.write_csv(dir.join("popes.csv"))?;
    curves.write_decay_csv(dir.join("kappa_b.csv"))?;
    Metadata::new(cfg, &setup, None).write(dir.join("metadata.json"))?;
    Ok(setup)
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub metal: DrudeMetal,
    pub geometry: SphereEmitterGeometry,
    /// The fitted pseudomode, or why the fit was rejected.
    pub mode: std::result::Result<PlasmonMode, String>,
    pub fit_residual: Option<f64>,
    pub fit_window_ev: Option<(f64, f64)>,
}

/// Spectral density of the configured sphere (`spectrum.csv`) and its
/// pseudomode fit (`pseudomode.json`). A rejected fit is reported, not
/// raised, so the spectrum is always written.
pub fn write_spectral_density(cfg: &ExperimentConfig, dir: impl AsRef<Path>) -> Result<SpectrumReport> {
    let dir = dir.as_ref();
    let md = &cfg.mode;
    md.metal.validate()?;
    md.geometry.validate()?;
    let w = linspace(md.spectrum_min, md.spectrum_max, md.spectrum_points);
    let spectrum = spectral_density(&md.metal, &md.geometry, &w)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    spectrum.write_csv(dir.join("spectrum.csv"))?;
    let fit = fit_pseudomode(&w, &spectrum.j_per_mu2, md.mu_probe);
    let report = SpectrumReport {
        metal: md.metal,
        geometry: md.geometry,
        fit_residual: fit.as_ref().ok().map(|f| f.residual),
        fit_window_ev: fit.as_ref().ok().map(|f| f.window),
        mode: fit.map(|f| f.mode).map_err(|e| e.to_string()),
    };
    let body = serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))?;
    write_text(&dir.join("pseudomode.json"), &(body + "\n"))?;
    Ok(report)
}
