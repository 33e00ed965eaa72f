use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::run::{with_threads, Metadata, Setup};
use crate::error::{Error, Result};
use crate::lindblad::{IntegratorConfig, TrajectoryRecord};
use crate::molecule::MoleculeModel;
use crate::plasmon::{PlasmonMode, PseudomodeFit};
use crate::system::{induced_decay_rate, write_text};
use crate::units::hartree_to_ev;

#[derive(Debug, Clone)]
pub enum PointOutcome {
    Done(TrajectoryRecord),
    /// The point failed; the scan carried on without it.
    Failed { message: String, numerical: bool },
}

impl PointOutcome {
    pub fn record(&self) -> Option<&TrajectoryRecord> {
        match self {
            PointOutcome::Done(r) => Some(r),
            PointOutcome::Failed { .. } => None,
        }
    }

    /// Final total dissociation, NaN for a failed point.
    pub fn final_pd(&self) -> f64 {
        self.record()
            .and_then(|r| r.total_dissipated().last().copied())
            .unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone)]
pub struct ScanPoint {
    pub omega_p: f64,
    pub e_1ph: f64,
    pub outcome: PointOutcome,
}

struct Shared {
    molecule: MoleculeModel,
    base: PlasmonMode,
    fit: Option<PseudomodeFit>,
    ic: IntegratorConfig,
}

impl Shared {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let molecule = cfg.build_molecule()?;
        let (base, fit) = cfg.build_mode()?;
        let mut ic = cfg.run.integrator();
        if !cfg.scan.keep_densities {
            ic.density_stride = None;
        }
        Ok(Self { molecule, base, fit, ic })
    }

    fn setup(&self, cfg: &ExperimentConfig, omega_p: f64, e_1ph: f64) -> Result<Setup> {
        let mode = PlasmonMode::new(omega_p, self.base.kappa, e_1ph)?;
        Setup::with_mode(cfg, self.molecule.clone(), mode, self.fit.clone())
    }

    fn point(&self, cfg: &ExperimentConfig, omega_p: f64, e_1ph: f64) -> ScanPoint {
        let outcome = match self
            .setup(cfg, omega_p, e_1ph)
            .and_then(|s| s.propagate(cfg.run.t_final, &self.ic))
        {
            Ok(rec) => PointOutcome::Done(rec),
            Err(e) => PointOutcome::Failed {
                numerical: e.is_numerical(),
                message: e.to_string(),
            },
        };
        ScanPoint {
            omega_p,
            e_1ph,
            outcome,
        }
    }
}

fn require_axis(name: &str, axis: &[f64]) -> Result<()> {
    if axis.is_empty() {
        Err(Error::Config(format!("scan.{name} must not be empty")))
    } else {
        Ok(())
    }
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.10e}")
    }
}

/// Rows of `label,x0,x1,...` under a header of column coordinates.
fn grid_csv(corner: &str, columns: &[f64], rows: &[(f64, Vec<f64>)]) -> String {
    let mut s = String::from(corner);
    for c in columns {
        let _ = write!(s, ",{c:.6}");
    }
    s.push('\n');
    for (label, values) in rows {
        let _ = write!(s, "{label:.6}");
        for v in values {
            s.push(',');
            s.push_str(&fmt(*v));
        }
        s.push('\n');
    }
    s
}

fn summary_csv(points: &[ScanPoint]) -> String {
    let mut s = String::from("omega_p_ev,e_1ph_mv_per_bohr,pd_x0,pd_b0,pd_x1,pd_total,status\n");
    for p in points {
        let _ = write!(s, "{:.6},{:.6},", p.omega_p, p.e_1ph);
        match &p.outcome {
            PointOutcome::Done(r) => {
                let d = r.summary.dissipated;
                let _ = writeln!(s, "{},{},{},{},ok", fmt(d[0]), fmt(d[1]), fmt(d[2]), fmt(p.outcome.final_pd()));
            }
            PointOutcome::Failed { message, .. } => {
                let _ = writeln!(s, "nan,nan,nan,nan,\"failed: {}\"", message.replace('"', "'"));
            }
        }
    }
    s
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// One trajectory per plasmon frequency, plus the induced decay-rate map.
#[derive(Debug, Clone)]
pub struct FrequencyScan {
    pub e_1ph: f64,
    pub points: Vec<ScanPoint>,
    /// Nodes of the kappa_B* map (bohr).
    pub r: Vec<f64>,
    /// kappa_B*(R) per frequency (eV).
    pub kappa_b: Vec<Vec<f64>>,
    metadata: Metadata,
}

impl FrequencyScan {
    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| p.record().is_none()).count()
    }

    /// `pd_time_map.csv` (total P_D by frequency and time),
    /// `kappa_b_map.csv`, `scan_summary.csv` and `metadata.json`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        create_dir(dir)?;
        let times = self
            .points
            .iter()
            .find_map(|p| p.record().map(|r| r.times_fs.clone()))
            .unwrap_or_default();
        let rows: Vec<(f64, Vec<f64>)> = self
            .points
            .iter()
            .map(|p| {
                let v = p.outcome.record().map(|r| r.total_dissipated()).unwrap_or_else(|| vec![f64::NAN; times.len()]);
                (p.omega_p, v)
            })
            .collect();
        write_text(&dir.join("pd_time_map.csv"), &grid_csv("omega_p_ev\\time_fs", &times, &rows))?;
        let krows: Vec<(f64, Vec<f64>)> = self.points.iter().map(|p| p.omega_p).zip(self.kappa_b.iter().cloned()).collect();
        write_text(&dir.join("kappa_b_map.csv"), &grid_csv("omega_p_ev\\r_bohr", &self.r, &krows))?;
        write_text(&dir.join("scan_summary.csv"), &summary_csv(&self.points))?;
        self.metadata.write(dir.join("metadata.json"))
    }
}

impl ScanPoint {
    fn record(&self) -> Option<&TrajectoryRecord> {
        self.outcome.record()
    }
}

pub fn scan_frequency(cfg: &ExperimentConfig) -> Result<FrequencyScan> {
    require_axis("omega_p", &cfg.scan.omega_p)?;
    let shared = Shared::new(cfg)?;
    let e_1ph = shared.base.e_1ph;
    let axis = &cfg.scan.omega_p;
    let (points, kappa_b) = with_threads(cfg.run.threads, || {
        let points: Vec<ScanPoint> = axis.par_iter().map(|&w| shared.point(cfg, w, e_1ph)).collect();
        let kappa_b: Vec<Vec<f64>> = axis
            .par_iter()
            .map(|&w| match shared.setup(cfg, w, e_1ph) {
                Ok(s) => induced_decay_rate(&s.ops).into_iter().map(hartree_to_ev).collect(),
                Err(_) => vec![f64::NAN; shared.molecule.n_basis()],
            })
            .collect();
        (points, kappa_b)
    })?;
    let first = shared.setup(cfg, axis[0], e_1ph)?;
    Ok(FrequencyScan {
        e_1ph,
        r: first.ops.nodes.clone(),
        metadata: Metadata::new(cfg, &first, None),
        points,
        kappa_b,
    })
}

/// Final dissociation over a field-strength by frequency grid.
#[derive(Debug, Clone)]
pub struct CouplingScan {
    pub omega_p: Vec<f64>,
    pub e_1ph: Vec<f64>,
    /// Row-major over `(e_1ph, omega_p)`.
    pub points: Vec<ScanPoint>,
    metadata: Metadata,
}

impl CouplingScan {
    pub fn at(&self, ie: usize, iw: usize) -> &ScanPoint {
        &self.points[ie * self.omega_p.len() + iw]
    }

    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| p.record().is_none()).count()
    }

    /// `pd_final_map.csv` (rows E_1ph, columns omega_p),
    /// `scan_summary.csv` and `metadata.json`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        create_dir(dir)?;
        let rows: Vec<(f64, Vec<f64>)> = (0..self.e_1ph.len())
            .map(|ie| {
                let v = (0..self.omega_p.len()).map(|iw| self.at(ie, iw).outcome.final_pd()).collect();
                (self.e_1ph[ie], v)
            })
            .collect();
        write_text(
            &dir.join("pd_final_map.csv"),
            &grid_csv("e_1ph_mv_per_bohr\\omega_p_ev", &self.omega_p, &rows),
        )?;
        write_text(&dir.join("scan_summary.csv"), &summary_csv(&self.points))?;
        self.metadata.write(dir.join("metadata.json"))
    }
}

pub fn scan_coupling(cfg: &ExperimentConfig) -> Result<CouplingScan> {
    require_axis("omega_p", &cfg.scan.omega_p)?;
    require_axis("e_1ph", &cfg.scan.e_1ph)?;
    let shared = Shared::new(cfg)?;
    let (ws, es) = (&cfg.scan.omega_p, &cfg.scan.e_1ph);
    let grid: Vec<(f64, f64)> = es.iter().flat_map(|&e| ws.iter().map(move |&w| (w, e))).collect();
    let points = with_threads(cfg.run.threads, || {
        grid.par_iter().map(|&(w, e)| shared.point(cfg, w, e)).collect::<Vec<_>>()
    })?;
    let first = shared.setup(cfg, ws[0], es[0])?;
    Ok(CouplingScan {
        omega_p: ws.clone(),
        e_1ph: es.clone(),
        metadata: Metadata::new(cfg, &first, None),
        points,
    })
}
