use std::path::Path;

use faer::c64;
use serde::{Deserialize, Serialize};

use super::dopri::{Dopri5, StepControl};
use super::rhs::BlockGenerator;
use super::spectral::{SpectralPropagator, SpectralSettings};
use super::state::DensityState;
use crate::error::{Error, Result};
use crate::system::{write_text, Channel, SystemOperators};
use crate::units::fs_to_au;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Eigenbasis propagation with quadrature for the feeding term.
    #[default]
    Spectral,
    /// Adaptive Dormand–Prince on the full block equations.
    Rk45,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub method: Method,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// fs
    pub max_step: f64,
    /// Spacing of recorded samples (fs).
    pub output_stride: f64,
    /// Spacing of nuclear density snapshots (fs); none when absent.
    pub density_stride: Option<f64>,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::Spectral,
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_step: 1.0,
            output_stride: 1.0,
            density_stride: None,
            max_steps: 50_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::Parameter("integrator tolerances must be positive".into()));
        }
        if !(self.max_step > 0.0 && self.output_stride > 0.0) {
            return Err(Error::Parameter("max_step and output_stride must be positive".into()));
        }
        if self.density_stride.is_some_and(|d| !(d > 0.0)) {
            return Err(Error::Parameter("density_stride must be positive".into()));
        }
        Ok(())
    }

    pub fn step_control(&self) -> StepControl {
        StepControl {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: fs_to_au(self.max_step),
            max_steps: self.max_steps,
        }
    }

    /// Breaches beyond this are integrity errors.
    pub fn integrity_limit(&self) -> f64 {
        100.0 * self.rel_tol.max(self.abs_tol)
    }

    fn spectral_settings(&self) -> SpectralSettings {
        SpectralSettings {
            truncation: (1e-4 * self.abs_tol).min(1e-13),
            ..SpectralSettings::default()
        }
    }
}

/// One recorded point of a trajectory.
#[derive(Debug, Clone)]
pub struct Sample {
    pub time_fs: f64,
    /// Population remaining on each channel `[X0, B0, X1]`.
    pub active: [f64; 3],
    /// Absorbed probability per channel.
    pub dissipated: [f64; 3],
    pub trace_deficit: f64,
    /// rho_ii per channel when a density snapshot is due.
    pub diagonals: Option<[Vec<f64>; 3]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: Method,
    pub t_final_fs: f64,
    pub active: [f64; 3],
    pub dissipated: [f64; 3],
    pub max_abs_trace_deficit: f64,
    pub min_eigenvalue_rho11: f64,
    pub min_eigenvalue_rho00: f64,
    pub hermiticity_error: f64,
    pub steps: usize,
    pub rejected_steps: usize,
    /// Retained eigencomponents (one-excitation, ground) in spectral mode.
    pub active_eigencomponents: Option<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub times_fs: Vec<f64>,
    pub active: [Vec<f64>; 3],
    pub dissipated: [Vec<f64>; 3],
    pub trace_deficit: Vec<f64>,
    pub density_times_fs: Vec<f64>,
    pub densities: Vec<[Vec<f64>; 3]>,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub grid_hash: String,
    pub summary: RunSummary,
}

impl TrajectoryRecord {
    fn new(ops: &SystemOperators, method: Method) -> Self {
        Self {
            times_fs: Vec::new(),
            active: Default::default(),
            dissipated: Default::default(),
            trace_deficit: Vec::new(),
            density_times_fs: Vec::new(),
            densities: Vec::new(),
            nodes: ops.nodes.clone(),
            weights: ops.weights.clone(),
            grid_hash: ops.grid_hash.clone(),
            summary: RunSummary {
                method,
                t_final_fs: 0.0,
                active: [0.0; 3],
                dissipated: [0.0; 3],
                max_abs_trace_deficit: 0.0,
                min_eigenvalue_rho11: 0.0,
                min_eigenvalue_rho00: 0.0,
                hermiticity_error: 0.0,
                steps: 0,
                rejected_steps: 0,
                active_eigencomponents: None,
            },
        }
    }

    fn push(&mut self, s: &Sample) {
        self.times_fs.push(s.time_fs);
        for c in 0..3 {
            self.active[c].push(s.active[c]);
            self.dissipated[c].push(s.dissipated[c]);
        }
        self.trace_deficit.push(s.trace_deficit);
        if let Some(d) = &s.diagonals {
            self.density_times_fs.push(s.time_fs);
            self.densities.push(d.clone());
        }
    }

    /// Total dissociated probability (all tallies) at each sample.
    pub fn total_dissipated(&self) -> Vec<f64> {
        (0..self.times_fs.len())
            .map(|k| self.dissipated.iter().map(|d| d[k]).sum())
            .collect()
    }

    pub fn final_dissipated(&self, c: Channel) -> f64 {
        *self.dissipated[c.index()].last().unwrap_or(&0.0)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "time_fs,pa_x0,pa_b0,pa_x1,pd_x0,pd_b0,pd_x1,trace_deficit\n",
        );
        for k in 0..self.times_fs.len() {
            s.push_str(&format!(
                "{:.6},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.3e}\n",
                self.times_fs[k],
                self.active[0][k],
                self.active[1][k],
                self.active[2][k],
                self.dissipated[0][k],
                self.dissipated[1][k],
                self.dissipated[2][k],
                self.trace_deficit[k]
            ));
        }
        s
    }

    /// Long-format nuclear densities: `rho_ii / w_i` per bohr.
    pub fn densities_csv(&self) -> String {
        let mut s = String::from("time_fs,channel,r_bohr,density_per_bohr\n");
        for (t, d) in self.density_times_fs.iter().zip(&self.densities) {
            for c in Channel::ALL {
                for (i, p) in d[c.index()].iter().enumerate() {
                    s.push_str(&format!(
                        "{t:.6},{},{:.8},{:.10e}\n",
                        c.label(),
                        self.nodes[i],
                        p / self.weights[i]
                    ));
                }
            }
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_text(path.as_ref(), &self.to_csv())
    }

    pub fn write_densities_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_text(path.as_ref(), &self.densities_csv())
    }
}

/// Sample times: every `stride` up to `t_final`, plus `t_final`.
fn schedule(t_final: f64, stride: f64) -> Vec<f64> {
    let mut out = vec![0.0];
    let mut k = 1u64;
    loop {
        let t = k as f64 * stride;
        if t >= t_final - 1e-9 * stride {
            break;
        }
        out.push(t);
        k += 1;
    }
    if t_final > 0.0 {
        out.push(t_final);
    }
    out
}

fn density_due(t: f64, stride: Option<f64>, t_final: f64) -> bool {
    match stride {
        None => false,
        Some(d) => {
            let k = (t / d).round();
            (t - k * d).abs() <= 1e-9 * d || (t - t_final).abs() <= 1e-12
        }
    }
}

/// Propagate `state0` by `t_final_fs`, calling `observer` at every sample.
pub fn propagate(
    state0: &DensityState,
    ops: &SystemOperators,
    t_final_fs: f64,
    cfg: &IntegratorConfig,
    observer: &mut dyn FnMut(&Sample),
) -> Result<(TrajectoryRecord, DensityState)> {
    cfg.validate()?;
    if !(t_final_fs >= 0.0 && t_final_fs.is_finite()) {
        return Err(Error::Parameter(format!("t_final must be non-negative, got {t_final_fs}")));
    }
    if state0.n_basis() != ops.n_basis() {
        return Err(Error::Parameter("state and operators have different grids".into()));
    }
    let mut times = schedule(t_final_fs, cfg.output_stride);
    if let Some(d) = cfg.density_stride {
        times.extend(schedule(t_final_fs, d));
        times.sort_by(f64::total_cmp);
        times.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * cfg.output_stride.min(d));
    }
    let mut rec = TrajectoryRecord::new(ops, cfg.method);
    let limit = cfg.integrity_limit();
    let mut last_tallies = state0.dissipated;
    let mut check = |s: &Sample, rec: &mut TrajectoryRecord| -> Result<()> {
        if !(s.trace_deficit.abs() <= limit) {
            return Err(Error::Integrity(format!(
                "trace deficit {:.3e} at t = {:.3} fs exceeds {limit:.1e}",
                s.trace_deficit, s.time_fs
            )));
        }
        for c in 0..3 {
            if s.dissipated[c] < last_tallies[c] - limit {
                return Err(Error::Integrity(format!(
                    "{} tally decreased at t = {:.3} fs",
                    Channel::ALL[c].label(),
                    s.time_fs
                )));
            }
        }
        last_tallies = s.dissipated;
        rec.summary.max_abs_trace_deficit = rec.summary.max_abs_trace_deficit.max(s.trace_deficit.abs());
        rec.push(s);
        observer(s);
        Ok(())
    };

    let final_state = match cfg.method {
        Method::Spectral => {
            let mut p = SpectralPropagator::new(state0, ops, fs_to_au(t_final_fs), cfg.spectral_settings())?;
            for &t in &times {
                p.advance_to(fs_to_au(t));
                let active = p.populations();
                let dissipated = p.dissipated();
                let total: f64 = active.iter().chain(&dissipated).sum();
                let s = Sample {
                    time_fs: state0.time_fs + t,
                    active,
                    dissipated,
                    trace_deficit: 1.0 - total,
                    diagonals: density_due(t, cfg.density_stride, t_final_fs).then(|| p.diagonals()),
                };
                check(&s, &mut rec)?;
            }
            rec.summary.steps = p.substeps;
            rec.summary.active_eigencomponents = Some(p.active_sizes());
            p.state()
        }
        Method::Rk45 => {
            let n = ops.n_basis();
            let gen = BlockGenerator::new(ops);
            let mut y = state0.to_flat();
            let mut solver = Dopri5::new(y.len(), cfg.step_control());
            let mut f = |_t: f64, y: &[c64], dy: &mut [c64]| gen.derivative(y, dy);
            let mut t_au = 0.0;
            let mut state = state0.clone();
            for &t in &times {
                solver.integrate(&mut f, &mut t_au, &mut y, fs_to_au(t))?;
                state = DensityState::from_flat(&y, n, state0.time_fs + t);
                let s = Sample {
                    time_fs: state.time_fs,
                    active: state.populations(),
                    dissipated: state.dissipated,
                    trace_deficit: state.trace_deficit(),
                    diagonals: density_due(t, cfg.density_stride, t_final_fs)
                        .then(|| Channel::ALL.map(|c| state.channel_diagonal(c))),
                };
                check(&s, &mut rec)?;
            }
            rec.summary.steps = solver.stats.accepted;
            rec.summary.rejected_steps = solver.stats.rejected;
            state
        }
    };

    let (e11, e00) = final_state.min_eigenvalues()?;
    let herm = final_state.hermiticity_error();
    let sm = &mut rec.summary;
    sm.t_final_fs = t_final_fs;
    sm.active = final_state.populations();
    sm.dissipated = final_state.dissipated;
    sm.min_eigenvalue_rho11 = e11;
    sm.min_eigenvalue_rho00 = e00;
    sm.hermiticity_error = herm;
    if e11.min(e00) < -limit {
        return Err(Error::Integrity(format!(
            "density matrix lost positivity (smallest eigenvalue {:.3e})",
            e11.min(e00)
        )));
    }
    Ok((rec, final_state))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_hits_final_time() {
        assert_eq!(schedule(3.0, 1.0), vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(schedule(2.5, 1.0), vec![0.0, 1.0, 2.0, 2.5]);
        assert_eq!(schedule(0.0, 1.0), vec![0.0]);
    }

    #[test]
    fn zero_duration_returns_initial_observables() {
        let ops = SystemOperators::clamped(3.0, 0.3, 0.3, 0.01, 0.002).unwrap();
        let s0 = DensityState::from_wavefunction(&[c64::new(1.0, 0.0), c64::new(0.0, 0.0)]).unwrap();
        for method in [Method::Spectral, Method::Rk45] {
            let cfg = IntegratorConfig { method, ..Default::default() };
            let (rec, fin) = propagate(&s0, &ops, 0.0, &cfg, &mut |_| {}).unwrap();
            assert_eq!(rec.times_fs, vec![0.0]);
            assert_eq!(rec.active[1][0], 1.0);
            assert!(fin.max_difference(&s0) < 1e-15);
        }
    }
}
