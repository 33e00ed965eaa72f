//! Lindblad propagation of the sector-blocked density matrix.

mod dopri;
mod oracle;
mod propagate;
mod rhs;
mod spectral;
mod state;

pub use dopri::{Dopri5, StepControl, StepStats};
pub use oracle::{
    dense_oracle_propagate, dense_oracle_propagate_full, embed, project,
    pure_state_effective_propagate, ORACLE_MAX_BASIS,
};
pub use propagate::{
    propagate, IntegratorConfig, Method, RunSummary, Sample, TrajectoryRecord,
};
pub use rhs::{rhs, BlockGenerator};
pub use spectral::{gauss_legendre, SpectralPropagator, SpectralSettings};
pub use state::{initial_state, initial_wavefunction, DensityState};
