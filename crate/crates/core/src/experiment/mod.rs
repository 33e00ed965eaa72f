//! Configuration-driven experiments: single runs, parameter scans and
//! saturation fits, with CSV and JSON output.

mod config;
mod run;
mod saturation;
mod scan;

pub use config::{
    ExperimentConfig, GridConfig, ModeConfig, ModeSource, MoleculeConfig, MoleculeSource, Overrides, RunConfig,
    ScanConfig,
};
pub use run::{run_single, write_popes, write_spectral_density, Metadata, RunOutput, Setup, SpectrumReport};
pub use saturation::{fit_saturation, read_series, SaturationFit};
pub use scan::{scan_coupling, scan_frequency, CouplingScan, FrequencyScan, PointOutcome, ScanPoint};
