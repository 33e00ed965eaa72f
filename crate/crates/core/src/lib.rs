//! Lindblad dynamics of a two-surface diatomic molecule coupled to a lossy
//! plasmonic pseudomode.

pub mod error;
pub mod experiment;
pub mod fedvr;
pub mod fit;
pub mod linalg;
pub mod lindblad;
pub mod molecule;
pub mod plasmon;
pub mod system;
pub mod units;

pub use error::{Error, Result};
