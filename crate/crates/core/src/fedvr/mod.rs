//! Finite-element discrete variable representation of the nuclear
//! coordinate.

mod grid;
mod lobatto;
mod sparse;
mod spline;
mod table;

pub use grid::{Boundary, FedvrGrid};
pub use lobatto::LobattoRule;
pub use sparse::CsrMatrix;
pub use spline::{Extrapolation, NaturalCubicSpline};
pub use table::{CurveTable, Quantity};
