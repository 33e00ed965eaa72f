//! Reader for tabulated curves.
//!
//! Format: plain text, lines starting with `#` are comments, one data row
//! per line with two whitespace- or comma-separated numbers. A header line
//! (which may itself be a comment) declares the units with `R_unit=` and
//! `V_unit=` tokens:
//!
//! ```text
//! # R_unit=bohr V_unit=eV
//! 0.50   11.06
//! 0.55    9.87
//! ```
//!
//! Accepted R units: `bohr`, `angstrom`. Accepted value units: `hartree`,
//! `au`, `eV` for energies and `ebohr`, `au`, `debye` for dipoles. Values
//! are converted to atomic units on load.

use std::path::Path;

use crate::error::{Error, Result};
use crate::units::{BOHR_ANGSTROM, DEBYE_E_BOHR, HARTREE_EV};

/// What the value column of a table represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Energy,
    Dipole,
}

#[derive(Debug, Clone)]
pub struct CurveTable {
    /// Abscissae in bohr.
    pub r: Vec<f64>,
    /// Values in atomic units.
    pub values: Vec<f64>,
}

impl CurveTable {
    pub fn load(path: impl AsRef<Path>, quantity: Quantity) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(&path, e))?;
        Self::parse(&text, quantity).map_err(|e| match e {
            Error::Format(msg) => Error::Format(format!("{}: {msg}", path.as_ref().display())),
            other => other,
        })
    }

    pub fn parse(text: &str, quantity: Quantity) -> Result<Self> {
        let mut r_scale = None;
        let mut v_scale = None;
        let mut r = Vec::new();
        let mut values = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if line.contains("R_unit=") || line.contains("V_unit=") {
                for token in line.trim_start_matches('#').split_whitespace() {
                    if let Some(u) = token.strip_prefix("R_unit=") {
                        r_scale = Some(length_scale(u)?);
                    } else if let Some(u) = token.strip_prefix("V_unit=") {
                        v_scale = Some(value_scale(u, quantity)?);
                    }
                }
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .collect();
            if cols.len() != 2 {
                return Err(Error::Format(format!(
                    "line {}: expected two columns, found {}",
                    lineno + 1,
                    cols.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| {
                    Error::Format(format!("line {}: '{s}' is not a number", lineno + 1))
                })
            };
            r.push(parse(cols[0])?);
            values.push(parse(cols[1])?);
        }
        let r_scale =
            r_scale.ok_or_else(|| Error::Format("missing R_unit= declaration".into()))?;
        let v_scale =
            v_scale.ok_or_else(|| Error::Format("missing V_unit= declaration".into()))?;
        if r.len() < 2 {
            return Err(Error::Format("a table needs at least two rows".into()));
        }
        if let Some(i) = r.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Format(format!(
                "R column must be strictly increasing (data row {})",
                i + 2
            )));
        }
        Ok(Self {
            r: r.into_iter().map(|x| x * r_scale).collect(),
            values: values.into_iter().map(|v| v * v_scale).collect(),
        })
    }
}

fn length_scale(unit: &str) -> Result<f64> {
    match unit.to_ascii_lowercase().as_str() {
        "bohr" | "au" | "a0" => Ok(1.0),
        "angstrom" | "a" => Ok(1.0 / BOHR_ANGSTROM),
        other => Err(Error::Format(format!("unknown R unit '{other}'"))),
    }
}

fn value_scale(unit: &str, quantity: Quantity) -> Result<f64> {
    let u = unit.to_ascii_lowercase();
    match (quantity, u.as_str()) {
        (Quantity::Energy, "hartree" | "au") => Ok(1.0),
        (Quantity::Energy, "ev") => Ok(1.0 / HARTREE_EV),
        (Quantity::Dipole, "ebohr" | "au" | "ea0") => Ok(1.0),
        (Quantity::Dipole, "debye") => Ok(DEBYE_E_BOHR),
        _ => Err(Error::Format(format!(
            "unit '{unit}' is not valid for a {quantity:?} table"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_units_and_comments() {
        let t = CurveTable::parse(
            "# X state\n# R_unit=angstrom V_unit=eV\n0.5 27.211386245988\n\n1.0, 0.0\n",
            Quantity::Energy,
        )
        .unwrap();
        assert!((t.r[0] - 0.5 / BOHR_ANGSTROM).abs() < 1e-14);
        assert!((t.values[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn format_errors() {
        assert!(CurveTable::parse("0 1\n1 2\n", Quantity::Energy).is_err());
        assert!(CurveTable::parse("# R_unit=bohr V_unit=eV\n1 1\n0 2\n", Quantity::Energy).is_err());
        assert!(CurveTable::parse("# R_unit=bohr V_unit=eV\n1 1 3\n2 2 3\n", Quantity::Energy).is_err());
        assert!(CurveTable::parse("# R_unit=bohr V_unit=debye\n1 1\n2 2\n", Quantity::Energy).is_err());
    }
}
