//! Physical constants and unit conversions.
//!
//! Everything inside the crate is stored in Hartree atomic units
//! (hbar = e = m_e = a_0 = 1). Conversions happen at the boundaries:
//! config files, tabulated curves and CSV output.

/// Hartree energy in eV (CODATA 2018).
pub const HARTREE_EV: f64 = 27.211_386_245_988;

/// Atomic unit of time in femtoseconds.
pub const AU_TIME_FS: f64 = 0.024_188_843_265_857;

/// Bohr radius in nanometres.
pub const BOHR_NM: f64 = 0.052_917_721_090_3;

/// Bohr radius in angstrom.
pub const BOHR_ANGSTROM: f64 = 0.529_177_210_903;

/// Proton mass in electron masses.
pub const PROTON_MASS: f64 = 1836.152_67;

/// Nuclear reduced mass of H2, m_p / 2, in electron masses.
pub const H2_REDUCED_MASS: f64 = PROTON_MASS / 2.0;

/// hbar in eV·fs.
pub const HBAR_EV_FS: f64 = 0.658_211_956_950_907;

/// Vacuum permittivity in F/m.
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;

/// Elementary charge in C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// One debye in e·bohr.
pub const DEBYE_E_BOHR: f64 = 0.393_430_269_7;

#[inline]
pub fn ev_to_hartree(e: f64) -> f64 {
    e / HARTREE_EV
}

#[inline]
pub fn hartree_to_ev(e: f64) -> f64 {
    e * HARTREE_EV
}

#[inline]
pub fn fs_to_au(t: f64) -> f64 {
    t / AU_TIME_FS
}

#[inline]
pub fn au_to_fs(t: f64) -> f64 {
    t * AU_TIME_FS
}

#[inline]
pub fn nm_to_bohr(x: f64) -> f64 {
    x / BOHR_NM
}

/// Field strength in mV/bohr to atomic units (hartree / (e·bohr)).
///
/// With this choice `E[mV/bohr] * mu[e·bohr]` is an energy in meV.
#[inline]
pub fn mv_per_bohr_to_au(e: f64) -> f64 {
    e * 1e-3 / HARTREE_EV
}

#[inline]
pub fn au_to_mv_per_bohr(e: f64) -> f64 {
    e * HARTREE_EV * 1e3
}

/// Field strength in mV/bohr to V/m.
#[inline]
pub fn mv_per_bohr_to_v_per_m(e: f64) -> f64 {
    e * 1e-3 / (BOHR_NM * 1e-9)
}
