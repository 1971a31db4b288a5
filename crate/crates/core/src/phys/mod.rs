//! Physical constants, unit conversions and elementary kinematics.
//!
//! Everything inside the crate is SI. The helpers in this module convert the
//! laboratory units used at the edges (amu, Å³, meV, Debye) into SI and back.

mod molecule;

pub use molecule::{catalogue, lookup, Molecule};

use crate::error::{Error, Result};

/// CODATA 2018 exact and recommended values.
pub mod consts {
    /// Boltzmann constant, J/K.
    pub const K_B: f64 = 1.380_649e-23;
    /// Planck constant, J s.
    pub const H: f64 = 6.626_070_15e-34;
    /// Reduced Planck constant, J s.
    pub const HBAR: f64 = H / (2.0 * std::f64::consts::PI);
    /// Speed of light in vacuum, m/s.
    pub const C: f64 = 299_792_458.0;
    /// Vacuum permittivity, F/m.
    pub const EPS0: f64 = 8.854_187_812_8e-12;
    /// Atomic mass unit, kg.
    pub const AMU: f64 = 1.660_539_066_60e-27;
    /// Molar gas constant, J/(mol K).
    pub const R: f64 = 8.314_462_618;
    /// Elementary charge (J per eV).
    pub const EV: f64 = 1.602_176_634e-19;
    /// Debye, C m.
    pub const DEBYE: f64 = 3.335_640_952e-30;
    /// Standard gravity, m/s².
    pub const G_N: f64 = 9.806_65;
}

use consts::*;

pub fn amu_to_kg(amu: f64) -> f64 {
    amu * AMU
}

pub fn kg_to_amu(kg: f64) -> f64 {
    kg / AMU
}

/// Å³ to m³.
pub fn a3_to_m3(a3: f64) -> f64 {
    a3 * 1e-30
}

pub fn m3_to_a3(m3: f64) -> f64 {
    m3 * 1e30
}

pub fn ev_to_j(ev: f64) -> f64 {
    ev * EV
}

pub fn j_to_ev(j: f64) -> f64 {
    j / EV
}

pub fn mev_to_j(mev: f64) -> f64 {
    mev * 1e-3 * EV
}

pub fn j_to_mev(j: f64) -> f64 {
    j / EV * 1e3
}

/// Photon energy h c / λ.
pub fn photon_energy(wavelength: f64) -> f64 {
    H * C / wavelength
}

/// ½ m v².
pub fn kinetic_energy(mass: f64, v: f64) -> f64 {
    0.5 * mass * v * v
}

/// h / (m v). Fails for a particle at rest.
pub fn de_broglie_wavelength(mass: f64, v: f64) -> Result<f64> {
    if mass <= 0.0 {
        return Err(Error::domain("mass must be positive"));
    }
    if v == 0.0 {
        return Err(Error::domain("infinite wavelength at zero velocity"));
    }
    Ok(H / (mass * v.abs()))
}

/// SI polarizability 4πε₀·α_vol (C m²/V) from a volumetric polarizability in m³.
pub fn polarizability_si(alpha_vol: f64) -> f64 {
    4.0 * std::f64::consts::PI * EPS0 * alpha_vol
}
