use serde::{Deserialize, Serialize};

use super::{a3_to_m3, amu_to_kg, consts::DEBYE};
use crate::error::{Error, Result};

/// A beam particle. All fields SI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Molecule {
    pub name: String,
    /// kg
    pub mass: f64,
    /// Volumetric polarizability, m³.
    pub alpha_vol: f64,
    /// Optical absorption cross-section at 1064 nm, m².
    pub sigma_abs: f64,
    /// Electron-impact ionization cross-section, m².
    pub sigma_ion: f64,
    /// Permanent dipole moment, C m. Informational only.
    pub dipole: Option<f64>,
}

const SIGMA_ABS_1064: f64 = 3e-23;
const SIGMA_ION: f64 = 2.7e-18;

impl Molecule {
    /// Build a molecule from laboratory units (amu, Å³).
    pub fn from_lab_units(
        name: impl Into<String>,
        mass_amu: f64,
        alpha_a3: f64,
        sigma_abs: f64,
        sigma_ion: f64,
    ) -> Result<Self> {
        let m = Molecule {
            name: name.into(),
            mass: amu_to_kg(mass_amu),
            alpha_vol: a3_to_m3(alpha_a3),
            sigma_abs,
            sigma_ion,
            dipole: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) {
            return Err(Error::domain(format!("{}: mass must be positive", self.name)));
        }
        if !(self.alpha_vol >= 0.0) {
            return Err(Error::domain(format!("{}: polarizability must be >= 0", self.name)));
        }
        if !(self.sigma_abs >= 0.0) || !(self.sigma_ion >= 0.0) {
            return Err(Error::domain(format!("{}: cross-sections must be >= 0", self.name)));
        }
        Ok(())
    }

    /// Perfluoroalkylated C60 with `n` side chains, n in 1..=9.
    ///
    /// Mass is 720 amu for the cage plus 619 amu per C12F25 chain; the
    /// polarizability grows by 18 Å³ per chain from 84 Å³ at n = 1, except for
    /// n = 7 where the computed 194 Å³ is used.
    pub fn perfluoro_c60(n: u32) -> Result<Self> {
        if !(1..=9).contains(&n) {
            return Err(Error::domain(format!("no catalogue entry for n = {n}")));
        }
        let mass_amu = 720.0 + 619.0 * f64::from(n);
        let alpha_a3 = if n == 7 { 194.0 } else { 84.0 + 18.0 * f64::from(n - 1) };
        let mut m = Molecule::from_lab_units(
            format!("perfluoroC60-n{n}"),
            mass_amu,
            alpha_a3,
            SIGMA_ABS_1064,
            SIGMA_ION,
        )?;
        if n == 7 {
            m.dipole = Some(6.0 * DEBYE);
        }
        Ok(m)
    }

    /// Generic 5000 amu, 200 Å³ test particle used by the optical simulations.
    pub fn generic_5000() -> Self {
        Molecule::from_lab_units("generic-5000amu", 5000.0, 200.0, SIGMA_ABS_1064, SIGMA_ION)
            .expect("constant molecule")
    }
}

/// Built-in molecule catalogue.
pub fn catalogue() -> Vec<Molecule> {
    let mut out: Vec<Molecule> = (1..=9)
        .map(|n| Molecule::perfluoro_c60(n).expect("catalogue range"))
        .collect();
    out.push(Molecule::generic_5000());
    out
}

pub fn lookup(name: &str) -> Option<Molecule> {
    catalogue().into_iter().find(|m| m.name == name)
}
