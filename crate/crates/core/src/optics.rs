//! Closed-form estimates for off-resonant optical manipulation: dipole well
//! depth, photon absorption, stopping power, pulsed slowing and capture.
//!
//! All functions take SI inputs. Polarizabilities are volumetric (m³) and
//! converted with 4πε₀, so the well depth of a beam of power `P` and waist
//! `w0` is `8 α_vol P / (c w0²)`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phys::consts::{C, EPS0};
use crate::phys::{photon_energy, polarizability_si};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianBeam {
    /// W
    pub power: f64,
    /// 1/e² intensity radius at the focus, m.
    pub waist: f64,
    /// m
    pub wavelength: f64,
    /// m
    pub focus: Vector3<f64>,
    /// Unit propagation direction.
    pub axis: Vector3<f64>,
    /// Overrides π w0² / λ when set.
    pub rayleigh_override: Option<f64>,
}

impl GaussianBeam {
    pub fn new(power: f64, waist: f64, wavelength: f64, axis: Vector3<f64>) -> Result<Self> {
        let beam = GaussianBeam {
            power,
            waist,
            wavelength,
            focus: Vector3::zeros(),
            axis: axis.normalize(),
            rayleigh_override: None,
        };
        beam.validate()?;
        Ok(beam)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.power >= 0.0) {
            return Err(Error::domain("beam power must be >= 0"));
        }
        if !(self.waist > 0.0) || !(self.wavelength > 0.0) {
            return Err(Error::domain("beam waist and wavelength must be positive"));
        }
        if ((self.axis.norm() - 1.0).abs()) > 1e-9 {
            return Err(Error::domain("beam axis must be a unit vector"));
        }
        if matches!(self.rayleigh_override, Some(z) if !(z > 0.0)) {
            return Err(Error::domain("Rayleigh length must be positive"));
        }
        Ok(())
    }

    pub fn rayleigh_length(&self) -> f64 {
        self.rayleigh_override
            .unwrap_or(std::f64::consts::PI * self.waist * self.waist / self.wavelength)
    }

    /// Peak intensity 2P / (π w0²).
    pub fn peak_intensity(&self) -> f64 {
        2.0 * self.power / (std::f64::consts::PI * self.waist * self.waist)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaserPulse {
    /// J
    pub energy: f64,
    /// s
    pub duration: f64,
    pub beam: GaussianBeam,
}

impl LaserPulse {
    pub fn peak_power(&self) -> f64 {
        self.energy / self.duration
    }
}

/// Depth of the dipole well `2 α_SI P / (ε₀ c π w0²)` in J.
pub fn dipole_potential_depth(alpha_vol: f64, power: f64, waist: f64) -> f64 {
    2.0 * polarizability_si(alpha_vol) * power / (EPS0 * C * std::f64::consts::PI * waist * waist)
}

/// Photons absorbed in time `tau` at the peak intensity of the beam.
pub fn photons_absorbed(power: f64, sigma_abs: f64, tau: f64, waist: f64, wavelength: f64) -> f64 {
    2.0 * power * sigma_abs * tau / (std::f64::consts::PI * waist * waist * photon_energy(wavelength))
}

/// Beam power whose well depth equals `e_kin`.
pub fn stopping_power(e_kin: f64, alpha_vol: f64, waist: f64) -> f64 {
    e_kin * EPS0 * C * std::f64::consts::PI * waist * waist / (2.0 * polarizability_si(alpha_vol))
}

/// Speed lost climbing a potential hill of height `u`: `v - √(v² - 2U/m)`,
/// or `v` when the hill stops the molecule.
pub fn pulsed_deceleration(v: f64, u: f64, mass: f64) -> Result<f64> {
    if !(mass > 0.0) || !(v > 0.0) || !(u >= 0.0) {
        return Err(Error::domain("pulsed deceleration needs m > 0, v > 0, U >= 0"));
    }
    let left = v * v - 2.0 * u / mass;
    Ok(if left <= 0.0 { v } else { v - left.sqrt() })
}

/// Largest transverse speed bound by a well of depth `u`.
pub fn transverse_capture_speed(u: f64, mass: f64) -> f64 {
    (2.0 * u / mass).sqrt()
}

/// Photons absorbed crossing the waist on a straight line through the axis at
/// speed `v`: `σ P √(2/π) / (hν w0 v)`.
pub fn transit_photon_dose(power: f64, waist: f64, v: f64, sigma_abs: f64, wavelength: f64) -> f64 {
    sigma_abs * power * (2.0 / std::f64::consts::PI).sqrt() / (photon_energy(wavelength) * waist * v)
}
