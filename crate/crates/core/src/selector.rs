//! Helical velocity selector: rotor-frequency calibration and band-pass
//! transmission.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PassbandShape {
    #[default]
    Triangle,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectorParams {
    /// Transmitted speed per rotor frequency, (m/s)/Hz.
    pub calibration: f64,
    /// Relative full width at half maximum of the pass band.
    pub fwhm_rel: f64,
    /// Hz
    pub rotor_freq: f64,
    /// Relative rotor-frequency jitter (standard deviation).
    pub freq_stability: f64,
    pub shape: PassbandShape,
    /// Blur the setpoint per molecule by `freq_stability`.
    pub jitter: bool,
}

impl Default for SelectorParams {
    fn default() -> Self {
        SelectorParams {
            calibration: 1.08,
            fwhm_rel: 0.05,
            rotor_freq: 47.2,
            freq_stability: 1e-3,
            shape: PassbandShape::Triangle,
            jitter: false,
        }
    }
}

impl SelectorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.calibration > 0.0) {
            return Err(Error::domain("selector calibration must be positive"));
        }
        if !(self.fwhm_rel > 0.0 && self.fwhm_rel < 1.0) {
            return Err(Error::domain("selector fwhm_rel must lie in (0, 1)"));
        }
        if !(self.rotor_freq >= 0.0) {
            return Err(Error::domain("rotor frequency must be >= 0"));
        }
        if !(self.freq_stability >= 0.0) {
            return Err(Error::domain("frequency stability must be >= 0"));
        }
        Ok(())
    }
}

/// Mean transmitted speed, linear in the rotor frequency.
pub fn selector_setpoint(p: &SelectorParams) -> f64 {
    p.calibration * p.rotor_freq
}

fn passband(v: f64, center: f64, fwhm: f64, shape: PassbandShape) -> f64 {
    let d = (v - center).abs();
    match shape {
        PassbandShape::Triangle => (1.0 - d / fwhm).max(0.0),
        PassbandShape::Gaussian => (-4.0 * std::f64::consts::LN_2 * (d / fwhm).powi(2)).exp(),
    }
}

/// Transmission probability at speed `v`. Peak 1 at the setpoint; the
/// triangle reaches zero one FWHM away from it.
pub fn transmission(v: f64, p: &SelectorParams) -> Result<f64> {
    p.validate()?;
    if p.rotor_freq == 0.0 {
        return Err(Error::domain("no transmission defined at zero rotor frequency"));
    }
    if v < 0.0 {
        return Err(Error::domain("speed must be >= 0"));
    }
    let center = selector_setpoint(p);
    Ok(passband(v, center, p.fwhm_rel * center, p.shape))
}

/// Keep each sample with probability `transmission(v)`.
pub fn apply_selector(samples: &[f64], p: &SelectorParams, seed: u64) -> Result<Vec<f64>> {
    p.validate()?;
    if p.rotor_freq == 0.0 {
        return Err(Error::domain("no transmission defined at zero rotor frequency"));
    }
    let mut rng = rng::stream(seed, "selector", 0);
    let nominal = selector_setpoint(p);
    let jitter = Normal::new(0.0, p.freq_stability).map_err(|e| Error::domain(e.to_string()))?;
    let mut kept = Vec::new();
    for &v in samples {
        let center = if p.jitter {
            nominal * (1.0 + jitter.sample(&mut rng))
        } else {
            nominal
        };
        let t = passband(v.max(0.0), center, p.fwhm_rel * center, p.shape);
        if rng.random::<f64>() < t {
            kept.push(v);
        }
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::integrate;
    use crate::phys::amu_to_kg;
    use crate::source::{sample_velocities, FloatingMb, SourceParams};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn at(freq: f64) -> SelectorParams {
        SelectorParams {
            rotor_freq: freq,
            ..SelectorParams::default()
        }
    }

    #[test]
    fn setpoint_calibration() {
        assert_relative_eq!(selector_setpoint(&at(1.0)), 1.08, max_relative = 1e-15);
        assert_eq!(selector_setpoint(&at(0.0)), 0.0);
        assert_relative_eq!(selector_setpoint(&at(47.2)), 50.976, max_relative = 1e-12);
    }

    #[test]
    fn triangle_passband_values() {
        let p = at(47.2);
        let s = selector_setpoint(&p);
        assert_eq!(transmission(s, &p).unwrap(), 1.0);
        assert_relative_eq!(transmission(s * 1.025, &p).unwrap(), 0.5, max_relative = 1e-9);
        assert_relative_eq!(transmission(s * 0.975, &p).unwrap(), 0.5, max_relative = 1e-9);
        assert_eq!(transmission(s * 1.10, &p).unwrap(), 0.0);
        assert!(transmission(10.0, &at(0.0)).is_err());
    }

    #[test]
    fn gaussian_passband_has_same_fwhm() {
        let p = SelectorParams {
            shape: PassbandShape::Gaussian,
            ..at(20.0)
        };
        let s = selector_setpoint(&p);
        assert_relative_eq!(transmission(s * 1.025, &p).unwrap(), 0.5, max_relative = 1e-12);
        assert_eq!(transmission(s, &p).unwrap(), 1.0);
    }

    #[test]
    fn invalid_params_rejected() {
        let p = SelectorParams {
            fwhm_rel: 1.5,
            ..at(1.0)
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn monochromatic_input_at_setpoint_is_kept() {
        let p = at(30.0);
        let s = selector_setpoint(&p);
        let out = apply_selector(&vec![s; 1000], &p, 1).unwrap();
        assert_eq!(out.len(), 1000);
    }

    #[test]
    fn uniform_window_keeps_a_quarter() {
        let p = at(40.0);
        let s = selector_setpoint(&p);
        let n = 200_000;
        let input: Vec<f64> = (0..n).map(|i| s * (0.9 + 0.2 * (i as f64 + 0.5) / n as f64)).collect();
        let kept = apply_selector(&input, &p, 5).unwrap().len() as f64 / n as f64;
        let se = (0.25 * 0.75 / n as f64).sqrt();
        assert!((kept - 0.25).abs() < 4.0 * se, "kept {kept}");
    }

    #[test]
    fn slow_tail_is_measurable() {
        let src = SourceParams::new(302.0, 51.0, amu_to_kg(5053.0)).unwrap();
        let samples = sample_velocities(100_000, src, 9).unwrap();
        let p = at(11.0 / 1.08);
        let out = apply_selector(&samples, &p, 9).unwrap();
        assert!(!out.is_empty());
    }

    #[test]
    fn kept_fraction_matches_quadrature() {
        let src = SourceParams::new(302.0, 51.0, amu_to_kg(5053.0)).unwrap();
        let dist = FloatingMb::new(src).unwrap();
        let p = at(50.0);
        let s = selector_setpoint(&p);
        let expected = integrate(
            |v| dist.pdf(v) * (1.0 - (v - s).abs() / (0.05 * s)).max(0.0),
            0.0,
            dist.support_max(),
            1e-10,
            0.0,
        );
        let n = 400_000;
        let samples = sample_velocities(n, src, 21).unwrap();
        let kept = apply_selector(&samples, &p, 22).unwrap().len() as f64 / n as f64;
        let se = (expected * (1.0 - expected) / n as f64).sqrt();
        assert!((kept - expected).abs() < 4.0 * se, "kept {kept} expected {expected}");
    }

    #[test]
    fn jitter_is_deterministic() {
        let p = SelectorParams {
            jitter: true,
            ..at(30.0)
        };
        let input: Vec<f64> = (0..5000).map(|i| 30.0 + i as f64 * 1e-3).collect();
        assert_eq!(apply_selector(&input, &p, 3).unwrap(), apply_selector(&input, &p, 3).unwrap());
    }

    proptest! {
        #[test]
        fn transmission_symmetric_with_exact_fwhm(freq in 0.5f64..200.0, rel in 0.01f64..0.5, x in 0.0f64..1.0) {
            let p = SelectorParams { fwhm_rel: rel, ..at(freq) };
            let s = selector_setpoint(&p);
            let d = x * rel * s;
            let up = transmission(s + d, &p).unwrap();
            let down = transmission(s - d, &p).unwrap();
            prop_assert!((up - down).abs() < 1e-12);
            let half = transmission(s + 0.5 * rel * s, &p).unwrap();
            prop_assert!((half - 0.5).abs() < 1e-9);
        }

        #[test]
        fn setpoint_is_linear(freq in 0.0f64..500.0, a in 0.0f64..10.0) {
            let scaled = selector_setpoint(&at(a * freq));
            prop_assert!((scaled - a * selector_setpoint(&at(freq))).abs() <= 1e-12 * scaled.abs().max(1.0));
        }

        #[test]
        fn selector_never_adds(seed in 0u64..1000) {
            let input: Vec<f64> = (0..500).map(|i| i as f64 * 0.2).collect();
            let out = apply_selector(&input, &at(40.0), seed).unwrap();
            prop_assert!(out.len() <= input.len());
        }
    }
}
