//! Sublimation enthalpy from temperature ramps: Arrhenius rate model,
//! synthetic ramp generation and the ln(rate) vs 1/T fit.

use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phys::consts::R;
use crate::rng;
use crate::table::SeriesTable;

/// Experimental decomposition temperature of the perfluoroalkylated spheres, K.
pub const DECOMPOSITION_TEMPERATURE: f64 = 650.0;
pub const RAMP_HEADER: [&str; 3] = ["t_s", "T_K", "rate_cps"];
pub const RESULT_HEADER: &str = "molecule,mass_amu,dH_kJmol,err_kJmol";

/// Published sublimation enthalpies: (side chains, mass amu, ΔH kJ/mol, error kJ/mol).
pub const REFERENCE_ENTHALPIES: [(u32, f64, f64, f64); 5] = [
    (9, 6291.0, 217.0, 15.0),
    (8, 5672.0, 227.0, 13.0),
    (7, 5053.0, 222.0, 8.0),
    (6, 4434.0, 251.0, 16.0),
    (5, 3815.0, 220.0, 11.0),
];

/// `prefactor · exp(-ΔH / R T)`, with ΔH in J/mol.
pub fn arrhenius_rate(temperature: f64, delta_h: f64, prefactor: f64) -> Result<f64> {
    if !(temperature > 0.0) {
        return Err(Error::domain("temperature must be positive"));
    }
    Ok(prefactor * (-delta_h / (R * temperature)).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RampSeries {
    pub time: Vec<f64>,
    pub temperature: Vec<f64>,
    pub count_rate: Vec<f64>,
}

impl RampSeries {
    pub fn new(time: Vec<f64>, temperature: Vec<f64>, count_rate: Vec<f64>) -> Result<Self> {
        if time.len() != temperature.len() || time.len() != count_rate.len() {
            return Err(Error::domain("ramp columns must have equal length"));
        }
        if time.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("ramp time must be strictly increasing"));
        }
        if temperature
            .iter()
            .any(|t| !(*t > 0.0 && *t <= DECOMPOSITION_TEMPERATURE))
        {
            return Err(Error::domain(format!(
                "ramp temperatures must lie in (0, {DECOMPOSITION_TEMPERATURE}] K"
            )));
        }
        Ok(RampSeries {
            time,
            temperature,
            count_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn to_table(&self) -> SeriesTable {
        let mut t = SeriesTable::new("ramp", &RAMP_HEADER);
        for i in 0..self.len() {
            t.push_row(&[self.time[i], self.temperature[i], self.count_rate[i]])
                .expect("finite ramp");
        }
        t
    }

    pub fn from_table(table: &SeriesTable) -> Result<Self> {
        table.expect_header(&RAMP_HEADER)?;
        RampSeries::new(
            table.column("t_s").unwrap_or_default(),
            table.column("T_K").unwrap_or_default(),
            table.column("rate_cps").unwrap_or_default(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoiseModel {
    /// `rate · (1 + noise_rel · N(0, 1))`
    #[default]
    Gaussian,
    /// Poisson counts in each sampling interval; `noise_rel` is unused.
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampSpec {
    /// K
    pub t0: f64,
    /// K/s
    pub heating_rate: f64,
    /// s
    pub duration: f64,
    /// s between samples
    pub sample_interval: f64,
    /// J/mol
    pub delta_h: f64,
    /// 1/s
    pub prefactor: f64,
    pub noise_rel: f64,
    pub noise: NoiseModel,
}

impl RampSpec {
    /// 540 → 563 K at 0.7 K/min.
    pub fn table_window(delta_h: f64, prefactor: f64, noise_rel: f64) -> Self {
        let heating_rate = 0.7 / 60.0;
        RampSpec {
            t0: 540.0,
            heating_rate,
            duration: (563.0 - 540.0) / heating_rate,
            sample_interval: 10.0,
            delta_h,
            prefactor,
            noise_rel,
            noise: NoiseModel::Gaussian,
        }
    }

    pub fn final_temperature(&self) -> f64 {
        self.t0 + self.heating_rate * self.duration
    }
}

/// Linear temperature ramp sampled on an even grid that includes both ends.
pub fn synthesize_ramp(spec: &RampSpec, seed: u64) -> Result<RampSeries> {
    if !(spec.t0 > 0.0) || !(spec.duration > 0.0) || !(spec.sample_interval > 0.0) {
        return Err(Error::domain("ramp start temperature, duration and interval must be positive"));
    }
    if !(spec.noise_rel >= 0.0) {
        return Err(Error::domain("noise_rel must be >= 0"));
    }
    let t_end = spec.final_temperature();
    if t_end > DECOMPOSITION_TEMPERATURE || spec.t0 > DECOMPOSITION_TEMPERATURE {
        return Err(Error::domain(format!(
            "ramp to {t_end:.1} K exceeds decomposition temperature {DECOMPOSITION_TEMPERATURE} K"
        )));
    }
    let steps = (spec.duration / spec.sample_interval).ceil().max(1.0) as usize;
    let mut rng = rng::stream(seed, "sublimation", 0);
    let gauss = Normal::new(0.0, 1.0).expect("unit normal");
    let mut time = Vec::with_capacity(steps + 1);
    let mut temperature = Vec::with_capacity(steps + 1);
    let mut rate = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let t = spec.duration * i as f64 / steps as f64;
        let temp = spec.t0 + spec.heating_rate * t;
        let clean = arrhenius_rate(temp, spec.delta_h, spec.prefactor)?;
        let noisy = match spec.noise {
            NoiseModel::Gaussian if spec.noise_rel == 0.0 => clean,
            NoiseModel::Gaussian => clean * (1.0 + spec.noise_rel * gauss.sample(&mut rng)),
            NoiseModel::Poisson => {
                let dwell = spec.duration / steps as f64;
                let mean = clean * dwell;
                if mean > 0.0 {
                    let counts: f64 = Poisson::new(mean)
                        .map_err(|e| Error::domain(e.to_string()))?
                        .sample(&mut rng);
                    counts / dwell
                } else {
                    0.0
                }
            }
        };
        time.push(t);
        temperature.push(temp);
        rate.push(noisy);
    }
    RampSeries::new(time, temperature, rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnthalpyResult {
    /// kJ/mol
    pub delta_h: f64,
    /// kJ/mol
    pub stderr: f64,
    /// ln of the fitted prefactor, ln(1/s).
    pub prefactor_ln: f64,
    pub temperature_window: [f64; 2],
    pub points: usize,
}

/// Ordinary least squares of ln(rate) against 1/T. Points with a
/// nonpositive rate are dropped; at least ten must remain.
pub fn fit_enthalpy(series: &RampSeries) -> Result<EnthalpyResult> {
    let points: Vec<(f64, f64)> = series
        .temperature
        .iter()
        .zip(&series.count_rate)
        .filter(|(_, r)| **r > 0.0 && r.is_finite())
        .map(|(t, r)| (1.0 / t, r.ln()))
        .collect();
    let n = points.len();
    if n < 10 {
        return Err(Error::Fit {
            message: format!("Arrhenius fit needs at least 10 positive points, got {n}"),
            residual: f64::NAN,
        });
    }
    let nf = n as f64;
    let xm = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let ym = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - xm).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Fit {
            message: "all points share one temperature".into(),
            residual: f64::NAN,
        });
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ssr: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let slope_err = (ssr / (nf - 2.0) / sxx).sqrt();
    let (tmin, tmax) = series
        .temperature
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| (lo.min(*t), hi.max(*t)));
    Ok(EnthalpyResult {
        delta_h: -slope * R * 1e-3,
        stderr: slope_err * R * 1e-3,
        prefactor_ln: intercept,
        temperature_window: [tmin, tmax],
        points: n,
    })
}

/// One line of the enthalpy result CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnthalpyRow {
    pub molecule: String,
    pub mass_amu: f64,
    pub dh_kjmol: f64,
    pub err_kjmol: f64,
}

pub fn result_csv(rows: &[EnthalpyRow]) -> String {
    let mut out = format!("{RESULT_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:e},{:e},{:e}\n",
            r.molecule, r.mass_amu, r.dh_kjmol, r.err_kjmol
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn arrhenius_ratio_across_window() {
        let hi = arrhenius_rate(563.0, 222e3, 1.0).unwrap();
        let lo = arrhenius_rate(540.0, 222e3, 1.0).unwrap();
        // exp(ΔH/R (1/540 - 1/563)) evaluated by hand: 7.539
        assert_relative_eq!(hi / lo, 7.539, max_relative = 1e-3);
        assert_eq!(arrhenius_rate(300.0, 0.0, 42.0).unwrap(), 42.0);
        let slope = -222e3 / R;
        assert_relative_eq!(slope, -26.70e3, max_relative = 1e-3);
        assert!(arrhenius_rate(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn noise_free_ramp() {
        let spec = RampSpec::table_window(222e3, 1e25, 0.0);
        let ramp = synthesize_ramp(&spec, 1).unwrap();
        assert_relative_eq!(*ramp.temperature.last().unwrap(), 563.0, max_relative = 1e-12);
        let ratio = ramp.count_rate.last().unwrap() / ramp.count_rate[0];
        assert_relative_eq!(ratio, 7.539, max_relative = 1e-3);
        let fit = fit_enthalpy(&ramp).unwrap();
        assert_relative_eq!(fit.delta_h, 222.0, max_relative = 1e-3);
        assert_eq!(fit.temperature_window, [540.0, 563.0]);
    }

    #[test]
    fn zero_enthalpy_gives_flat_ramp() {
        let spec = RampSpec::table_window(0.0, 1234.0, 0.0);
        let ramp = synthesize_ramp(&spec, 1).unwrap();
        assert!(ramp.count_rate.iter().all(|r| *r == 1234.0));
    }

    #[test]
    fn ramp_past_decomposition_is_refused() {
        let spec = RampSpec {
            duration: (700.0 - 540.0) / (0.7 / 60.0),
            ..RampSpec::table_window(222e3, 1.0, 0.0)
        };
        let err = synthesize_ramp(&spec, 1).unwrap_err().to_string();
        assert!(err.contains("exceeds decomposition temperature 650 K"), "{err}");
    }

    #[test]
    fn too_few_points_is_a_fit_error() {
        let ramp = RampSeries::new(
            (0..12).map(f64::from).collect(),
            (0..12).map(|i| 540.0 + f64::from(i)).collect(),
            (0..12).map(|i| if i < 3 { 1.0 } else { -1.0 }).collect(),
        )
        .unwrap();
        assert!(matches!(fit_enthalpy(&ramp), Err(Error::Fit { .. })));
    }

    #[test]
    fn nonpositive_points_are_excluded() {
        let spec = RampSpec::table_window(222e3, 1e25, 0.0);
        let mut ramp = synthesize_ramp(&spec, 1).unwrap();
        ramp.count_rate[5] = 0.0;
        ramp.count_rate[9] = -3.0;
        let fit = fit_enthalpy(&ramp).unwrap();
        assert_eq!(fit.points, ramp.len() - 2);
        assert_relative_eq!(fit.delta_h, 222.0, max_relative = 1e-9);
    }

    #[test]
    fn noisy_recovery_for_n7() {
        let mut sum = 0.0;
        for seed in 0..100 {
            let ramp = synthesize_ramp(&RampSpec::table_window(222e3, 1e25, 0.02), seed).unwrap();
            sum += fit_enthalpy(&ramp).unwrap().delta_h;
        }
        assert!((sum / 100.0 - 222.0).abs() < 8.0);
    }

    #[test]
    fn poisson_noise_is_unbiased() {
        let spec = RampSpec {
            noise: NoiseModel::Poisson,
            ..RampSpec::table_window(222e3, 1e25, 0.0)
        };
        let ramp = synthesize_ramp(&spec, 4).unwrap();
        let fit = fit_enthalpy(&ramp).unwrap();
        assert!((fit.delta_h - 222.0).abs() < 5.0 * fit.stderr.max(0.01), "{fit:?}");
    }

    #[test]
    fn stderr_scales_with_point_count() {
        let mean_err = |interval: f64| {
            (0..40)
                .map(|seed| {
                    let spec = RampSpec {
                        sample_interval: interval,
                        ..RampSpec::table_window(222e3, 1e25, 0.02)
                    };
                    fit_enthalpy(&synthesize_ramp(&spec, seed).unwrap()).unwrap().stderr
                })
                .sum::<f64>()
                / 40.0
        };
        let n1 = synthesize_ramp(&RampSpec::table_window(222e3, 1.0, 0.0), 0).unwrap().len() as f64;
        let spec4 = RampSpec {
            sample_interval: 2.5,
            ..RampSpec::table_window(222e3, 1.0, 0.0)
        };
        let n4 = synthesize_ramp(&spec4, 0).unwrap().len() as f64;
        let ratio = mean_err(10.0) / mean_err(2.5);
        let expected = (n4 / n1).sqrt();
        assert!((ratio / expected - 1.0).abs() < 0.2, "ratio {ratio} expected {expected}");
    }

    #[test]
    fn result_csv_layout() {
        let csv = result_csv(&[EnthalpyRow {
            molecule: "perfluoroC60-n7".into(),
            mass_amu: 5053.0,
            dh_kjmol: 222.0,
            err_kjmol: 8.0,
        }]);
        assert_eq!(csv, "molecule,mass_amu,dH_kJmol,err_kJmol\nperfluoroC60-n7,5.053e3,2.22e2,8e0\n");
    }

    proptest! {
        #[test]
        fn fit_is_exact_without_noise(dh in 50e3f64..400e3, ln_pref in 10.0f64..80.0) {
            let ramp = synthesize_ramp(&RampSpec::table_window(dh, ln_pref.exp(), 0.0), 0).unwrap();
            let fit = fit_enthalpy(&ramp).unwrap();
            prop_assert!((fit.delta_h * 1e3 / dh - 1.0).abs() < 1e-9);
            prop_assert!((fit.prefactor_ln - ln_pref).abs() < 1e-6);
        }

        #[test]
        fn scaling_counts_only_moves_prefactor(seed in 0u64..50, scale in 1e-3f64..1e3) {
            let ramp = synthesize_ramp(&RampSpec::table_window(222e3, 1e25, 0.02), seed).unwrap();
            let scaled = RampSeries::new(
                ramp.time.clone(),
                ramp.temperature.clone(),
                ramp.count_rate.iter().map(|r| r * scale).collect(),
            ).unwrap();
            let a = fit_enthalpy(&ramp).unwrap();
            let b = fit_enthalpy(&scaled).unwrap();
            prop_assert!((a.delta_h / b.delta_h - 1.0).abs() < 1e-9);
            prop_assert!((b.prefactor_ln - a.prefactor_ln - scale.ln()).abs() < 1e-6);
        }
    }
}
