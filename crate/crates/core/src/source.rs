//! Thermal-source statistics: the floating Maxwell-Boltzmann speed density,
//! Monte-Carlo sampling, histogram fitting and flux bookkeeping.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{gauss_legendre5, integrate, invert, solve_linear};
use crate::phys::consts::K_B;
use crate::rng;
use crate::table::SeriesTable;

pub const HISTOGRAM_HEADER: [&str; 2] = ["v_mps", "count"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SourceParams {
    /// Ensemble temperature, K.
    pub temperature: f64,
    /// Drift (shift) velocity, m/s.
    pub drift: f64,
    /// Particle mass, kg.
    pub mass: f64,
}

impl SourceParams {
    pub fn new(temperature: f64, drift: f64, mass: f64) -> Result<Self> {
        let p = SourceParams {
            temperature,
            drift,
            mass,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) {
            return Err(Error::domain("temperature must be positive"));
        }
        if !(self.drift >= 0.0) {
            return Err(Error::domain("drift velocity must be >= 0"));
        }
        if !(self.mass > 0.0) {
            return Err(Error::domain("mass must be positive"));
        }
        Ok(())
    }

    /// Thermal velocity scale √(k_B T / m).
    pub fn sigma(&self) -> f64 {
        (K_B * self.temperature / self.mass).sqrt()
    }
}

/// `v² exp(-m (v - v_d)² / 2 k_B T)` without normalization.
fn shape(v: f64, drift: f64, sigma2: f64) -> f64 {
    let d = v - drift;
    v * v * (-d * d / (2.0 * sigma2)).exp()
}

/// Normalized floating Maxwell-Boltzmann speed density on `[0, ∞)`.
#[derive(Debug, Clone, Copy)]
pub struct FloatingMb {
    params: SourceParams,
    sigma2: f64,
    norm: f64,
}

impl FloatingMb {
    pub fn new(params: SourceParams) -> Result<Self> {
        params.validate()?;
        let sigma2 = params.sigma().powi(2);
        let upper = params.drift + 12.0 * sigma2.sqrt();
        let z = integrate(|v| shape(v, params.drift, sigma2), 0.0, upper, 1e-13, 0.0);
        Ok(FloatingMb {
            params,
            sigma2,
            norm: 1.0 / z,
        })
    }

    pub fn params(&self) -> SourceParams {
        self.params
    }

    pub fn pdf(&self, v: f64) -> f64 {
        if v < 0.0 {
            return 0.0;
        }
        self.norm * shape(v, self.params.drift, self.sigma2)
    }

    /// Upper end of the numerically relevant support.
    pub fn support_max(&self) -> f64 {
        self.params.drift + 12.0 * self.sigma2.sqrt()
    }

    pub fn cdf(&self, v: f64) -> f64 {
        if v <= 0.0 {
            return 0.0;
        }
        let v = v.min(self.support_max());
        integrate(|x| self.pdf(x), 0.0, v, 1e-12, 1e-15).min(1.0)
    }

    pub fn mean(&self) -> f64 {
        integrate(|v| v * self.pdf(v), 0.0, self.support_max(), 1e-12, 0.0)
    }

    /// Closed-form mode: root of `2/v = (v - v_d)/σ²`.
    pub fn mode(&self) -> f64 {
        let d = self.params.drift;
        0.5 * (d + (d * d + 8.0 * self.sigma2).sqrt())
    }
}

/// Shorthand for `FloatingMb::new(params)?.pdf(v)`.
pub fn floating_mb_pdf(v: f64, params: SourceParams) -> Result<f64> {
    if v < 0.0 {
        return Err(Error::domain("speed must be >= 0"));
    }
    Ok(FloatingMb::new(params)?.pdf(v))
}

/// Rejection sampling from the floating Maxwell-Boltzmann density with a flat
/// envelope over `[0, v_d + 8σ]`.
pub fn sample_velocities(n: usize, params: SourceParams, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::domain("sample count must be >= 1"));
    }
    let dist = FloatingMb::new(params)?;
    let vmax = params.drift + 8.0 * params.sigma();
    let fmax = dist.pdf(dist.mode()) * (1.0 + 1e-9);
    let mut rng = rng::stream(seed, "source", 0);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let v = rng.random::<f64>() * vmax;
        if rng.random::<f64>() * fmax < dist.pdf(v) {
            out.push(v);
        }
    }
    Ok(out)
}

/// √(2 k_B T / m): most probable speed of an effusive (zero-drift) beam.
pub fn effusive_most_probable_speed(mass: f64, temperature: f64) -> Result<f64> {
    if !(mass > 0.0) || !(temperature > 0.0) {
        return Err(Error::domain("mass and temperature must be positive"));
    }
    Ok((2.0 * K_B * temperature / mass).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityHistogram {
    bin_edges: Vec<f64>,
    counts: Vec<f64>,
}

impl VelocityHistogram {
    pub fn new(bin_edges: Vec<f64>, counts: Vec<f64>) -> Result<Self> {
        if bin_edges.len() < 2 || counts.len() + 1 != bin_edges.len() {
            return Err(Error::domain("histogram needs len(counts) = len(edges) - 1 >= 1"));
        }
        if bin_edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("bin edges must be strictly increasing"));
        }
        if counts.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
            return Err(Error::domain("counts must be finite and >= 0"));
        }
        Ok(VelocityHistogram { bin_edges, counts })
    }

    pub fn uniform_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
        let w = (hi - lo) / bins as f64;
        (0..=bins).map(|i| lo + w * i as f64).collect()
    }

    /// Bin `samples`; values outside the edges are dropped.
    pub fn from_samples(samples: &[f64], bin_edges: Vec<f64>) -> Result<Self> {
        let mut counts = vec![0.0; bin_edges.len().saturating_sub(1)];
        let lo = bin_edges[0];
        let hi = *bin_edges.last().unwrap_or(&lo);
        for &v in samples {
            if v < lo || v >= hi {
                continue;
            }
            let idx = bin_edges.partition_point(|e| *e <= v) - 1;
            counts[idx] += 1.0;
        }
        VelocityHistogram::new(bin_edges, counts)
    }

    pub fn edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn to_table(&self, name: &str) -> SeriesTable {
        let mut t = SeriesTable::new(name, &HISTOGRAM_HEADER);
        for (c, n) in self.centers().iter().zip(&self.counts) {
            t.push_row(&[*c, *n]).expect("finite histogram");
        }
        t
    }

    /// Rebuild from a `v_mps,count` table of bin centers. Edges are placed at
    /// midpoints between centers, the outer edges mirrored.
    pub fn from_table(table: &SeriesTable) -> Result<Self> {
        table.expect_header(&HISTOGRAM_HEADER)?;
        let centers = table.column("v_mps").unwrap_or_default();
        let counts = table.column("count").unwrap_or_default();
        if centers.len() < 2 {
            return Err(Error::domain("histogram table needs at least two rows"));
        }
        let mut edges = Vec::with_capacity(centers.len() + 1);
        edges.push(centers[0] - 0.5 * (centers[1] - centers[0]));
        for w in centers.windows(2) {
            edges.push(0.5 * (w[0] + w[1]));
        }
        let n = centers.len();
        edges.push(centers[n - 1] + 0.5 * (centers[n - 1] - centers[n - 2]));
        VelocityHistogram::new(edges, counts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MbFit {
    pub drift: f64,
    pub temperature: f64,
    /// Counts per (m/s)³; the model is `amplitude · v² · exp(...)` per unit speed.
    pub amplitude: f64,
    pub drift_err: f64,
    pub temperature_err: f64,
    pub amplitude_err: f64,
    /// Mode of the fitted density, m/s.
    pub mode: f64,
    pub chi2_reduced: f64,
    pub iterations: usize,
}

struct MbModel<'a> {
    hist: &'a VelocityHistogram,
    mass: f64,
    weights: Vec<f64>,
}

impl MbModel<'_> {
    /// Bin-integrated model and its Jacobian w.r.t. (ln A, v_d, T).
    fn evaluate(&self, p: [f64; 3]) -> (Vec<f64>, Vec<[f64; 3]>) {
        let [ln_a, drift, temp] = p;
        let amp = ln_a.exp();
        let s2 = K_B * temp / self.mass;
        let mut model = Vec::with_capacity(self.hist.counts.len());
        let mut jac = Vec::with_capacity(self.hist.counts.len());
        for w in self.hist.bin_edges.windows(2) {
            let (a, b) = (w[0].max(0.0), w[1].max(0.0));
            let base = gauss_legendre5(|v| shape(v, drift, s2), a, b);
            let d_drift = gauss_legendre5(|v| shape(v, drift, s2) * (v - drift) / s2, a, b);
            let d_temp =
                gauss_legendre5(|v| shape(v, drift, s2) * (v - drift).powi(2) / (2.0 * s2 * temp), a, b);
            model.push(amp * base);
            jac.push([amp * base, amp * d_drift, amp * d_temp]);
        }
        (model, jac)
    }

    fn chi2(&self, model: &[f64]) -> f64 {
        self.hist
            .counts
            .iter()
            .zip(model)
            .zip(&self.weights)
            .map(|((c, m), w)| w * (c - m).powi(2))
            .sum()
    }
}

/// Weighted nonlinear least squares (Levenberg-Marquardt) of a floating
/// Maxwell-Boltzmann shape to a speed histogram. Weights are Poisson,
/// `1/max(count, 1)`; the model is integrated over each bin.
pub fn fit_floating_mb(hist: &VelocityHistogram, mass: f64) -> Result<MbFit> {
    if !(mass > 0.0) {
        return Err(Error::domain("mass must be positive"));
    }
    let nonempty = hist.counts.iter().filter(|c| **c > 0.0).count();
    if nonempty < 5 {
        return Err(Error::domain(format!(
            "fit needs at least 5 nonempty bins, histogram has {nonempty}"
        )));
    }
    let model = MbModel {
        hist,
        mass,
        weights: hist.counts.iter().map(|c| 1.0 / c.max(1.0)).collect(),
    };

    let mut p = initial_guess(hist, mass);
    let (mut m, mut jac) = model.evaluate(p);
    let mut chi2 = model.chi2(&m);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..500 {
        iterations = it + 1;
        let (jtj, jtr) = normal_equations(&model, &m, &jac);
        let mut improved = false;
        for _ in 0..40 {
            let mut a = jtj;
            for k in 0..3 {
                a[k][k] += lambda * jtj[k][k].max(1e-300);
            }
            let Some(step) = solve_linear(a, jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2]];
            if !(trial[2] > 0.0) || trial.iter().any(|x| !x.is_finite()) {
                lambda *= 10.0;
                continue;
            }
            let (tm, tj) = model.evaluate(trial);
            let tchi2 = model.chi2(&tm);
            if tchi2.is_finite() && tchi2 <= chi2 {
                let rel = (chi2 - tchi2) / chi2.max(1e-300);
                let small_step = step[1].abs() < 1e-10 * (1.0 + p[1].abs())
                    && step[2].abs() < 1e-10 * p[2]
                    && step[0].abs() < 1e-10;
                p = trial;
                m = tm;
                jac = tj;
                chi2 = tchi2;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if rel < 1e-14 || small_step {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // no downhill step at any damping: we are at the minimum to precision
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(Error::Fit {
            message: format!("floating Maxwell-Boltzmann fit after {iterations} iterations"),
            residual: chi2,
        });
    }

    let dof = (hist.counts.len() as f64 - 3.0).max(1.0);
    let chi2_reduced = chi2 / dof;
    let (jtj, _) = normal_equations(&model, &m, &jac);
    let cov = invert(jtj).ok_or_else(|| Error::Fit {
        message: "singular normal matrix at optimum".into(),
        residual: chi2,
    })?;
    let scale = chi2_reduced;
    let amp = p[0].exp();
    let s2 = K_B * p[2] / mass;
    Ok(MbFit {
        drift: p[1],
        temperature: p[2],
        amplitude: amp,
        amplitude_err: amp * (cov[0][0] * scale).sqrt(),
        drift_err: (cov[1][1] * scale).sqrt(),
        temperature_err: (cov[2][2] * scale).sqrt(),
        mode: 0.5 * (p[1] + (p[1] * p[1] + 8.0 * s2).sqrt()),
        chi2_reduced,
        iterations,
    })
}

fn normal_equations(model: &MbModel, m: &[f64], jac: &[[f64; 3]]) -> ([[f64; 3]; 3], [f64; 3]) {
    let mut jtj = [[0.0; 3]; 3];
    let mut jtr = [0.0; 3];
    for ((j, (c, mi)), w) in jac.iter().zip(model.hist.counts.iter().zip(m)).zip(&model.weights) {
        let r = c - mi;
        for a in 0..3 {
            jtr[a] += w * j[a] * r;
            for b in 0..3 {
                jtj[a][b] += w * j[a] * j[b];
            }
        }
    }
    (jtj, jtr)
}

fn initial_guess(hist: &VelocityHistogram, mass: f64) -> [f64; 3] {
    let centers = hist.centers();
    let total = hist.total();
    let mean: f64 = centers.iter().zip(&hist.counts).map(|(v, c)| v * c).sum::<f64>() / total;
    let var: f64 = centers
        .iter()
        .zip(&hist.counts)
        .map(|(v, c)| c * (v - mean).powi(2))
        .sum::<f64>()
        / total;
    let temp = (mass * var / K_B).max(1e-6);
    let s2 = K_B * temp / mass;
    // mode of the data from the fullest bin, converted to a drift
    let (imax, _) = hist
        .counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    let mode = centers[imax].max(1e-6);
    let drift = (mode - 2.0 * s2 / mode).max(0.0);
    // best amplitude for the fixed shape
    let (mut num, mut den) = (0.0, 0.0);
    for (w, c) in hist.bin_edges.windows(2).zip(&hist.counts) {
        let g = gauss_legendre5(|v| shape(v, drift, s2), w[0].max(0.0), w[1].max(0.0));
        let wt = 1.0 / c.max(1.0);
        num += wt * c * g;
        den += wt * g * g;
    }
    let amp = if den > 0.0 && num > 0.0 { num / den } else { 1.0 };
    [amp.ln(), drift, temp]
}

/// Detector-side bookkeeping for flux and density estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluxReport {
    /// Detected count rate, 1/s.
    pub count_rate: f64,
    pub detection_efficiency: f64,
    /// m²
    pub detector_area: f64,
    /// Source to detector, m.
    pub distance_detector: f64,
    /// m/s
    pub mean_speed: f64,
}

impl FluxReport {
    pub fn validate(&self) -> Result<()> {
        let all_positive = [
            self.count_rate,
            self.detection_efficiency,
            self.detector_area,
            self.distance_detector,
            self.mean_speed,
        ]
        .iter()
        .all(|x| *x > 0.0);
        if !all_positive || self.detection_efficiency > 1.0 {
            return Err(Error::domain(
                "flux report fields must be positive with detection efficiency <= 1",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluxDensity {
    /// Molecular flux at the detector, 1/(m² s).
    pub flux: f64,
    /// Number density at the query distance, 1/m³.
    pub number_density: f64,
}

/// Flux from the detected rate, then number density by inverse-square
/// scaling back to `distance_query` from the source.
pub fn beam_flux_density(report: &FluxReport, distance_query: f64) -> Result<FluxDensity> {
    report.validate()?;
    if !(distance_query > 0.0) {
        return Err(Error::domain("query distance must be positive"));
    }
    let flux = report.count_rate / (report.detection_efficiency * report.detector_area);
    let at_detector = flux / report.mean_speed;
    let number_density = at_detector * (report.distance_detector / distance_query).powi(2);
    Ok(FluxDensity {
        flux,
        number_density,
    })
}
