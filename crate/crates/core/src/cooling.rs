//! Collective cavity cooling: semiclassical transverse-pump self-organization
//! of polarizable particles in a single standing-wave cavity mode.
//!
//! State is the complex mode amplitude `a` (|a|² is the photon number) and
//! positions/velocities along the cavity axis. The field obeys
//!
//! ```text
//! da/dt = [i(Δc − U0 Σcos²(kx)) − κ] a + i η Σcos(kx)
//! ```
//!
//! and each particle feels `F = ħk [U0 |a|² sin(2kx) − η (a + a*) sin(kx)]`,
//! the gradient of the energy matching that field equation.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;
use crate::phys::consts::{C, EPS0, HBAR};
use crate::phys::polarizability_si;
use crate::rng;
use crate::source::VelocityHistogram;
use crate::table::SeriesTable;

pub const TRACE_HEADER: [&str; 4] = ["t_s", "KE_J", "photon_n", "theta"];

/// Late-time order parameter above which an ensemble counts as organized.
pub const ORGANIZED_THETA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityGeometry {
    /// m
    pub length: f64,
    /// m
    pub waist: f64,
    /// m
    pub wavelength: f64,
}

impl Default for CavityGeometry {
    fn default() -> Self {
        CavityGeometry {
            length: 1e-2,
            waist: 400e-6,
            wavelength: 1064e-9,
        }
    }
}

impl CavityGeometry {
    /// Standing-wave mode volume π w0² L / 4.
    pub fn mode_volume(&self) -> f64 {
        std::f64::consts::PI * self.waist * self.waist * self.length / 4.0
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.waist > 0.0 && self.wavelength > 0.0) {
            return Err(Error::domain("cavity length, waist and wavelength must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityPump {
    /// Field decay rate, rad/s.
    pub kappa: f64,
    /// Pump-cavity detuning Δc, rad/s.
    pub detuning: f64,
    /// 1/m
    pub wavenumber: f64,
    /// Dispersive shift per particle, rad/s.
    pub u0: f64,
    /// Effective pump rate per particle, rad/s.
    pub eta: f64,
    /// m
    pub waist: f64,
    /// Multiplies both couplings.
    pub rescale: f64,
}

impl Default for CavityPump {
    fn default() -> Self {
        let kappa = 2.0 * std::f64::consts::PI * 1e6;
        CavityPump {
            kappa,
            detuning: -kappa,
            wavenumber: CavityGeometry::default().wavenumber(),
            u0: 0.0,
            eta: 0.0,
            waist: 400e-6,
            rescale: 1.0,
        }
    }
}

impl CavityPump {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) {
            return Err(Error::domain("kappa must be positive"));
        }
        if !(self.wavenumber > 0.0) {
            return Err(Error::domain("wavenumber must be positive"));
        }
        if !(self.rescale > 0.0) {
            return Err(Error::domain("rescale must be positive"));
        }
        if !(self.detuning.is_finite() && self.u0.is_finite() && self.eta.is_finite() && self.waist > 0.0) {
            return Err(Error::domain("pump parameters must be finite with a positive waist"));
        }
        Ok(())
    }

    fn eff_u0(&self) -> f64 {
        self.u0 * self.rescale
    }

    fn eff_eta(&self) -> f64 {
        self.eta * self.rescale
    }
}

/// Pump rate at the reference threshold power. `eta = eta_threshold √(P/P_T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingCalibration {
    /// W
    pub threshold_power: f64,
    /// rad/s
    pub eta_threshold: f64,
}

impl CouplingCalibration {
    /// Mean-field threshold of a thermal ensemble with axial velocity spread
    /// `v_spread`: `N ħ η² |Δc| = m v_spread² (κ² + Δc²)`.
    pub fn mean_field(
        threshold_power: f64,
        n: usize,
        mass: f64,
        v_spread: f64,
        kappa: f64,
        detuning: f64,
    ) -> Result<Self> {
        if !(threshold_power > 0.0) || n == 0 || !(mass > 0.0) || !(v_spread > 0.0) {
            return Err(Error::domain("calibration needs positive power, particle count, mass and spread"));
        }
        if detuning >= 0.0 {
            return Err(Error::domain(
                "self-organization needs a red pump-cavity detuning (detuning < 0)",
            ));
        }
        let kt = mass * v_spread * v_spread;
        let eta2 = kt * (kappa * kappa + detuning * detuning) / (HBAR * n as f64 * detuning.abs());
        Ok(CouplingCalibration {
            threshold_power,
            eta_threshold: eta2.sqrt(),
        })
    }
}

/// Dispersive shift from the mode volume, `U0 = −α ω_c / (2 ε0 V_m)`, and the
/// calibrated pump rate at power `power`.
pub fn coupling_from_power(
    power: f64,
    geometry: &CavityGeometry,
    alpha_vol: f64,
    calibration: &CouplingCalibration,
) -> Result<(f64, f64)> {
    if !(power >= 0.0) {
        return Err(Error::domain("pump power must be >= 0"));
    }
    geometry.validate()?;
    let omega = 2.0 * std::f64::consts::PI * C / geometry.wavelength;
    let u0 = -polarizability_si(alpha_vol) * omega / (2.0 * EPS0 * geometry.mode_volume());
    let eta = calibration.eta_threshold * (power / calibration.threshold_power).sqrt();
    Ok((u0, eta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoolingEnsemble {
    /// kg
    pub mass: f64,
    /// Positions along the cavity axis, m.
    pub x: Vec<f64>,
    /// Velocities along the cavity axis, m/s.
    pub v: Vec<f64>,
    /// Beam transit speed across the mode, m/s.
    pub v_mean: f64,
    /// Axial velocity standard deviation, m/s.
    pub v_spread: f64,
    pub seed: u64,
}

impl CoolingEnsemble {
    /// Positions uniform over `span`, axial velocities normal with zero mean.
    pub fn thermal(n: usize, mass: f64, v_mean: f64, v_spread: f64, span: f64, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain("cooling ensemble needs n >= 2"));
        }
        if !(mass > 0.0 && v_mean > 0.0 && v_spread > 0.0 && span > 0.0) {
            return Err(Error::domain("mass, speeds and span must be positive"));
        }
        let normal = Normal::new(0.0, v_spread).map_err(|e| Error::domain(e.to_string()))?;
        let mut x = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        for i in 0..n {
            let mut r = rng::stream(seed, "cooling", i as u64);
            x.push(span * (r.random::<f64>() - 0.5));
            v.push(normal.sample(&mut r));
        }
        Ok(CoolingEnsemble {
            mass,
            x,
            v,
            v_mean,
            v_spread,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.len() < 2 || self.x.len() != self.v.len() {
            return Err(Error::domain("cooling ensemble needs n >= 2 with matching x and v"));
        }
        if !(self.mass > 0.0) {
            return Err(Error::domain("mass must be positive"));
        }
        Ok(())
    }

    /// Mean axial kinetic energy, J.
    pub fn mean_kinetic_energy(&self) -> f64 {
        0.5 * self.mass * compensated_sum(self.v.iter().map(|v| v * v)) / self.v.len() as f64
    }

    pub fn velocity_histogram(&self, edges: Vec<f64>) -> Result<VelocityHistogram> {
        VelocityHistogram::from_samples(&self.v, edges)
    }
}

fn sums(x: &[f64], k: f64) -> (f64, f64) {
    let s1 = compensated_sum(x.iter().map(|x| (k * x).cos()));
    let s2 = compensated_sum(x.iter().map(|x| (k * x).cos().powi(2)));
    (s1, s2)
}

fn linear_rate(p: &CavityPump, s2: f64) -> Complex64 {
    Complex64::new(-p.kappa, p.detuning - p.eff_u0() * s2)
}

/// Adiabatic field for fixed positions:
/// `a = i η Σcos(kx) / (κ − i(Δc − U0 Σcos²(kx)))`.
pub fn steady_state_field(x: &[f64], p: &CavityPump) -> Complex64 {
    let (s1, s2) = sums(x, p.wavenumber);
    steady_from_sums(p, s1, s2)
}

fn steady_from_sums(p: &CavityPump, s1: f64, s2: f64) -> Complex64 {
    -Complex64::new(0.0, p.eff_eta() * s1) / linear_rate(p, s2)
}

/// Bunching `|Σ cos(kx)| / n`.
pub fn order_parameter(x: &[f64], k: f64) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (compensated_sum(x.iter().map(|x| (k * x).cos())).abs() / x.len() as f64).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoolingTrace {
    pub time: Vec<f64>,
    pub mean_ke: Vec<f64>,
    pub photon_number: Vec<f64>,
    pub order_param: Vec<f64>,
}

impl CoolingTrace {
    fn push(&mut self, t: f64, ke: f64, n: f64, theta: f64) {
        self.time.push(t);
        self.mean_ke.push(ke);
        self.photon_number.push(n);
        self.order_param.push(theta);
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    /// Mean Θ over the last `fraction` of the samples.
    pub fn late_order(&self, fraction: f64) -> f64 {
        late_mean(&self.order_param, fraction)
    }

    pub fn late_ke(&self, fraction: f64) -> f64 {
        late_mean(&self.mean_ke, fraction)
    }

    pub fn to_table(&self, name: &str) -> Result<SeriesTable> {
        let mut t = SeriesTable::new(name, &TRACE_HEADER);
        for i in 0..self.len() {
            t.push_row(&[self.time[i], self.mean_ke[i], self.photon_number[i], self.order_param[i]])?;
        }
        Ok(t)
    }
}

fn late_mean(xs: &[f64], fraction: f64) -> f64 {
    let k = ((xs.len() as f64 * fraction.clamp(0.0, 1.0)).ceil() as usize).clamp(1, xs.len().max(1));
    let tail = &xs[xs.len().saturating_sub(k)..];
    tail.iter().sum::<f64>() / tail.len().max(1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    /// s
    pub t_end: f64,
    /// s
    pub dt: f64,
    /// Trace sample every this many steps.
    pub record_every: usize,
    /// Initial mode amplitude.
    pub field0: Complex64,
    /// Stop after one transit of the mode (2 w0 / v_mean).
    pub transit_cutoff: bool,
}

impl EvolveOptions {
    pub fn new(t_end: f64, dt: f64) -> Self {
        EvolveOptions {
            t_end,
            dt,
            record_every: 10,
            field0: Complex64::new(0.0, 0.0),
            transit_cutoff: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoolingRun {
    pub trace: CoolingTrace,
    pub initial: CoolingEnsemble,
    pub ensemble: CoolingEnsemble,
    pub field: Complex64,
}

/// Largest step accepted by [`evolve`]: a tenth of 1/κ and of the time to
/// cross one lattice period at the fastest initial speed.
pub fn max_stable_dt(e: &CoolingEnsemble, p: &CavityPump) -> f64 {
    let vmax = e.v.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let lattice = if vmax > 0.0 {
        0.1 * 2.0 * std::f64::consts::PI / (p.wavenumber * vmax)
    } else {
        f64::INFINITY
    };
    (0.1 / p.kappa).min(lattice)
}

/// Splitting integrator: the field is advanced over each half step by the
/// exact solution of its linear equation with positions held fixed; the
/// particles take a velocity-Verlet step in between with the field held.
pub fn evolve(e: &CoolingEnsemble, p: &CavityPump, opts: &EvolveOptions) -> Result<CoolingRun> {
    e.validate()?;
    p.validate()?;
    if !(opts.dt > 0.0) || !(opts.t_end > opts.dt) {
        return Err(Error::domain("evolve needs dt > 0 and t_end > dt"));
    }
    let limit = max_stable_dt(e, p);
    if opts.dt > limit {
        return Err(Error::domain(format!(
            "dt = {:e} s does not resolve 1/kappa and the lattice period; use dt <= {:e} s",
            opts.dt, limit
        )));
    }
    let t_end = if opts.transit_cutoff {
        opts.t_end.min(2.0 * p.waist / e.v_mean)
    } else {
        opts.t_end
    };
    let steps = (t_end / opts.dt).round().max(1.0) as usize;
    let dt = opts.dt;
    let k = p.wavenumber;
    let hk = HBAR * k / e.mass;
    let u0 = p.eff_u0();
    let eta = p.eff_eta();
    let stride = opts.record_every.max(1);

    let mut state = e.clone();
    let mut a = opts.field0;
    let mut acc = vec![0.0; state.len()];
    let mut trace = CoolingTrace {
        time: Vec::new(),
        mean_ke: Vec::new(),
        photon_number: Vec::new(),
        order_param: Vec::new(),
    };
    let n = state.len() as f64;

    let half_field = |a: Complex64, x: &[f64]| {
        let (s1, s2) = sums(x, k);
        let l = linear_rate(p, s2);
        let ss = steady_from_sums(p, s1, s2);
        (ss + (a - ss) * (l * (0.5 * dt)).exp(), s1)
    };
    let accel = |acc: &mut [f64], x: &[f64], a: Complex64| {
        let n2 = a.norm_sqr();
        let re2 = 2.0 * a.re;
        for (f, x) in acc.iter_mut().zip(x) {
            let (s, c) = (k * x).sin_cos();
            *f = hk * (u0 * n2 * 2.0 * s * c - eta * re2 * s);
        }
    };

    let (_, s1) = sums(&state.x, k);
    trace.push(0.0, state.mean_kinetic_energy(), a.norm_sqr(), (s1.abs() / n).min(1.0));
    for step in 1..=steps {
        let (a_half, _) = half_field(a, &state.x);
        a = a_half;
        accel(&mut acc, &state.x, a);
        for ((x, v), f) in state.x.iter_mut().zip(state.v.iter_mut()).zip(&acc) {
            *v += 0.5 * dt * f;
            *x += dt * *v;
        }
        accel(&mut acc, &state.x, a);
        for (v, f) in state.v.iter_mut().zip(&acc) {
            *v += 0.5 * dt * f;
        }
        let (a_full, s1) = half_field(a, &state.x);
        a = a_full;
        if !a.re.is_finite() || !a.im.is_finite() || state.v.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integration {
                step,
                message: format!("non-finite state at t = {:e} s", step as f64 * dt),
            });
        }
        if step % stride == 0 || step == steps {
            trace.push(step as f64 * dt, state.mean_kinetic_energy(), a.norm_sqr(), (s1.abs() / n).min(1.0));
        }
    }
    Ok(CoolingRun {
        trace,
        initial: e.clone(),
        ensemble: state,
        field: a,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanPoint {
    /// W
    pub power: f64,
    pub late_theta: f64,
    /// Late-time mean KE over the initial mean KE.
    pub ke_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdScan {
    pub points: Vec<ScanPoint>,
    /// Smallest scanned power whose late-time Θ exceeds [`ORGANIZED_THETA`].
    pub threshold: f64,
    /// Closed interval between the largest unorganized power below the
    /// threshold (or the threshold itself) and the threshold.
    pub bracket: (f64, f64),
}

/// Fraction of the trace averaged for late-time quantities.
pub const LATE_FRACTION: f64 = 0.2;

/// Evolve the ensemble at every power and locate the organization onset.
pub fn detect_threshold(
    powers: &[f64],
    e: &CoolingEnsemble,
    template: &CavityPump,
    geometry: &CavityGeometry,
    alpha_vol: f64,
    calibration: &CouplingCalibration,
    opts: &EvolveOptions,
) -> Result<ThresholdScan> {
    if powers.len() < 3 {
        return Err(Error::domain("threshold scan needs at least 3 powers"));
    }
    let mut sorted = powers.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut points = Vec::with_capacity(sorted.len());
    for &power in &sorted {
        let (u0, eta) = coupling_from_power(power, geometry, alpha_vol, calibration)?;
        let pump = CavityPump { u0, eta, ..*template };
        let run = evolve(e, &pump, opts)?;
        points.push(ScanPoint {
            power,
            late_theta: run.trace.late_order(LATE_FRACTION),
            ke_ratio: run.trace.late_ke(LATE_FRACTION) / run.trace.mean_ke[0],
        });
    }
    let Some(idx) = points.iter().position(|p| p.late_theta > ORGANIZED_THETA) else {
        return Err(Error::domain(format!(
            "threshold above scan range (max power {:e} W)",
            sorted.last().copied().unwrap_or(0.0)
        )));
    };
    let threshold = points[idx].power;
    let lower = if idx > 0 { points[idx - 1].power } else { threshold };
    Ok(ThresholdScan {
        points,
        threshold,
        bracket: (lower, threshold),
    })
}

/// Everything needed to run the cooling simulation at a list of powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoolingSetup {
    pub n: usize,
    /// amu
    pub mass_amu: f64,
    /// Å³
    pub alpha_a3: f64,
    pub v_mean: f64,
    pub v_spread: f64,
    /// Width of the initial position window, m.
    pub span: f64,
    pub kappa: f64,
    /// Δc in units of κ.
    pub detuning_kappa: f64,
    pub waist: f64,
    pub cavity_length: f64,
    pub wavelength: f64,
    pub rescale: f64,
    /// W
    pub threshold_power: f64,
    /// Overrides the mean-field calibration, rad/s at `threshold_power`.
    pub eta_threshold: Option<f64>,
    pub powers: Vec<f64>,
    pub t_end: f64,
    pub dt: f64,
    pub record_every: usize,
    pub transit_cutoff: bool,
    /// Bins of the velocity histograms, spanning ±4 v_spread.
    pub histogram_bins: usize,
}

impl Default for CoolingSetup {
    fn default() -> Self {
        CoolingSetup {
            n: 1000,
            mass_amu: 5000.0,
            alpha_a3: 200.0,
            v_mean: 10.0,
            v_spread: 1.5,
            span: 800e-6,
            kappa: 2.0 * std::f64::consts::PI * 1e6,
            detuning_kappa: -1.0,
            waist: 400e-6,
            cavity_length: 1e-2,
            wavelength: 1064e-9,
            rescale: 1.0,
            threshold_power: 1e3,
            eta_threshold: None,
            powers: vec![1e3 / 3.0, 1e3, 3e3],
            t_end: 80e-6,
            dt: 10e-9,
            record_every: 100,
            transit_cutoff: false,
            histogram_bins: 60,
        }
    }
}

impl CoolingSetup {
    pub fn mass(&self) -> f64 {
        crate::phys::amu_to_kg(self.mass_amu)
    }

    pub fn geometry(&self) -> CavityGeometry {
        CavityGeometry {
            length: self.cavity_length,
            waist: self.waist,
            wavelength: self.wavelength,
        }
    }

    pub fn template(&self) -> CavityPump {
        CavityPump {
            kappa: self.kappa,
            detuning: self.detuning_kappa * self.kappa,
            wavenumber: self.geometry().wavenumber(),
            u0: 0.0,
            eta: 0.0,
            waist: self.waist,
            rescale: self.rescale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::domain("cooling.n must be >= 2"));
        }
        if self.powers.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::domain("cooling powers must be >= 0"));
        }
        if self.histogram_bins == 0 {
            return Err(Error::domain("cooling.histogram_bins must be >= 1"));
        }
        self.geometry().validate()?;
        self.template().validate()
    }

    pub fn calibration(&self) -> Result<CouplingCalibration> {
        match self.eta_threshold {
            Some(eta) if eta >= 0.0 => Ok(CouplingCalibration {
                threshold_power: self.threshold_power,
                eta_threshold: eta,
            }),
            Some(_) => Err(Error::domain("eta_threshold must be >= 0")),
            None => CouplingCalibration::mean_field(
                self.threshold_power,
                self.n,
                self.mass(),
                self.v_spread,
                self.kappa,
                self.detuning_kappa * self.kappa,
            ),
        }
    }

    pub fn ensemble(&self, seed: u64) -> Result<CoolingEnsemble> {
        CoolingEnsemble::thermal(self.n, self.mass(), self.v_mean, self.v_spread, self.span, seed)
    }

    pub fn pump(&self, power: f64) -> Result<CavityPump> {
        let (u0, eta) = coupling_from_power(power, &self.geometry(), self.alpha_a3 * 1e-30, &self.calibration()?)?;
        Ok(CavityPump { u0, eta, ..self.template() })
    }

    pub fn options(&self) -> EvolveOptions {
        EvolveOptions {
            t_end: self.t_end,
            dt: self.dt,
            record_every: self.record_every,
            field0: Complex64::new(0.0, 0.0),
            transit_cutoff: self.transit_cutoff,
        }
    }

    pub fn run(&self, power: f64, seed: u64) -> Result<CoolingRun> {
        self.validate()?;
        evolve(&self.ensemble(seed)?, &self.pump(power)?, &self.options())
    }

    pub fn scan(&self, seed: u64) -> Result<ThresholdScan> {
        self.validate()?;
        detect_threshold(
            &self.powers,
            &self.ensemble(seed)?,
            &self.template(),
            &self.geometry(),
            self.alpha_a3 * 1e-30,
            &self.calibration()?,
            &self.options(),
        )
    }

    pub fn histogram_edges(&self) -> Vec<f64> {
        let w = 4.0 * self.v_spread;
        VelocityHistogram::uniform_edges(-w, w, self.histogram_bins)
    }
}
