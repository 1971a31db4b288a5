//! Ensemble trajectories through focused traveling-wave (ring cavity)
//! Gaussian fields: an optical lens for a slow molecular beam.
//!
//! Coordinates: the molecular beam travels along +z from a square source in
//! the plane `z = -source_distance`; the field foci sit at the origin. The
//! primary beam propagates along x and focuses the beam in y; the optional
//! second beam propagates along y and focuses in x.

use nalgebra::Vector3;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{dipole_potential_depth, GaussianBeam};
use crate::phys::consts::G_N;
use crate::phys::{photon_energy, Molecule};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParticleState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

impl ParticleState {
    pub fn new(position: Vector3<f64>, velocity: Vector3<f64>) -> Self {
        ParticleState { position, velocity }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().chain(self.velocity.iter()).all(|x| x.is_finite())
    }
}

/// Potential energy (J) and force (N) at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub potential: f64,
    pub force: Vector3<f64>,
    /// W/m²
    pub intensity: f64,
}

/// Dipole potential of a traveling-wave Gaussian beam,
/// `U = -U₀ (w0/w)² exp(-2ρ²/w²)`, with the analytic force `-∇U`.
pub fn gaussian_field(pos: &Vector3<f64>, beam: &GaussianBeam, alpha_vol: f64) -> FieldSample {
    let u0 = dipole_potential_depth(alpha_vol, beam.power, beam.waist);
    let zr = beam.rayleigh_length();
    let w0sq = beam.waist * beam.waist;
    let r = pos - beam.focus;
    let z = r.dot(&beam.axis);
    let r_perp = r - beam.axis * z;
    let rho2 = r_perp.norm_squared();
    let wsq = w0sq * (1.0 + (z / zr).powi(2));
    let q = w0sq / wsq;
    let e = (-2.0 * rho2 / wsq).exp();
    let potential = -u0 * q * e;
    // ∇U: transverse part 4 U₀ q e r⊥ / w², axial part through w(z)
    let grad_perp = r_perp * (4.0 * u0 * q * e / wsq);
    let dwsq_dz = 2.0 * w0sq * z / (zr * zr);
    let du_dz = -u0 * q * e * dwsq_dz * (-1.0 / wsq + 2.0 * rho2 / (wsq * wsq));
    let force = -(grad_perp + beam.axis * du_dz);
    FieldSample {
        potential,
        force,
        intensity: beam.peak_intensity() * q * e,
    }
}

/// Sum over all beams.
pub fn field_at(pos: &Vector3<f64>, beams: &[GaussianBeam], alpha_vol: f64) -> FieldSample {
    beams.iter().fold(
        FieldSample {
            potential: 0.0,
            force: Vector3::zeros(),
            intensity: 0.0,
        },
        |acc, b| {
            let s = gaussian_field(pos, b, alpha_vol);
            FieldSample {
                potential: acc.potential + s.potential,
                force: acc.force + s.force,
                intensity: acc.intensity + s.intensity,
            }
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct TrajectoryOptions {
    /// Uniform gravity along -z.
    pub gravity: bool,
    /// Record every `record_stride`-th step; 0 records only the end points.
    pub record_stride: usize,
}


#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    /// (t, state) samples including both end points.
    pub samples: Vec<(f64, ParticleState)>,
    pub final_state: ParticleState,
    pub final_time: f64,
    /// Photons absorbed along the path.
    pub photons: f64,
}

fn gravity_vec(on: bool) -> Vector3<f64> {
    if on {
        Vector3::new(0.0, 0.0, -G_N)
    } else {
        Vector3::zeros()
    }
}

/// Total mechanical energy ½mv² + U (+ m g z with gravity).
pub fn total_energy(s: &ParticleState, beams: &[GaussianBeam], molecule: &Molecule, gravity: bool) -> f64 {
    let u = field_at(&s.position, beams, molecule.alpha_vol).potential;
    let g = if gravity { molecule.mass * G_N * s.position.z } else { 0.0 };
    0.5 * molecule.mass * s.velocity.norm_squared() + u + g
}

struct Stepper<'a> {
    beams: &'a [GaussianBeam],
    molecule: &'a Molecule,
    gravity: Vector3<f64>,
    dose_rate: f64,
}

impl Stepper<'_> {
    fn accel(&self, pos: &Vector3<f64>) -> (Vector3<f64>, f64) {
        let f = field_at(pos, self.beams, self.molecule.alpha_vol);
        (f.force / self.molecule.mass + self.gravity, f.intensity)
    }
}

/// Velocity-Verlet integration from `s0` for `t_end` seconds. When
/// `stop` returns true for a state the run ends early after that step.
pub fn integrate_until<F: Fn(&ParticleState) -> bool>(
    s0: ParticleState,
    beams: &[GaussianBeam],
    molecule: &Molecule,
    dt: f64,
    t_end: f64,
    opts: TrajectoryOptions,
    stop: F,
) -> Result<Trajectory> {
    if !(dt > 0.0) || !(t_end > dt) {
        return Err(Error::domain("integration needs dt > 0 and t_end > dt"));
    }
    let wavelength = beams.first().map(|b| b.wavelength).unwrap_or(1064e-9);
    let stepper = Stepper {
        beams,
        molecule,
        gravity: gravity_vec(opts.gravity),
        dose_rate: molecule.sigma_abs / photon_energy(wavelength),
    };
    let steps = (t_end / dt).ceil() as usize;
    let mut s = s0;
    let (mut acc, mut intensity) = stepper.accel(&s.position);
    let mut photons = 0.0;
    let mut samples = vec![(0.0, s)];
    let mut t = 0.0;
    for step in 1..=steps {
        let h = if step == steps { t_end - dt * (steps - 1) as f64 } else { dt };
        let v_half = s.velocity + acc * (0.5 * h);
        s.position += v_half * h;
        let (next_acc, next_intensity) = stepper.accel(&s.position);
        s.velocity = v_half + next_acc * (0.5 * h);
        photons += 0.5 * (intensity + next_intensity) * h * stepper.dose_rate;
        acc = next_acc;
        intensity = next_intensity;
        t += h;
        if !s.is_finite() {
            return Err(Error::Integration {
                step,
                message: "non-finite particle state".into(),
            });
        }
        let done = stop(&s);
        if done || step == steps || (opts.record_stride > 0 && step % opts.record_stride == 0) {
            samples.push((t, s));
        }
        if done {
            break;
        }
    }
    Ok(Trajectory {
        samples,
        final_state: s,
        final_time: t,
        photons,
    })
}

/// Velocity-Verlet integration of `m r'' = F(r)` for a fixed duration.
pub fn integrate_trajectory(
    s0: ParticleState,
    beams: &[GaussianBeam],
    molecule: &Molecule,
    dt: f64,
    t_end: f64,
    opts: TrajectoryOptions,
) -> Result<Trajectory> {
    integrate_until(s0, beams, molecule, dt, t_end, opts, |_| false)
}

/// Exact free flight (optionally under gravity) until `z` reaches `z_plane`.
/// `None` when the particle never gets there.
pub fn fly_to_plane(s: &ParticleState, z_plane: f64, gravity: bool) -> Option<(f64, ParticleState)> {
    let dz = z_plane - s.position.z;
    let vz = s.velocity.z;
    let t = if gravity {
        // z + vz t - g t²/2 = z_plane, earliest positive root
        let disc = vz * vz - 2.0 * G_N * dz;
        if disc < 0.0 {
            return None;
        }
        let t = (vz - disc.sqrt()) / G_N;
        if t < 0.0 {
            return None;
        }
        t
    } else {
        if vz == 0.0 || dz / vz < 0.0 {
            return None;
        }
        dz / vz
    };
    let g = gravity_vec(gravity);
    let position = s.position + s.velocity * t + g * (0.5 * t * t);
    let mut position = position;
    position.z = z_plane;
    Some((t, ParticleState::new(position, s.velocity + g * t)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleSpec {
    pub n_particles: usize,
    /// Side of the square emitter, m.
    pub source_side: f64,
    /// Source plane below the field focus, m.
    pub source_distance: f64,
    /// Mean longitudinal speed, m/s.
    pub v_mean: f64,
    /// Half-width of the uniform longitudinal and transverse spreads, m/s.
    pub v_spread: f64,
    pub seed: u64,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        EnsembleSpec {
            n_particles: 10_000,
            source_side: 50e-6,
            source_distance: 3e-3,
            v_mean: 50.0,
            v_spread: 1.0,
            seed: 1,
        }
    }
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(Error::domain("ensemble needs at least one particle"));
        }
        if !(self.source_side > 0.0 && self.source_distance > 0.0 && self.v_mean > 0.0 && self.v_spread > 0.0) {
            return Err(Error::domain("source geometry and speeds must be positive"));
        }
        if self.v_spread >= self.v_mean {
            return Err(Error::domain("velocity spread must be below the mean speed"));
        }
        Ok(())
    }

    /// Initial state of particle `index`, drawn from its own stream.
    pub fn initial_state(&self, index: usize) -> ParticleState {
        let mut r = rng::stream(self.seed, "focus", index as u64);
        let half = 0.5 * self.source_side;
        let mut uniform = |a: f64| a * (2.0 * r.random::<f64>() - 1.0);
        let x = uniform(half);
        let y = uniform(half);
        let vx = uniform(self.v_spread);
        let vy = uniform(self.v_spread);
        let vz = self.v_mean + uniform(self.v_spread);
        ParticleState::new(Vector3::new(x, y, -self.source_distance), Vector3::new(vx, vy, vz))
    }
}

/// Square aperture centred on the beam line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectorSpec {
    /// Distance from the source plane along the beam, m.
    pub distance: f64,
    /// Half-width of the square acceptance, m.
    pub half_width: f64,
}

impl Default for DetectorSpec {
    fn default() -> Self {
        DetectorSpec {
            distance: 0.8,
            half_width: 4e-3,
        }
    }
}

impl DetectorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.distance > 0.0 && self.half_width > 0.0) {
            return Err(Error::domain("detector distance and half-width must be positive"));
        }
        Ok(())
    }

    pub fn accepts(&self, s: &ParticleState) -> bool {
        s.position.x.abs() <= self.half_width && s.position.y.abs() <= self.half_width
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimOptions {
    /// s
    pub dt: f64,
    pub gravity: bool,
    /// Number of leading particles whose paths are kept.
    pub keep_trajectories: usize,
    pub record_stride: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            dt: 10e-9,
            gravity: false,
            keep_trajectories: 0,
            record_stride: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticleOutcome {
    pub hit: bool,
    /// Velocity after leaving the field region.
    pub final_velocity: Vector3<f64>,
    /// Position on the detector plane.
    pub detector_position: Vector3<f64>,
    pub photons: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleResult {
    pub n: usize,
    pub hits: usize,
    pub hit_fraction: f64,
    pub outcomes: Vec<ParticleOutcome>,
    /// Paths of the first `keep_trajectories` particles, by particle index.
    pub trajectories: Vec<Trajectory>,
}

impl EnsembleResult {
    pub fn transverse_velocities(&self, axis: usize) -> Vec<f64> {
        self.outcomes.iter().map(|o| o.final_velocity[axis]).collect()
    }

    pub fn rms_transverse_velocity(&self, axis: usize) -> f64 {
        let v = self.transverse_velocities(axis);
        (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
    }

    /// Photon dose percentile, `q` in [0, 1].
    pub fn dose_percentile(&self, q: f64) -> f64 {
        let mut d: Vec<f64> = self.outcomes.iter().map(|o| o.photons).collect();
        d.sort_by(f64::total_cmp);
        let idx = ((d.len() - 1) as f64 * q.clamp(0.0, 1.0)).round() as usize;
        d[idx]
    }
}

/// Half-thickness of the slab around the foci where the field is integrated.
fn interaction_half_width(beams: &[GaussianBeam]) -> f64 {
    beams
        .iter()
        .map(|b| 8.0 * b.waist + b.focus.z.abs())
        .fold(0.0, f64::max)
}

fn run_particle(
    index: usize,
    spec: &EnsembleSpec,
    beams: &[GaussianBeam],
    molecule: &Molecule,
    detector: &DetectorSpec,
    opts: &SimOptions,
) -> Result<(ParticleOutcome, Option<Trajectory>)> {
    let s0 = spec.initial_state(index);
    let keep = index < opts.keep_trajectories;
    let z_det = detector.distance - spec.source_distance;
    let active: Vec<GaussianBeam> = beams.iter().filter(|b| b.power > 0.0).cloned().collect();
    let half = interaction_half_width(&active);
    let lost = || Error::Integration {
        step: 0,
        message: "particle never reaches the detector plane".into(),
    };

    let mut samples = vec![(0.0, s0)];
    let mut t = 0.0;
    let mut photons = 0.0;
    let mut s = s0;
    if !active.is_empty() && -half < z_det {
        let z_in = (-half).max(s0.position.z);
        if z_in > s.position.z {
            let (dt_fly, s_in) = fly_to_plane(&s, z_in, opts.gravity).ok_or_else(lost)?;
            t += dt_fly;
            s = s_in;
            if keep {
                samples.push((t, s));
            }
        }
        let z_out = half.min(z_det);
        // generous time bound: slowest speed across the slab, twice
        let t_max = 2.0 * (z_out - s.position.z) / (spec.v_mean - spec.v_spread) + 10.0 * opts.dt;
        let traj = integrate_until(
            s,
            &active,
            molecule,
            opts.dt,
            t_max,
            TrajectoryOptions {
                gravity: opts.gravity,
                record_stride: if keep { opts.record_stride } else { 0 },
            },
            |p| p.position.z >= z_out,
        )?;
        if traj.final_state.position.z < z_out {
            return Err(Error::Integration {
                step: traj.samples.len(),
                message: "particle turned back inside the field".into(),
            });
        }
        if keep {
            samples.extend(traj.samples.iter().skip(1).map(|(dt_, st)| (t + dt_, *st)));
        }
        t += traj.final_time;
        photons = traj.photons;
        s = traj.final_state;
    }
    let final_velocity = s.velocity;
    let (dt_fly, s_det) = fly_to_plane(&s, z_det, opts.gravity).ok_or_else(lost)?;
    t += dt_fly;
    if keep {
        samples.push((t, s_det));
    }
    let outcome = ParticleOutcome {
        hit: detector.accepts(&s_det),
        final_velocity,
        detector_position: s_det.position,
        photons,
    };
    let traj = keep.then_some(Trajectory {
        samples,
        final_state: s_det,
        final_time: t,
        photons,
    });
    Ok((outcome, traj))
}

/// Propagate an ensemble from the source through the fields to the detector
/// plane. Particles are independent and run in parallel; results are
/// collected in index order, so the output is deterministic per seed.
pub fn simulate_ensemble(
    spec: &EnsembleSpec,
    beams: &[GaussianBeam],
    molecule: &Molecule,
    detector: &DetectorSpec,
    opts: &SimOptions,
) -> Result<EnsembleResult> {
    spec.validate()?;
    detector.validate()?;
    for b in beams {
        b.validate()?;
    }
    if detector.distance <= spec.source_distance {
        return Err(Error::domain("detector must lie beyond the field focus"));
    }
    let results: Vec<(ParticleOutcome, Option<Trajectory>)> = (0..spec.n_particles)
        .into_par_iter()
        .map(|i| {
            run_particle(i, spec, beams, molecule, detector, opts).map_err(|e| Error::Particle {
                index: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let mut outcomes = Vec::with_capacity(results.len());
    let mut trajectories = Vec::new();
    for (o, t) in results {
        outcomes.push(o);
        trajectories.extend(t);
    }
    let hits = outcomes.iter().filter(|o| o.hit).count();
    Ok(EnsembleResult {
        n: spec.n_particles,
        hits,
        hit_fraction: hits as f64 / spec.n_particles as f64,
        outcomes,
        trajectories,
    })
}

/// Ratio of detector hit fractions with and without the field.
pub fn forward_gain(with_field: &EnsembleResult, without_field: &EnsembleResult) -> Result<f64> {
    if without_field.hits == 0 {
        return Err(Error::domain(
            "no detector hits without the field: increase the particle count or widen the detector",
        ));
    }
    Ok(with_field.hit_fraction / without_field.hit_fraction)
}

/// Focusing beam along x, plus an orthogonal one along y when `dual`.
pub fn lens_beams(power: f64, waist: f64, wavelength: f64, dual: bool) -> Result<Vec<GaussianBeam>> {
    let mut beams = vec![GaussianBeam::new(power, waist, wavelength, Vector3::x())?];
    if dual {
        beams.push(GaussianBeam::new(power, waist, wavelength, Vector3::y())?);
    }
    Ok(beams)
}

/// Focus-simulation run description as it appears in the `[focus]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FocusSetup {
    /// Catalogue name of the simulated particle.
    pub molecule: String,
    /// Intra-cavity powers, W.
    pub powers: Vec<f64>,
    /// Power at which the forward gain is judged, W.
    pub reference_power: f64,
    pub waist: f64,
    pub wavelength: f64,
    /// Add the orthogonal second field.
    pub dual: bool,
    pub n_particles: usize,
    pub source_side: f64,
    pub source_distance: f64,
    pub v_mean: f64,
    pub v_spread: f64,
    pub detector_distance: f64,
    pub detector_half_width: f64,
    pub dt: f64,
    pub gravity: bool,
    /// Trajectories written to `trajectories.csv` (first power only).
    pub keep_trajectories: usize,
    pub record_stride: usize,
    /// Bins of the final transverse-velocity histograms over ±3 v_spread.
    pub histogram_bins: usize,
}

impl Default for FocusSetup {
    fn default() -> Self {
        let spec = EnsembleSpec::default();
        let det = DetectorSpec::default();
        let opts = SimOptions::default();
        FocusSetup {
            molecule: Molecule::generic_5000().name,
            powers: vec![3e4, 6e4, 1.2e5],
            reference_power: 6e4,
            waist: 100e-6,
            wavelength: 1064e-9,
            dual: false,
            n_particles: spec.n_particles,
            source_side: spec.source_side,
            source_distance: spec.source_distance,
            v_mean: spec.v_mean,
            v_spread: spec.v_spread,
            detector_distance: det.distance,
            detector_half_width: det.half_width,
            dt: opts.dt,
            gravity: false,
            keep_trajectories: 20,
            record_stride: opts.record_stride,
            histogram_bins: 60,
        }
    }
}

impl FocusSetup {
    pub fn ensemble(&self, seed: u64) -> EnsembleSpec {
        EnsembleSpec {
            n_particles: self.n_particles,
            source_side: self.source_side,
            source_distance: self.source_distance,
            v_mean: self.v_mean,
            v_spread: self.v_spread,
            seed,
        }
    }

    pub fn detector(&self) -> DetectorSpec {
        DetectorSpec {
            distance: self.detector_distance,
            half_width: self.detector_half_width,
        }
    }

    pub fn options(&self, keep: usize) -> SimOptions {
        SimOptions {
            dt: self.dt,
            gravity: self.gravity,
            keep_trajectories: keep,
            record_stride: self.record_stride,
        }
    }

    pub fn particle(&self) -> Result<Molecule> {
        crate::phys::lookup(&self.molecule)
            .ok_or_else(|| Error::domain(format!("unknown molecule `{}`", self.molecule)))
    }

    pub fn validate(&self) -> Result<()> {
        self.ensemble(0).validate()?;
        self.detector().validate()?;
        self.particle()?;
        if self.powers.iter().any(|p| !(*p >= 0.0)) || !(self.reference_power >= 0.0) {
            return Err(Error::domain("focus powers must be >= 0"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::domain("focus dt must be positive"));
        }
        if self.histogram_bins == 0 {
            return Err(Error::domain("focus histogram_bins must be >= 1"));
        }
        lens_beams(0.0, self.waist, self.wavelength, self.dual).map(|_| ())
    }

    /// Run the ensemble at `power` (0 gives the field-free baseline).
    pub fn run(&self, power: f64, seed: u64, keep: usize) -> Result<EnsembleResult> {
        self.validate()?;
        simulate_ensemble(
            &self.ensemble(seed),
            &lens_beams(power, self.waist, self.wavelength, self.dual)?,
            &self.particle()?,
            &self.detector(),
            &self.options(keep),
        )
    }

    pub fn histogram_edges(&self) -> Vec<f64> {
        let w = 3.0 * self.v_spread;
        crate::source::VelocityHistogram::uniform_edges(-w, w, self.histogram_bins)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phys::j_to_ev;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    fn molecule() -> Molecule {
        Molecule::generic_5000()
    }

    fn beam(power: f64) -> GaussianBeam {
        GaussianBeam::new(power, 100e-6, 1064e-9, Vector3::x()).unwrap()
    }

    #[test]
    fn field_at_focus() {
        let b = beam(6e4);
        let s = gaussian_field(&Vector3::zeros(), &b, 200e-30);
        assert_relative_eq!(j_to_ev(-s.potential) * 1e3, 0.20, max_relative = 0.01);
        assert_eq!(s.force, Vector3::zeros());
        assert_relative_eq!(s.intensity, b.peak_intensity(), max_relative = 1e-14);
    }

    #[test]
    fn force_matches_finite_differences() {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let mut b = beam(6e4);
        b.axis = Vector3::new(1.0, 0.3, -0.2).normalize();
        b.focus = Vector3::new(1e-5, -2e-5, 3e-5);
        for _ in 0..100 {
            let p = Vector3::new(
                (r.random::<f64>() - 0.5) * 0.06,
                (r.random::<f64>() - 0.5) * 4e-4,
                (r.random::<f64>() - 0.5) * 4e-4,
            );
            let f = gaussian_field(&p, &b, 200e-30).force;
            let mut fd = Vector3::zeros();
            for k in 0..3 {
                let h = 1e-9;
                let mut a = p;
                let mut c = p;
                a[k] += h;
                c[k] -= h;
                fd[k] = -(gaussian_field(&a, &b, 200e-30).potential - gaussian_field(&c, &b, 200e-30).potential)
                    / (2.0 * h);
            }
            let scale = f.norm().max(1e-30);
            assert!((f - fd).norm() / scale < 1e-6, "force {f:?} fd {fd:?}");
        }
    }

    #[test]
    fn free_flight_is_linear() {
        let s0 = ParticleState::new(Vector3::new(1e-5, 0.0, -3e-3), Vector3::new(0.3, -0.2, 50.0));
        let traj =
            integrate_trajectory(s0, &[beam(0.0)], &molecule(), 1e-8, 1e-4, TrajectoryOptions { gravity: false, record_stride: 100 })
                .unwrap();
        for (t, s) in &traj.samples {
            let expected = s0.position + s0.velocity * *t;
            assert!((s.position - expected).norm() < 1e-15 + 1e-12 * expected.norm());
            assert_eq!(s.velocity, s0.velocity);
        }
    }

    #[test]
    fn energy_is_conserved_over_a_transit() {
        let beams = lens_beams(6e4, 100e-6, 1064e-9, true).unwrap();
        let m = molecule();
        for (x, y, vx, vy) in [(0.0, 2e-5, 0.0, 0.5), (3e-5, -4e-5, -0.7, 0.9), (0.0, 0.0, 0.0, 0.0)] {
            let s0 = ParticleState::new(Vector3::new(x, y, -1e-3), Vector3::new(vx, vy, 50.0));
            let e0 = total_energy(&s0, &beams, &m, false);
            let traj = integrate_trajectory(s0, &beams, &m, 10e-9, 40e-6, TrajectoryOptions::default()).unwrap();
            let e1 = total_energy(&traj.final_state, &beams, &m, false);
            assert!(((e1 - e0) / e0).abs() < 1e-6, "relative drift {}", (e1 - e0) / e0);
        }
    }

    #[test]
    fn energy_with_gravity() {
        let beams = [beam(6e4)];
        let m = molecule();
        let s0 = ParticleState::new(Vector3::new(0.0, 3e-5, -1e-3), Vector3::new(0.0, 0.5, 50.0));
        let e0 = total_energy(&s0, &beams, &m, true);
        let traj = integrate_trajectory(s0, &beams, &m, 10e-9, 40e-6, TrajectoryOptions { gravity: true, record_stride: 0 }).unwrap();
        let e1 = total_energy(&traj.final_state, &beams, &m, true);
        assert!(((e1 - e0) / e0).abs() < 1e-6);
    }

    #[test]
    fn slow_transverse_particle_stays_trapped() {
        let b = beam(1e4);
        let m = Molecule::perfluoro_c60(7).unwrap();
        let u0 = dipole_potential_depth(m.alpha_vol, b.power, b.waist);
        let v_cap = crate::optics::transverse_capture_speed(u0, m.mass);
        let v = 0.9 * v_cap;
        // launched from the focus in the plane transverse to the laser
        let s0 = ParticleState::new(Vector3::zeros(), Vector3::new(0.0, v * 0.6, v * 0.8));
        let traj = integrate_trajectory(s0, std::slice::from_ref(&b), &m, 20e-9, 2e-3, TrajectoryOptions { gravity: false, record_stride: 1 }).unwrap();
        let ke = 0.5 * m.mass * v * v;
        let turning = b.waist * (-0.5 * (1.0 - ke / u0).ln()).sqrt();
        let max_rho = traj
            .samples
            .iter()
            .map(|(_, s)| (s.position.y.powi(2) + s.position.z.powi(2)).sqrt())
            .fold(0.0, f64::max);
        assert!(max_rho <= turning * (1.0 + 1e-3), "max {max_rho} turning {turning}");
        assert!(max_rho > 0.5 * turning);
        // several oscillations within the run
        let crossings = traj.samples.windows(2).filter(|w| w[0].1.position.y.signum() != w[1].1.position.y.signum()).count();
        assert!(crossings >= 4, "{crossings}");
    }

    #[test]
    fn angular_momentum_about_laser_axis() {
        let b = beam(6e4);
        let m = molecule();
        let s0 = ParticleState::new(Vector3::new(0.0, 4e-5, -5e-4), Vector3::new(0.0, 0.8, 50.0));
        let l = |s: &ParticleState| s.position.y * s.velocity.z - s.position.z * s.velocity.y;
        let traj = integrate_trajectory(s0, &[b], &m, 10e-9, 20e-6, TrajectoryOptions { gravity: false, record_stride: 10 }).unwrap();
        let l0 = l(&s0);
        for (_, s) in &traj.samples {
            assert!(((l(s) - l0) / l0).abs() < 1e-6);
        }
    }

    #[test]
    fn second_order_convergence() {
        let beams = lens_beams(6e4, 100e-6, 1064e-9, false).unwrap();
        let m = molecule();
        let mut ratios = Vec::new();
        for i in 0..10 {
            let y = -5e-5 + 1e-5 * i as f64;
            let s0 = ParticleState::new(Vector3::new(0.0, y, -4e-4), Vector3::new(0.0, 0.3, 50.0));
            let run = |dt: f64| integrate_trajectory(s0, &beams, &m, dt, 16e-6, TrajectoryOptions::default()).unwrap().final_state.position;
            let a = run(80e-9);
            let b = run(40e-9);
            let c = run(20e-9);
            ratios.push((a - b).norm() / (b - c).norm());
        }
        for r in ratios {
            assert!((r - 4.0).abs() < 0.5, "ratio {r}");
        }
    }

    #[test]
    fn nan_is_reported_with_step() {
        let s0 = ParticleState::new(Vector3::new(f64::NAN, 0.0, 0.0), Vector3::zeros());
        let err = integrate_trajectory(s0, &[beam(1.0)], &molecule(), 1e-8, 1e-6, TrajectoryOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Integration { step: 1, .. }));
    }

    #[test]
    fn fly_to_plane_with_and_without_gravity() {
        let s = ParticleState::new(Vector3::new(0.0, 0.0, 0.0), Vector3::new(1.0, 0.0, 10.0));
        let (t, e) = fly_to_plane(&s, 1.0, false).unwrap();
        assert_relative_eq!(t, 0.1);
        assert_relative_eq!(e.position.x, 0.1);
        let (tg, eg) = fly_to_plane(&s, 1.0, true).unwrap();
        assert!(tg > t);
        assert_relative_eq!(eg.position.z, 1.0);
        assert!(fly_to_plane(&s, 100.0, true).is_none());
        assert!(fly_to_plane(&s, -1.0, false).is_none());
    }

    #[test]
    fn baseline_run_is_deterministic_and_gain_is_one() {
        let spec = EnsembleSpec {
            n_particles: 2000,
            ..EnsembleSpec::default()
        };
        let det = DetectorSpec::default();
        let beams = lens_beams(0.0, 100e-6, 1064e-9, false).unwrap();
        let a = simulate_ensemble(&spec, &beams, &molecule(), &det, &SimOptions::default()).unwrap();
        let b = simulate_ensemble(&spec, &beams, &molecule(), &det, &SimOptions::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(forward_gain(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn zero_baseline_hits_is_an_error() {
        let spec = EnsembleSpec {
            n_particles: 100,
            ..EnsembleSpec::default()
        };
        let det = DetectorSpec {
            distance: 0.8,
            half_width: 1e-7,
        };
        let beams = lens_beams(0.0, 100e-6, 1064e-9, false).unwrap();
        let r = simulate_ensemble(&spec, &beams, &molecule(), &det, &SimOptions::default()).unwrap();
        assert!(forward_gain(&r, &r).is_err());
    }

    #[test]
    fn kept_trajectories_start_at_source() {
        let spec = EnsembleSpec {
            n_particles: 50,
            ..EnsembleSpec::default()
        };
        let opts = SimOptions {
            keep_trajectories: 3,
            ..SimOptions::default()
        };
        let beams = lens_beams(6e4, 100e-6, 1064e-9, false).unwrap();
        let r = simulate_ensemble(&spec, &beams, &molecule(), &DetectorSpec::default(), &opts).unwrap();
        assert_eq!(r.trajectories.len(), 3);
        for (i, t) in r.trajectories.iter().enumerate() {
            assert_eq!(t.samples[0].1, spec.initial_state(i));
            assert!(t.samples.windows(2).all(|w| w[1].0 > w[0].0));
            assert_relative_eq!(t.final_state.position.z, 0.8 - 3e-3, max_relative = 1e-12);
        }
        assert!(r.dose_percentile(0.5) > 0.0);
    }

    fn run(power: f64, n: usize) -> EnsembleResult {
        let spec = EnsembleSpec {
            n_particles: n,
            ..EnsembleSpec::default()
        };
        let beams = lens_beams(power, 100e-6, 1064e-9, false).unwrap();
        simulate_ensemble(&spec, &beams, &molecule(), &DetectorSpec::default(), &SimOptions::default()).unwrap()
    }

    #[test]
    fn field_narrows_transverse_velocities() {
        let base = run(0.0, 2000);
        let on = run(6e4, 2000);
        assert!(on.rms_transverse_velocity(1) < base.rms_transverse_velocity(1));
        // the x direction runs along the laser and is untouched
        assert_relative_eq!(on.rms_transverse_velocity(0), base.rms_transverse_velocity(0), max_relative = 1e-3);
        assert!(run(3e3, 2000).hits >= base.hits);
    }

    #[test]
    fn baseline_matches_geometric_acceptance() {
        // Probability that |x0 + vx t| <= h with x0, vx uniform, averaged over vz.
        let spec = EnsembleSpec::default();
        let det = DetectorSpec::default();
        let a = 0.5 * spec.source_side;
        let b = spec.v_spread;
        let h = det.half_width;
        let per_axis = |t: f64| {
            // density of s = x0 + vx t is the convolution of two boxes
            let c = b * t;
            crate::numeric::integrate(
                |s| {
                    let lo = (s - a).max(-c);
                    let hi = (s + a).min(c);
                    (hi - lo).max(0.0) / (4.0 * a * c)
                },
                -h,
                h,
                1e-10,
                0.0,
            )
        };
        let p = crate::numeric::integrate(
            |vz| {
                let t = det.distance / vz;
                per_axis(t).powi(2)
            },
            spec.v_mean - b,
            spec.v_mean + b,
            1e-10,
            0.0,
        ) / (2.0 * b);
        let n = 20_000;
        let r = run(0.0, n);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((r.hit_fraction - p).abs() < 4.0 * se, "sim {} oracle {p}", r.hit_fraction);
    }
}
