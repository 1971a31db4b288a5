//! Command-line front end. [`run_command`] parses argv, resolves the
//! configuration, runs one subcommand and maps failures to exit codes
//! (1 for configuration and usage, 2 for numerical failures).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{Map, Value};

use crate::config::{load_config, write_manifest, RunConfig, OUTPUT_DIR_ENV};
use crate::cooling::TRACE_HEADER;
use crate::error::{Error, Result};
use crate::focus::forward_gain;
use crate::optics;
use crate::phys::{self, j_to_ev, j_to_mev, kg_to_amu, kinetic_energy};
use crate::report;
use crate::selector::{apply_selector, selector_setpoint, transmission};
use crate::source::{
    beam_flux_density, effusive_most_probable_speed, fit_floating_mb, sample_velocities, FloatingMb,
    VelocityHistogram,
};
use crate::sublimation::{fit_enthalpy, result_csv, synthesize_ramp, EnthalpyRow, RampSeries, REFERENCE_ENTHALPIES};
use crate::table::SeriesTable;
use crate::units::{self, sci};

const DIGITS: usize = 5;

#[derive(Debug, Parser)]
#[command(name = "slowbeam", version, about = "Slow beams of massive molecules: source, selector, sublimation and optical-manipulation models")]
struct Cli {
    /// TOML run configuration; defaults apply to anything missing.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Global seed, overrides the config.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(..=i64::MAX as u64))]
    seed: Option<u64>,
    /// Output directory, overrides $SLOWBEAM_OUT and the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Only machine-readable `key=value` lines on stdout.
    #[arg(long, short, global = true)]
    quiet: bool,
    /// Print a JSON object with all reported values as the last line.
    #[arg(long, global = true)]
    json_summary: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Particle {
    /// Polarizability volume, e.g. 200A3.
    #[arg(long, value_parser = units::volume)]
    alpha: Option<f64>,
    /// Particle mass, e.g. 5053amu.
    #[arg(long, value_parser = units::mass)]
    mass: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dipole potential depth of a focused beam.
    Potential {
        #[command(flatten)]
        particle: Particle,
        #[arg(long, value_parser = units::power)]
        power: Option<f64>,
        #[arg(long, value_parser = units::length)]
        waist: Option<f64>,
    },
    /// Photons absorbed during a pulse at the focus.
    Absorption {
        #[arg(long, value_parser = units::power)]
        power: Option<f64>,
        /// Absorption cross-section, e.g. 3e-23m2.
        #[arg(long, value_parser = units::area)]
        sigma: Option<f64>,
        #[arg(long, value_parser = units::time)]
        tau: Option<f64>,
        #[arg(long, value_parser = units::length)]
        waist: Option<f64>,
        #[arg(long, value_parser = units::length)]
        wavelength: Option<f64>,
        /// Multiplies the cross-section.
        #[arg(long)]
        sigma_scale: Option<f64>,
    },
    /// Power whose potential depth equals a kinetic energy.
    StopPower {
        #[command(flatten)]
        particle: Particle,
        /// Kinetic energy, e.g. 50meV; defaults to the configured speed.
        #[arg(long, value_parser = units::energy)]
        energy: Option<f64>,
        #[arg(long, value_parser = units::length)]
        waist: Option<f64>,
    },
    /// Speed change from one pulse of a pulsed optical potential.
    PulseSlow {
        #[command(flatten)]
        particle: Particle,
        /// Pulse energy, e.g. 3mJ.
        #[arg(long, value_parser = units::energy)]
        energy: Option<f64>,
        /// Pulse length, e.g. 7.5ps.
        #[arg(long, value_parser = units::time)]
        duration: Option<f64>,
        #[arg(long, value_parser = units::length)]
        waist: Option<f64>,
        /// Molecule speed, e.g. 50m/s.
        #[arg(long, value_parser = units::speed)]
        speed: Option<f64>,
    },
    /// Transverse capture speed and transit photon dose of a continuous focus.
    Capture {
        #[command(flatten)]
        particle: Particle,
        /// Potential depth, e.g. 0.033meV; computed from --power when absent.
        #[arg(long, value_parser = units::energy)]
        depth: Option<f64>,
        #[arg(long, value_parser = units::power)]
        power: Option<f64>,
        #[arg(long, value_parser = units::length)]
        waist: Option<f64>,
        #[arg(long, value_parser = units::speed)]
        speed: Option<f64>,
        /// Multiplies the absorption cross-section.
        #[arg(long)]
        sigma_scale: Option<f64>,
    },
    /// Draw source velocities and write `velocity_histogram.csv`.
    SampleSource {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_parser = units::temperature)]
        temperature: Option<f64>,
        #[arg(long, value_parser = units::speed)]
        drift: Option<f64>,
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Fit a floating Maxwell-Boltzmann shape to a `v_mps,count` histogram.
    FitVelocity { input: PathBuf },
    /// Pass a velocity distribution through the selector.
    Selector {
        #[arg(long, value_parser = units::frequency)]
        rotor_freq: Option<f64>,
        #[arg(long)]
        fwhm_rel: Option<f64>,
        /// Speed per rotor frequency, (m/s)/Hz.
        #[arg(long)]
        calibration: Option<f64>,
        /// Histogram to filter; a fresh source sample is used otherwise.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Arrhenius fit of one or more ramp CSVs into `enthalpy.csv`.
    FitArrhenius {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Synthesize a temperature ramp into `ramp.csv`.
    SynthRamp {
        /// kJ/mol
        #[arg(long)]
        delta_h: Option<f64>,
        #[arg(long)]
        noise_rel: Option<f64>,
        /// One ramp per reference compound, `ramp_<molecule>.csv`.
        #[arg(long)]
        reference: bool,
    },
    /// Trajectory ensemble through the focusing field.
    FocusSim {
        #[arg(long)]
        dual: bool,
        #[arg(long)]
        n: Option<usize>,
        /// Comma-separated powers, e.g. 30kW,60kW.
        #[arg(long, value_parser = units::power, value_delimiter = ',')]
        power: Vec<f64>,
    },
    /// Collective cavity cooling at each configured power.
    CoolSim {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_parser = units::power, value_delimiter = ',')]
        power: Vec<f64>,
        #[arg(long, value_parser = units::time)]
        t_end: Option<f64>,
    },
    /// Locate the organization threshold over the configured powers.
    ThresholdScan {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_parser = units::power, value_delimiter = ',')]
        power: Vec<f64>,
    },
    /// Summarize a run directory into a markdown report.
    Report { dir: PathBuf },
}

/// Collects reported values for stdout and the optional JSON summary.
struct Output {
    quiet: bool,
    json: bool,
    summary: Map<String, Value>,
    files: Vec<String>,
}

impl Output {
    fn value(&mut self, label: &str, key: &str, x: f64, unit: &str) {
        let mut out = std::io::stdout().lock();
        if !self.quiet {
            let _ = writeln!(out, "{}", format!("{label} = {} {unit}", sci(x, DIGITS)).trim_end());
        }
        let _ = writeln!(out, "{key}={}", sci(x, DIGITS));
        self.summary.insert(key.to_string(), Value::from(x));
    }

    fn note(&self, text: &str) {
        if !self.quiet {
            eprintln!("{text}");
        }
    }

    fn table(&mut self, dir: &Path, table: &SeriesTable, file: &str) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(file);
        table.write_csv(&path)?;
        self.note(&format!("wrote {}", path.display()));
        self.files.push(file.to_string());
        Ok(())
    }

    fn text(&mut self, dir: &Path, text: &str, file: &str) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(file);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        self.note(&format!("wrote {}", path.display()));
        self.files.push(file.to_string());
        Ok(())
    }

    fn finish(mut self, command: &str, dir: Option<&Path>) {
        if !self.json {
            return;
        }
        self.summary.insert("command".into(), Value::from(command));
        if let Some(d) = dir {
            self.summary.insert("output_dir".into(), Value::from(d.display().to_string()));
        }
        if !self.files.is_empty() {
            self.summary.insert("files".into(), Value::from(self.files.clone()));
        }
        println!("{}", Value::Object(self.summary));
    }
}

/// Parse `args` (program name first), run the subcommand and return the
/// process exit code.
pub fn run_command<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let line = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join(" ");
    match execute(cli, &line) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn output_dir(cli_out: Option<PathBuf>, config: &RunConfig) -> PathBuf {
    cli_out
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| config.output_dir.clone())
}

fn powers_or(list: Vec<f64>, default: &[f64]) -> Vec<f64> {
    if list.is_empty() {
        default.to_vec()
    } else {
        list
    }
}

fn power_tag(p: f64) -> String {
    if p.fract() == 0.0 {
        format!("{p:.0}W")
    } else {
        format!("{p:.1}W")
    }
}

fn execute(cli: Cli, line: &str) -> Result<()> {
    let mut config = match &cli.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    config.output_dir = output_dir(cli.out.clone(), &config);
    let mut out = Output {
        quiet: cli.quiet,
        json: cli.json_summary,
        summary: Map::new(),
        files: Vec::new(),
    };
    let dir = config.output_dir.clone();
    let molecule = config.molecule.resolve()?;
    let alpha_of = |p: &Particle| p.alpha.unwrap_or(molecule.alpha_vol);
    let mass_of = |p: &Particle| p.mass.unwrap_or(molecule.mass);
    let o = config.optics.clone();

    let writes_files = match cli.command {
        Command::Potential { particle, power, waist } => {
            let u = optics::dipole_potential_depth(
                alpha_of(&particle),
                power.unwrap_or(o.power),
                waist.unwrap_or(o.waist),
            );
            out.value("potential depth", "U_eV", j_to_ev(u), "eV");
            false
        }
        Command::Absorption {
            power,
            sigma,
            tau,
            waist,
            wavelength,
            sigma_scale,
        } => {
            let n = optics::photons_absorbed(
                power.unwrap_or(o.power),
                sigma.unwrap_or(molecule.sigma_abs) * sigma_scale.unwrap_or(o.sigma_scale),
                tau.unwrap_or(o.tau),
                waist.unwrap_or(o.waist),
                wavelength.unwrap_or(o.wavelength),
            );
            out.value("photons absorbed", "photons", n, "");
            false
        }
        Command::StopPower {
            particle,
            energy,
            waist,
        } => {
            let e = energy.unwrap_or_else(|| kinetic_energy(mass_of(&particle), o.speed));
            let p = optics::stopping_power(e, alpha_of(&particle), waist.unwrap_or(o.waist));
            out.value("kinetic energy", "E_meV", j_to_mev(e), "meV");
            out.value("stopping power", "P_W", p, "W");
            false
        }
        Command::PulseSlow {
            particle,
            energy,
            duration,
            waist,
            speed,
        } => {
            let peak = energy.unwrap_or(o.pulse_energy) / duration.unwrap_or(o.pulse_duration);
            let u = optics::dipole_potential_depth(alpha_of(&particle), peak, waist.unwrap_or(o.pulse_waist));
            let dv = optics::pulsed_deceleration(speed.unwrap_or(o.speed), u, mass_of(&particle))?;
            out.value("peak power", "P_peak_W", peak, "W");
            out.value("potential depth", "U_meV", j_to_mev(u), "meV");
            out.value("speed change", "dv_mps", dv, "m/s");
            false
        }
        Command::Capture {
            particle,
            depth,
            power,
            waist,
            speed,
            sigma_scale,
        } => {
            let alpha = alpha_of(&particle);
            let w0 = waist.unwrap_or(o.waist);
            let per_watt = optics::dipole_potential_depth(alpha, 1.0, w0);
            let (u, p) = match (depth, power) {
                (Some(u), Some(p)) => (u, p),
                (Some(u), None) if per_watt > 0.0 => (u, u / per_watt),
                (Some(u), None) => (u, o.power),
                (None, p) => {
                    let p = p.unwrap_or(o.power);
                    (per_watt * p, p)
                }
            };
            let v = optics::transverse_capture_speed(u, mass_of(&particle));
            let dose = optics::transit_photon_dose(
                p,
                w0,
                speed.unwrap_or(o.speed),
                molecule.sigma_abs * sigma_scale.unwrap_or(o.sigma_scale),
                o.wavelength,
            );
            out.value("potential depth", "U_meV", j_to_mev(u), "meV");
            out.value("capture speed", "v_capture_mps", v, "m/s");
            out.value("transit photon dose", "photons", dose, "");
            false
        }
        Command::SampleSource {
            n,
            temperature,
            drift,
            bins,
        } => {
            let s = &mut config.source;
            s.n_samples = n.unwrap_or(s.n_samples);
            s.temperature = temperature.unwrap_or(s.temperature);
            s.drift = drift.unwrap_or(s.drift);
            s.bins = bins.unwrap_or(s.bins);
            config.validate()?;
            let s = &config.source;
            let params = s.params(molecule.mass)?;
            let v = sample_velocities(s.n_samples, params, config.seed)?;
            let hist =
                VelocityHistogram::from_samples(&v, VelocityHistogram::uniform_edges(0.0, s.v_max, s.bins))?;
            out.table(&dir, &hist.to_table("velocity_histogram"), "velocity_histogram.csv")?;
            let dist = FloatingMb::new(params)?;
            let density = beam_flux_density(&s.flux(), s.density_distance)?;
            out.value("distribution mean", "v_mean_mps", dist.mean(), "m/s");
            out.value("distribution mode", "v_mode_mps", dist.mode(), "m/s");
            out.value(
                "effusive most probable speed",
                "v_effusive_mps",
                effusive_most_probable_speed(molecule.mass, s.temperature)?,
                "m/s",
            );
            out.value("flux at detector", "flux_m2s", density.flux, "1/(m2 s)");
            out.value("number density", "density_m3", density.number_density, "1/m3");
            true
        }
        Command::FitVelocity { input } => {
            let hist = VelocityHistogram::from_table(&SeriesTable::read_csv(&input)?)?;
            let fit = fit_floating_mb(&hist, molecule.mass)?;
            let mut t = SeriesTable::new(
                "velocity_fit",
                &["drift_mps", "drift_err_mps", "T_K", "T_err_K", "mode_mps", "chi2_red"],
            );
            t.push_row(&[
                fit.drift,
                fit.drift_err,
                fit.temperature,
                fit.temperature_err,
                fit.mode,
                fit.chi2_reduced,
            ])
            .map_err(|_| Error::Fit {
                message: "fit produced non-finite parameters".into(),
                residual: fit.chi2_reduced,
            })?;
            out.table(&dir, &t, "velocity_fit.csv")?;
            out.value("drift", "v_d_mps", fit.drift, "m/s");
            out.value("drift error", "v_d_err_mps", fit.drift_err, "m/s");
            out.value("temperature", "T_K", fit.temperature, "K");
            out.value("temperature error", "T_err_K", fit.temperature_err, "K");
            out.value("mode", "v_mode_mps", fit.mode, "m/s");
            true
        }
        Command::Selector {
            rotor_freq,
            fwhm_rel,
            calibration,
            input,
        } => {
            let sel = &mut config.selector;
            sel.rotor_freq = rotor_freq.unwrap_or(sel.rotor_freq);
            sel.fwhm_rel = fwhm_rel.unwrap_or(sel.fwhm_rel);
            sel.calibration = calibration.unwrap_or(sel.calibration);
            config.validate()?;
            let sel = config.selector;
            let (before, after) = match input {
                Some(path) => {
                    let hist = VelocityHistogram::from_table(&SeriesTable::read_csv(&path)?)?;
                    let counts = hist
                        .centers()
                        .iter()
                        .zip(hist.counts())
                        .map(|(v, c)| Ok(c * transmission(*v, &sel)?))
                        .collect::<Result<Vec<f64>>>()?;
                    let total = hist.total();
                    (total, VelocityHistogram::new(hist.edges().to_vec(), counts)?)
                }
                None => {
                    let s = &config.source;
                    let v = sample_velocities(s.n_samples, s.params(molecule.mass)?, config.seed)?;
                    let kept = apply_selector(&v, &sel, config.seed)?;
                    let edges = VelocityHistogram::uniform_edges(0.0, s.v_max, s.bins);
                    (v.len() as f64, VelocityHistogram::from_samples(&kept, edges)?)
                }
            };
            out.table(&dir, &after.to_table("selected_histogram"), "selected_histogram.csv")?;
            out.value("setpoint", "setpoint_mps", selector_setpoint(&sel), "m/s");
            out.value(
                "pass band FWHM",
                "fwhm_mps",
                sel.fwhm_rel * selector_setpoint(&sel),
                "m/s",
            );
            out.value(
                "transmitted fraction",
                "transmitted_fraction",
                if before > 0.0 { after.total() / before } else { 0.0 },
                "",
            );
            true
        }
        Command::FitArrhenius { inputs } => {
            let mut rows = Vec::new();
            for path in &inputs {
                let series = RampSeries::from_table(&SeriesTable::read_csv(path)?)?;
                let fit = fit_enthalpy(&series)?;
                let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                let name = match stem.strip_prefix("ramp_") {
                    Some(n) if !n.is_empty() => n.to_string(),
                    _ => molecule.name.clone(),
                };
                let mass = phys::lookup(&name).map_or(molecule.mass, |m| m.mass);
                if inputs.len() == 1 {
                    out.value("sublimation enthalpy", "dH_kJmol", fit.delta_h, "kJ/mol");
                    out.value("standard error", "dH_err_kJmol", fit.stderr, "kJ/mol");
                    out.value("ln prefactor", "ln_prefactor", fit.prefactor_ln, "ln(1/s)");
                } else {
                    out.value(&format!("{name} enthalpy"), &format!("dH_kJmol_{name}"), fit.delta_h, "kJ/mol");
                }
                rows.push(EnthalpyRow {
                    molecule: name,
                    mass_amu: kg_to_amu(mass),
                    dh_kjmol: fit.delta_h,
                    err_kjmol: fit.stderr,
                });
            }
            out.text(&dir, &result_csv(&rows), "enthalpy.csv")?;
            true
        }
        Command::SynthRamp {
            delta_h,
            noise_rel,
            reference,
        } => {
            let s = &mut config.sublimation;
            s.delta_h = delta_h.unwrap_or(s.delta_h);
            s.noise_rel = noise_rel.unwrap_or(s.noise_rel);
            config.validate()?;
            if reference {
                for (i, (n, _, dh, _)) in REFERENCE_ENTHALPIES.iter().enumerate() {
                    let mut spec = config.sublimation.ramp();
                    spec.delta_h = dh * 1e3;
                    let ramp = synthesize_ramp(&spec, config.seed.wrapping_add(i as u64))?;
                    let name = format!("perfluoroC60-n{n}");
                    out.table(&dir, &ramp.to_table(), &format!("ramp_{name}.csv"))?;
                }
            } else {
                let ramp = synthesize_ramp(&config.sublimation.ramp(), config.seed)?;
                out.table(&dir, &ramp.to_table(), "ramp.csv")?;
                out.value("samples", "points", ramp.len() as f64, "");
            }
            true
        }
        Command::FocusSim { dual, n, power } => {
            let f = &mut config.focus;
            f.dual |= dual;
            f.n_particles = n.unwrap_or(f.n_particles);
            f.powers = powers_or(power, &f.powers);
            config.validate()?;
            run_focus(&config, &dir, &mut out)?;
            true
        }
        Command::CoolSim { n, power, t_end } => {
            let c = &mut config.cooling;
            c.n = n.unwrap_or(c.n);
            c.powers = powers_or(power, &c.powers);
            c.t_end = t_end.unwrap_or(c.t_end);
            config.validate()?;
            run_cooling(&config, &dir, &mut out)?;
            true
        }
        Command::ThresholdScan { n, power } => {
            let c = &mut config.cooling;
            c.n = n.unwrap_or(c.n);
            c.powers = powers_or(power, &c.powers);
            config.validate()?;
            let scan = config.cooling.scan(config.seed)?;
            let mut t = SeriesTable::new("threshold_scan", &["power_W", "late_theta", "ke_ratio"]);
            for p in &scan.points {
                t.push_row(&[p.power, p.late_theta, p.ke_ratio])?;
            }
            out.table(&dir, &t, "threshold_scan.csv")?;
            out.value("threshold power", "P_T_W", scan.threshold, "W");
            out.value("bracket low", "bracket_lo_W", scan.bracket.0, "W");
            out.value("bracket high", "bracket_hi_W", scan.bracket.1, "W");
            true
        }
        Command::Report { dir: run_dir } => {
            let r = report::report(&run_dir)?;
            let path = run_dir.join(&r.file_name);
            std::fs::write(&path, &r.text).map_err(|e| Error::io(&path, e))?;
            if !cli.quiet {
                print!("{}", r.text);
            }
            out.note(&format!("wrote {}", path.display()));
            out.value("checks passed", "checks_pass", r.passed as f64, "");
            out.value("checks failed", "checks_fail", r.failed as f64, "");
            out.finish(line, Some(&run_dir));
            return r.into_result();
        }
    };
    if writes_files {
        let path = write_manifest(&dir, &config, line)?;
        out.note(&format!("wrote {}", path.display()));
        out.finish(line, Some(&dir));
    } else {
        out.finish(line, None);
    }
    Ok(())
}

fn run_focus(config: &RunConfig, dir: &Path, out: &mut Output) -> Result<()> {
    let f = &config.focus;
    let keep = if config.output.trajectories { f.keep_trajectories } else { 0 };
    let mut powers = f.powers.clone();
    if !powers.contains(&f.reference_power) {
        powers.push(f.reference_power);
    }
    let edges = f.histogram_edges();
    let baseline = f.run(0.0, config.seed, 0)?;
    let mut summary = SeriesTable::new(
        "summary",
        &["power_W", "hit_fraction", "gain", "dose_p50", "dose_p90", "dose_max", "rms_vy_mps"],
    );
    let mut finals = SeriesTable::new("final_velocities", &["power_W", "vy_mps", "count"]);
    let mut trajectories = SeriesTable::new("trajectories", &["id", "t", "x", "y", "z", "vx", "vy", "vz"]);
    let mut reference_gain = f64::NAN;
    for (i, p) in std::iter::once(0.0).chain(powers.iter().copied()).enumerate() {
        let r = if i == 0 {
            baseline.clone()
        } else {
            f.run(p, config.seed, if i == 1 { keep } else { 0 })?
        };
        let gain = forward_gain(&r, &baseline)?;
        if i > 0 && p == f.reference_power {
            reference_gain = gain;
        }
        summary.push_row(&[
            p,
            r.hit_fraction,
            gain,
            r.dose_percentile(0.5),
            r.dose_percentile(0.9),
            r.dose_percentile(1.0),
            r.rms_transverse_velocity(1),
        ])?;
        let hist = VelocityHistogram::from_samples(&r.transverse_velocities(1), edges.clone())?;
        for (v, c) in hist.centers().iter().zip(hist.counts()) {
            finals.push_row(&[p, *v, *c])?;
        }
        for (id, traj) in r.trajectories.iter().enumerate() {
            for (t, s) in &traj.samples {
                let (x, v) = (s.position, s.velocity);
                trajectories.push_row(&[id as f64, *t, x[0], x[1], x[2], v[0], v[1], v[2]])?;
            }
        }
        if i > 0 {
            out.value(
                &format!("forward gain at {}", power_tag(p)),
                &format!("gain_{}", power_tag(p)),
                gain,
                "",
            );
        }
    }
    out.table(dir, &summary, "summary.csv")?;
    out.table(dir, &finals, "final_velocities.csv")?;
    if keep > 0 {
        out.table(dir, &trajectories, "trajectories.csv")?;
    }
    out.value("baseline hit fraction", "hit_fraction_0W", baseline.hit_fraction, "");
    out.value("forward gain at reference power", "gain", reference_gain, "");
    Ok(())
}

fn run_cooling(config: &RunConfig, dir: &Path, out: &mut Output) -> Result<()> {
    let c = &config.cooling;
    let edges = c.histogram_edges();
    let mut summary = SeriesTable::new(
        "cooling_summary",
        &["power_W", "ke_initial_J", "ke_late_J", "ke_ratio", "late_theta"],
    );
    let initial = c.ensemble(config.seed)?;
    out.table(
        dir,
        &initial.velocity_histogram(edges.clone())?.to_table("cooling_velocities_initial"),
        "cooling_velocities_initial.csv",
    )?;
    for &p in &c.powers {
        let run = c.run(p, config.seed)?;
        let tag = power_tag(p);
        let trace = run.trace.to_table(&format!("cooling_trace_{tag}"))?;
        debug_assert_eq!(trace.columns(), TRACE_HEADER);
        out.table(dir, &trace, &format!("cooling_trace_{tag}.csv"))?;
        out.table(
            dir,
            &run.ensemble.velocity_histogram(edges.clone())?.to_table("cooling_velocities"),
            &format!("cooling_velocities_{tag}.csv"),
        )?;
        let ke0 = run.initial.mean_kinetic_energy();
        let late = run.trace.late_ke(crate::cooling::LATE_FRACTION);
        let theta = run.trace.late_order(crate::cooling::LATE_FRACTION);
        summary.push_row(&[p, ke0, late, late / ke0, theta])?;
        out.value(&format!("KE ratio at {tag}"), &format!("ke_ratio_{tag}"), late / ke0, "");
        out.value(&format!("late order at {tag}"), &format!("theta_{tag}"), theta, "");
    }
    out.table(dir, &summary, "cooling_summary.csv")?;
    Ok(())
}
