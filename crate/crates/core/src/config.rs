//! Run configuration: a TOML file with one table per module, merged over
//! built-in defaults, plus the manifest written next to every run's outputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cooling::CoolingSetup;
use crate::error::{ConfigError, Error, Result};
use crate::focus::FocusSetup;
use crate::phys::{self, a3_to_m3, amu_to_kg, Molecule};
use crate::selector::SelectorParams;
use crate::source::{FluxReport, SourceParams};
use crate::sublimation::{NoiseModel, RampSpec};

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Environment variable that overrides `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "SLOWBEAM_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MoleculeSection {
    /// Catalogue entry; the optional fields below override it.
    pub name: String,
    pub mass_amu: Option<f64>,
    pub alpha_a3: Option<f64>,
    pub sigma_abs: Option<f64>,
    pub sigma_ion: Option<f64>,
}

impl Default for MoleculeSection {
    fn default() -> Self {
        MoleculeSection {
            name: "perfluoroC60-n7".into(),
            mass_amu: None,
            alpha_a3: None,
            sigma_abs: None,
            sigma_ion: None,
        }
    }
}

impl MoleculeSection {
    pub fn resolve(&self) -> Result<Molecule> {
        let mut m = match phys::lookup(&self.name) {
            Some(m) => m,
            None if self.mass_amu.is_some() && self.alpha_a3.is_some() => Molecule {
                name: self.name.clone(),
                mass: 0.0,
                alpha_vol: 0.0,
                sigma_abs: 0.0,
                sigma_ion: 0.0,
                dipole: None,
            },
            None => {
                return Err(Error::domain(format!(
                    "`{}` is not in the catalogue; give mass_amu and alpha_a3",
                    self.name
                )))
            }
        };
        if let Some(v) = self.mass_amu {
            m.mass = amu_to_kg(v);
        }
        if let Some(v) = self.alpha_a3 {
            m.alpha_vol = a3_to_m3(v);
        }
        if let Some(v) = self.sigma_abs {
            m.sigma_abs = v;
        }
        if let Some(v) = self.sigma_ion {
            m.sigma_ion = v;
        }
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSection {
    /// K
    pub temperature: f64,
    /// m/s
    pub drift: f64,
    pub n_samples: usize,
    pub bins: usize,
    /// Upper histogram edge, m/s.
    pub v_max: f64,
    pub count_rate: f64,
    pub detection_efficiency: f64,
    /// m²
    pub detector_area: f64,
    /// m
    pub distance_detector: f64,
    /// m/s
    pub mean_speed: f64,
    /// Where the number density is quoted, m.
    pub density_distance: f64,
}

impl Default for SourceSection {
    fn default() -> Self {
        SourceSection {
            temperature: 302.0,
            drift: 51.0,
            n_samples: 1_000_000,
            bins: 200,
            v_max: 200.0,
            count_rate: 7.5e5,
            detection_efficiency: 1e-4,
            detector_area: 0.075e-4,
            distance_detector: 0.8,
            mean_speed: 44.0,
            density_distance: 3e-3,
        }
    }
}

impl SourceSection {
    pub fn params(&self, mass: f64) -> Result<SourceParams> {
        SourceParams::new(self.temperature, self.drift, mass)
    }

    pub fn flux(&self) -> FluxReport {
        FluxReport {
            count_rate: self.count_rate,
            detection_efficiency: self.detection_efficiency,
            detector_area: self.detector_area,
            distance_detector: self.distance_detector,
            mean_speed: self.mean_speed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.bins == 0 || !(self.v_max > 0.0) {
            return Err(Error::domain("n_samples, bins and v_max must be positive"));
        }
        self.flux().validate()?;
        if !(self.density_distance > 0.0) {
            return Err(Error::domain("density_distance must be positive"));
        }
        SourceParams::new(self.temperature, self.drift, 1.0).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SublimationSection {
    /// kJ/mol
    pub delta_h: f64,
    /// 1/s
    pub prefactor: f64,
    /// K
    pub t_start: f64,
    /// K
    pub t_stop: f64,
    /// K/min
    pub heating_rate: f64,
    /// s
    pub sample_interval: f64,
    pub noise_rel: f64,
    pub noise: NoiseModel,
}

impl Default for SublimationSection {
    fn default() -> Self {
        SublimationSection {
            delta_h: 222.0,
            prefactor: 1e24,
            t_start: 540.0,
            t_stop: 563.0,
            heating_rate: 0.7,
            sample_interval: 10.0,
            noise_rel: 0.02,
            noise: NoiseModel::Gaussian,
        }
    }
}

impl SublimationSection {
    pub fn ramp(&self) -> RampSpec {
        let rate = self.heating_rate / 60.0;
        RampSpec {
            t0: self.t_start,
            heating_rate: rate,
            duration: (self.t_stop - self.t_start) / rate,
            sample_interval: self.sample_interval,
            delta_h: self.delta_h * 1e3,
            prefactor: self.prefactor,
            noise_rel: self.noise_rel,
            noise: self.noise,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.heating_rate > 0.0) || !(self.t_stop > self.t_start) {
            return Err(Error::domain("heating_rate must be positive and t_stop above t_start"));
        }
        if !(self.prefactor > 0.0) || !(self.delta_h >= 0.0) || !(self.noise_rel >= 0.0) {
            return Err(Error::domain("prefactor must be positive, delta_h and noise_rel >= 0"));
        }
        if !(self.sample_interval > 0.0) {
            return Err(Error::domain("sample_interval must be positive"));
        }
        Ok(())
    }
}

/// Defaults for the closed-form optics commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpticsSection {
    /// W
    pub power: f64,
    /// m
    pub waist: f64,
    /// m
    pub wavelength: f64,
    /// Interaction time for photon counting, s.
    pub tau: f64,
    /// J
    pub pulse_energy: f64,
    /// s
    pub pulse_duration: f64,
    /// m
    pub pulse_waist: f64,
    /// Molecule speed, m/s.
    pub speed: f64,
    /// Multiplies the absorption cross-section; gas-phase values may be
    /// several times below solution-phase ones.
    pub sigma_scale: f64,
}

impl Default for OpticsSection {
    fn default() -> Self {
        OpticsSection {
            power: 1.0,
            waist: 100e-6,
            wavelength: 1064e-9,
            tau: 5e-9,
            pulse_energy: 3e-3,
            pulse_duration: 7.5e-12,
            pulse_waist: 1e-3,
            speed: 50.0,
            sigma_scale: 1.0,
        }
    }
}

impl OpticsSection {
    fn validate(&self) -> Result<()> {
        let positive = [
            self.waist,
            self.wavelength,
            self.tau,
            self.pulse_duration,
            self.pulse_waist,
            self.speed,
        ];
        if positive.iter().any(|x| !(*x > 0.0)) || !(self.power >= 0.0) || !(self.pulse_energy >= 0.0) {
            return Err(Error::domain("optics lengths, times and speed must be positive"));
        }
        if !(self.sigma_scale >= 0.0) {
            return Err(Error::domain("sigma_scale must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Write `trajectories.csv` for focus runs.
    pub trajectories: bool,
    pub report_name: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            trajectories: true,
            report_name: "report.md".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub molecule: MoleculeSection,
    pub source: SourceSection,
    pub selector: SelectorParams,
    pub sublimation: SublimationSection,
    pub optics: OpticsSection,
    pub focus: FocusSetup,
    pub cooling: CoolingSetup,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            output_dir: PathBuf::from("slowbeam-out"),
            molecule: MoleculeSection::default(),
            source: SourceSection::default(),
            selector: SelectorParams::default(),
            sublimation: SublimationSection::default(),
            optics: OpticsSection::default(),
            focus: FocusSetup::default(),
            cooling: CoolingSetup::default(),
            output: OutputSection::default(),
        }
    }
}

fn invariant(section: &str, r: Result<()>) -> Result<(), ConfigError> {
    r.map_err(|e| {
        let message = match e {
            Error::Domain(m) => m,
            other => other.to_string(),
        };
        ConfigError::invariant(section, message)
    })
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        invariant("molecule", self.molecule.resolve().map(|_| ()))?;
        invariant("source", self.source.validate())?;
        invariant("selector", self.selector.validate())?;
        invariant("sublimation", self.sublimation.validate())?;
        invariant("optics", self.optics.validate())?;
        invariant("focus", self.focus.validate())?;
        invariant("cooling", self.cooling.validate())?;
        Ok(())
    }

    /// Every optional field set, so serializing it lists all accepted keys.
    fn key_template() -> toml::Table {
        let mut c = RunConfig::default();
        c.molecule.mass_amu = Some(0.0);
        c.molecule.alpha_a3 = Some(0.0);
        c.molecule.sigma_abs = Some(0.0);
        c.molecule.sigma_ion = Some(0.0);
        c.cooling.eta_threshold = Some(0.0);
        toml::Table::try_from(&c).expect("config serializes")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| syntax(text, &e))?;
        // manifest metadata
        table.remove("run");
        check_keys(&table, &RunConfig::key_template())?;
        let config: RunConfig = table.try_into().map_err(|e: toml::de::Error| {
            ConfigError::Syntax {
                line: 0,
                message: e.message().to_string(),
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

fn syntax(text: &str, e: &toml::de::Error) -> Error {
    let line = e
        .span()
        .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
        .unwrap_or(0);
    ConfigError::Syntax {
        line,
        message: e.message().trim().to_string(),
    }
    .into()
}

fn check_keys(user: &toml::Table, template: &toml::Table) -> Result<(), ConfigError> {
    for (key, value) in user {
        let Some(known) = template.get(key) else {
            return Err(ConfigError::UnknownKey {
                section: String::new(),
                key: key.clone(),
            });
        };
        if let (toml::Value::Table(section), toml::Value::Table(known)) = (value, known) {
            if let Some(k) = section.keys().find(|k| !known.contains_key(*k)) {
                return Err(ConfigError::UnknownKey {
                    section: key.clone(),
                    key: k.clone(),
                });
            }
        }
    }
    Ok(())
}

/// Read and validate a configuration file. A manifest is a valid input.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(ConfigError::Missing(path.to_path_buf()).into())
        }
        Err(e) => return Err(Error::io(path, e)),
    };
    RunConfig::parse(&text)
}

/// Fully resolved config followed by a `[run]` table with the tool version
/// and the command line.
pub fn manifest_text(config: &RunConfig, command: &str) -> String {
    let mut run = toml::Table::new();
    run.insert("tool_version".into(), TOOL_VERSION.into());
    run.insert("command".into(), command.into());
    let mut wrapper = toml::Table::new();
    wrapper.insert("run".into(), toml::Value::Table(run));
    format!("{}\n{}", config.to_toml(), toml::to_string(&wrapper).expect("manifest serializes"))
}

pub fn write_manifest(dir: &Path, config: &RunConfig, command: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, manifest_text(config, command)).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
