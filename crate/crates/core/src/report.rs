//! Markdown summary of a run directory: each known output is checked and
//! given a verdict.

use std::fmt::Write as _;
use std::path::Path;

use crate::config::{load_config, RunConfig, MANIFEST_FILE};
use crate::cooling::{ORGANIZED_THETA, TRACE_HEADER};
use crate::error::{ConfigError, Error, Result};
use crate::selector::selector_setpoint;
use crate::source::HISTOGRAM_HEADER;
use crate::sublimation::{RAMP_HEADER, REFERENCE_ENTHALPIES, RESULT_HEADER};
use crate::table::SeriesTable;

pub const FOCUS_GAIN_SINGLE: (f64, f64) = (1.5, 3.0);
pub const FOCUS_GAIN_DUAL: (f64, f64) = (3.0, 5.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Info,
}

impl Verdict {
    fn of(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    fn label(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Info => "info",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub section: &'static str,
    pub verdict: Verdict,
    pub text: String,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub text: String,
    pub file_name: String,
    pub checks: Vec<Check>,
    pub passed: usize,
    pub failed: usize,
    /// Unreadable or non-finite outputs.
    pub broken: Vec<String>,
}

impl Report {
    /// Error when any output was unreadable; verdict failures alone are not
    /// errors.
    pub fn into_result(self) -> Result<()> {
        if self.broken.is_empty() {
            Ok(())
        } else {
            Err(Error::Table(self.broken.join("; ")))
        }
    }
}

struct Builder<'a> {
    dir: &'a Path,
    config: RunConfig,
    checks: Vec<Check>,
    broken: Vec<String>,
}

impl Builder<'_> {
    fn check(&mut self, section: &'static str, verdict: Verdict, text: String) {
        self.checks.push(Check { section, verdict, text });
    }

    fn table(&mut self, file: &str, header: Option<&[&str]>) -> Option<SeriesTable> {
        let path = self.dir.join(file);
        if !path.exists() {
            return None;
        }
        let parsed = SeriesTable::read_csv(&path).and_then(|t| {
            if let Some(h) = header {
                t.expect_header(h)?;
            }
            Ok(t)
        });
        match parsed {
            Ok(t) if t.is_empty() => {
                self.broken.push(format!("{file}: no rows"));
                None
            }
            Ok(t) => Some(t),
            Err(e) => {
                self.broken.push(e.to_string());
                None
            }
        }
    }

    fn selector(&mut self) {
        const S: &str = "Selector transmission (Fig. 2b)";
        let Some(t) = self.table("selected_histogram.csv", Some(&HISTOGRAM_HEADER)) else {
            return;
        };
        let v = t.column("v_mps").unwrap_or_default();
        let c = t.column("count").unwrap_or_default();
        let total: f64 = c.iter().sum();
        let sel = self.config.selector;
        let setpoint = selector_setpoint(&sel);
        if total <= 0.0 {
            self.check(S, Verdict::Fail, "no transmitted molecules".into());
            return;
        }
        let mean = v.iter().zip(&c).map(|(v, c)| v * c).sum::<f64>() / total;
        let fwhm = sel.fwhm_rel * setpoint;
        self.check(
            S,
            Verdict::of((mean - setpoint).abs() <= fwhm),
            format!(
                "transmitted mean {mean:.3} m/s vs setpoint {setpoint:.3} m/s (FWHM {fwhm:.3} m/s), {total:.0} molecules"
            ),
        );
    }

    fn velocity(&mut self) {
        const S: &str = "Speed distribution (Fig. 3)";
        if let Some(t) = self.table("velocity_histogram.csv", Some(&HISTOGRAM_HEADER)) {
            let total: f64 = t.column("count").unwrap_or_default().iter().sum();
            self.check(S, Verdict::Info, format!("histogram of {total:.0} samples in {} bins", t.len()));
        }
        let Some(t) = self.table("velocity_fit.csv", None) else {
            return;
        };
        let (Some(drift), Some(temp)) = (t.column("drift_mps"), t.column("T_K")) else {
            self.broken.push("velocity_fit.csv: missing drift_mps or T_K".into());
            return;
        };
        let src = self.config.source.clone();
        let (d, tk) = (drift[0], temp[0]);
        self.check(
            S,
            Verdict::of((d - src.drift).abs() <= 1.0),
            format!("fitted drift {d:.3} m/s, configured {:.3} m/s (tolerance 1 m/s)", src.drift),
        );
        self.check(
            S,
            Verdict::of((tk - src.temperature).abs() <= 10.0),
            format!("fitted temperature {tk:.2} K, configured {:.2} K (tolerance 10 K)", src.temperature),
        );
    }

    fn enthalpy(&mut self) {
        const S: &str = "Sublimation enthalpies (Table I)";
        let mut ramps: Vec<String> = list_files(self.dir)
            .into_iter()
            .filter(|f| f.starts_with("ramp") && f.ends_with(".csv"))
            .collect();
        ramps.sort();
        for f in &ramps {
            if let Some(t) = self.table(f, Some(&RAMP_HEADER)) {
                self.check(S, Verdict::Info, format!("{f}: {} samples", t.len()));
            }
        }
        let path = self.dir.join("enthalpy.csv");
        let Ok(text) = std::fs::read_to_string(&path) else {
            return;
        };
        let rows = match parse_enthalpy(&text) {
            Ok(r) => r,
            Err(e) => {
                self.broken.push(format!("enthalpy.csv: {e}"));
                return;
            }
        };
        for (name, dh, err) in rows {
            let reference = REFERENCE_ENTHALPIES
                .iter()
                .find(|(n, ..)| name == format!("perfluoroC60-n{n}"));
            match reference {
                Some((_, _, ref_dh, ref_err)) => self.check(
                    S,
                    Verdict::of((dh - ref_dh).abs() <= *ref_err),
                    format!("{name}: {dh:.1} ± {err:.1} kJ/mol vs reference {ref_dh} ± {ref_err}"),
                ),
                None => self.check(S, Verdict::Info, format!("{name}: {dh:.1} ± {err:.1} kJ/mol")),
            }
        }
    }

    fn focus(&mut self) {
        const S: &str = "Focusing gain (Fig. 4d)";
        self.table("final_velocities.csv", Some(&["power_W", "vy_mps", "count"]));
        self.table("trajectories.csv", Some(&["id", "t", "x", "y", "z", "vx", "vy", "vz"]));
        let Some(t) = self.table(
            "summary.csv",
            Some(&["power_W", "hit_fraction", "gain", "dose_p50", "dose_p90", "dose_max", "rms_vy_mps"]),
        ) else {
            return;
        };
        let f = self.config.focus.clone();
        let (lo, hi) = if f.dual { FOCUS_GAIN_DUAL } else { FOCUS_GAIN_SINGLE };
        let rows: Vec<Vec<f64>> = t.rows().to_vec();
        for r in &rows {
            let (p, gain, p90) = (r[0], r[2], r[4]);
            if p == f.reference_power && p > 0.0 {
                self.check(
                    S,
                    Verdict::of((lo..=hi).contains(&gain)),
                    format!(
                        "forward gain {gain:.3} at {p:.3e} W ({} field), band [{lo}, {hi}]",
                        if f.dual { "dual" } else { "single" }
                    ),
                );
            } else if p > 0.0 {
                self.check(S, Verdict::Info, format!("forward gain {gain:.3} at {p:.3e} W"));
            }
            if p > 0.0 {
                self.check(S, Verdict::Info, format!("90th percentile photon dose {p90:.1} at {p:.3e} W"));
            }
        }
    }

    fn cooling(&mut self) {
        const S: &str = "Cavity cooling (Fig. 5a/b)";
        let mut traces: Vec<String> = list_files(self.dir)
            .into_iter()
            .filter(|f| {
                (f.starts_with("cooling_trace_") || f.starts_with("cooling_velocities_")) && f.ends_with(".csv")
            })
            .collect();
        traces.sort();
        for f in &traces {
            let header: &[&str] = if f.starts_with("cooling_trace_") {
                &TRACE_HEADER
            } else {
                &HISTOGRAM_HEADER
            };
            self.table(f, Some(header));
        }
        let pt = self.config.cooling.threshold_power;
        if let Some(t) = self.table(
            "cooling_summary.csv",
            Some(&["power_W", "ke_initial_J", "ke_late_J", "ke_ratio", "late_theta"]),
        ) {
            for r in t.rows().to_vec() {
                let (p, ratio, theta) = (r[0], r[3], r[4]);
                let text = format!("{p:.4e} W: late KE ratio {ratio:.3}, late order {theta:.3}");
                let verdict = if p <= pt / 3.0 * (1.0 + 1e-9) {
                    Verdict::of((ratio - 1.0).abs() < 0.1)
                } else if p >= 3.0 * pt * (1.0 - 1e-9) {
                    Verdict::of(ratio < 0.8)
                } else {
                    Verdict::Info
                };
                let rule = match verdict {
                    Verdict::Info => "",
                    _ if p < pt => " (expect |ratio - 1| < 0.1)",
                    _ => " (expect ratio < 0.8)",
                };
                self.check(S, verdict, format!("{text}{rule}"));
            }
        }
        if let Some(t) = self.table("threshold_scan.csv", Some(&["power_W", "late_theta", "ke_ratio"])) {
            let mut pts: Vec<(f64, f64)> = t.rows().iter().map(|r| (r[0], r[1])).collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            match pts.iter().position(|(_, th)| *th > ORGANIZED_THETA) {
                Some(i) => {
                    let hi = pts[i].0;
                    let lo = if i > 0 { pts[i - 1].0 } else { hi };
                    self.check(
                        S,
                        Verdict::of(lo <= pt && pt <= hi),
                        format!("threshold bracket [{lo:.4e}, {hi:.4e}] W vs calibrated {pt:.4e} W"),
                    );
                }
                None => self.check(S, Verdict::Fail, "no scanned power organizes".into()),
            }
        }
    }

    /// Any remaining CSV is still checked for finiteness.
    fn others(&mut self, known: &[String]) {
        let mut rest: Vec<String> = list_files(self.dir)
            .into_iter()
            .filter(|f| f.ends_with(".csv") && f != "enthalpy.csv" && !known.contains(f))
            .collect();
        rest.sort();
        for f in rest {
            self.table(&f, None);
        }
    }
}

fn list_files(dir: &Path) -> Vec<String> {
    std::fs::read_dir(dir)
        .map(|it| {
            it.filter_map(|e| e.ok())
                .filter(|e| e.path().is_file())
                .map(|e| e.file_name().to_string_lossy().into_owned())
                .collect()
        })
        .unwrap_or_default()
}

fn parse_enthalpy(text: &str) -> std::result::Result<Vec<(String, f64, f64)>, String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if lines.next().map(str::trim) != Some(RESULT_HEADER) {
        return Err(format!("header is not `{RESULT_HEADER}`"));
    }
    let columns: Vec<&str> = RESULT_HEADER.split(',').collect();
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != columns.len() {
            return Err(format!("line {}: expected {} fields", i + 2, columns.len()));
        }
        let mut nums = [0.0; 3];
        for (k, s) in f[1..].iter().enumerate() {
            let x: f64 = s
                .parse()
                .map_err(|_| format!("line {}: cannot parse `{s}` in column `{}`", i + 2, columns[k + 1]))?;
            if !x.is_finite() {
                return Err(format!("non-finite value in column `{}`", columns[k + 1]));
            }
            nums[k] = x;
        }
        out.push((f[0].to_string(), nums[1], nums[2]));
    }
    Ok(out)
}

/// Build the report for `dir`. A missing manifest is an error; unreadable
/// outputs are listed in [`Report::broken`].
pub fn report(dir: &Path) -> Result<Report> {
    let manifest = dir.join(MANIFEST_FILE);
    if !manifest.is_file() {
        return Err(ConfigError::Missing(manifest).into());
    }
    let config = load_config(&manifest)?;
    let text = std::fs::read_to_string(&manifest).map_err(|e| Error::io(&manifest, e))?;
    let run: toml::Table = toml::from_str(&text)
        .ok()
        .and_then(|t: toml::Table| t.get("run").and_then(|r| r.as_table()).cloned())
        .unwrap_or_default();
    let file_name = config.output.report_name.clone();
    let mut b = Builder {
        dir,
        config,
        checks: Vec::new(),
        broken: Vec::new(),
    };
    b.selector();
    b.velocity();
    b.enthalpy();
    b.focus();
    b.cooling();
    let known: Vec<String> = [
        "selected_histogram.csv",
        "velocity_histogram.csv",
        "velocity_fit.csv",
        "summary.csv",
        "final_velocities.csv",
        "trajectories.csv",
        "cooling_summary.csv",
        "threshold_scan.csv",
    ]
    .iter()
    .map(|s| s.to_string())
    .chain(
        list_files(dir)
            .into_iter()
            .filter(|f| f.starts_with("ramp") || f.starts_with("cooling_trace_") || f.starts_with("cooling_velocities_")),
    )
    .collect();
    b.others(&known);

    let mut md = String::from("# Run report\n\n");
    let field = |k: &str| run.get(k).and_then(|v| v.as_str()).unwrap_or("?").to_string();
    let _ = writeln!(md, "- directory: `{}`", dir.display());
    let _ = writeln!(md, "- tool version: {}", field("tool_version"));
    let _ = writeln!(md, "- command: `{}`", field("command"));
    let _ = writeln!(md, "- seed: {}", b.config.seed);
    let mut sections: Vec<&str> = Vec::new();
    for c in &b.checks {
        if !sections.contains(&c.section) {
            sections.push(c.section);
        }
    }
    if sections.is_empty() && b.broken.is_empty() {
        md.push_str("\nNo recognized outputs.\n");
    }
    for s in sections {
        let _ = writeln!(md, "\n## {s}\n");
        for c in b.checks.iter().filter(|c| c.section == s) {
            let _ = writeln!(md, "- **{}** {}", c.verdict.label(), c.text);
        }
    }
    if !b.broken.is_empty() {
        md.push_str("\n## Unreadable outputs\n\n");
        for e in &b.broken {
            let _ = writeln!(md, "- **FAIL** {e}");
        }
    }
    let passed = b.checks.iter().filter(|c| c.verdict == Verdict::Pass).count();
    let failed = b.checks.iter().filter(|c| c.verdict == Verdict::Fail).count() + b.broken.len();
    let _ = writeln!(md, "\n{passed} passed, {failed} failed.");
    Ok(Report {
        text: md,
        file_name,
        checks: b.checks,
        passed,
        failed,
        broken: b.broken,
    })
}
