//! Command-line quantities with unit suffixes, e.g. `200A3`, `100um`, `15MW`.

use crate::phys::{amu_to_kg, ev_to_j};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    Length,
    Volume,
    Power,
    Time,
    Energy,
    Mass,
    Area,
    Speed,
    Temperature,
    Frequency,
}

impl Dim {
    fn units(self) -> &'static [(&'static str, f64)] {
        match self {
            Dim::Length => &[("m", 1.0), ("cm", 1e-2), ("mm", 1e-3), ("um", 1e-6), ("nm", 1e-9)],
            Dim::Volume => &[("m3", 1.0), ("A3", 1e-30), ("cm3", 1e-6)],
            Dim::Power => &[("W", 1.0), ("mW", 1e-3), ("kW", 1e3), ("MW", 1e6), ("GW", 1e9)],
            Dim::Time => &[("s", 1.0), ("ms", 1e-3), ("us", 1e-6), ("ns", 1e-9), ("ps", 1e-12), ("fs", 1e-15)],
            Dim::Energy => &[
                ("J", 1.0),
                ("mJ", 1e-3),
                ("uJ", 1e-6),
                ("eV", f64::NAN),
                ("meV", f64::NAN),
                ("ueV", f64::NAN),
                ("neV", f64::NAN),
            ],
            Dim::Mass => &[("kg", 1.0), ("amu", f64::NAN)],
            Dim::Area => &[("m2", 1.0), ("cm2", 1e-4), ("mm2", 1e-6)],
            Dim::Speed => &[("m/s", 1.0), ("mps", 1.0)],
            Dim::Temperature => &[("K", 1.0)],
            Dim::Frequency => &[("Hz", 1.0), ("kHz", 1e3)],
        }
    }
}

fn convert(value: f64, unit: &str) -> Option<f64> {
    Some(match unit {
        "eV" => ev_to_j(value),
        "meV" => ev_to_j(value * 1e-3),
        "ueV" => ev_to_j(value * 1e-6),
        "neV" => ev_to_j(value * 1e-9),
        "amu" => amu_to_kg(value),
        _ => return None,
    })
}

/// Parse `text` as a number with an optional unit suffix of dimension `dim`.
/// A bare number is taken as SI.
pub fn parse_quantity(text: &str, dim: Dim) -> Result<f64, String> {
    let text = text.trim();
    let split = text
        .char_indices()
        .rev()
        .find(|(i, _)| text[..*i + 1].parse::<f64>().is_ok())
        .map(|(i, c)| i + c.len_utf8())
        .ok_or_else(|| format!("`{text}` does not start with a number"))?;
    let value: f64 = text[..split].parse().map_err(|e| format!("{e}"))?;
    if !value.is_finite() {
        return Err(format!("`{text}` is not finite"));
    }
    let unit = text[split..].trim();
    if unit.is_empty() {
        return Ok(value);
    }
    let Some((_, scale)) = dim.units().iter().find(|(u, _)| *u == unit) else {
        let known: Vec<&str> = dim.units().iter().map(|(u, _)| *u).collect();
        return Err(format!("unit `{unit}` is not a {dim:?} unit (use one of {})", known.join(", ")));
    };
    if scale.is_nan() {
        Ok(convert(value, unit).expect("listed unit converts"))
    } else {
        Ok(value * scale)
    }
}

macro_rules! parser {
    ($name:ident, $dim:expr) => {
        pub fn $name(s: &str) -> Result<f64, String> {
            parse_quantity(s, $dim)
        }
    };
}

parser!(length, Dim::Length);
parser!(volume, Dim::Volume);
parser!(power, Dim::Power);
parser!(time, Dim::Time);
parser!(energy, Dim::Energy);
parser!(mass, Dim::Mass);
parser!(area, Dim::Area);
parser!(speed, Dim::Speed);
parser!(temperature, Dim::Temperature);
parser!(frequency, Dim::Frequency);

/// `3.3356e-09` style: fixed significant digits, signed two-digit exponent.
pub fn sci(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{:.*e}", digits.saturating_sub(1), x);
    let (mant, exp) = s.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    format!("{mant}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
}
