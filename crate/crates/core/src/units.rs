//! Physical constants (SI, CODATA 2018 exact where defined) and engineering
//! unit-suffix parsing for config files.

use std::fmt;

pub const PLANCK: f64 = 6.626_070_15e-34;
pub const HBAR: f64 = PLANCK / (2.0 * std::f64::consts::PI);
pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Superconducting flux quantum h/2e.
pub const FLUX_QUANTUM: f64 = PLANCK / (2.0 * ELEMENTARY_CHARGE);
/// Reduced flux quantum ħ/2e.
pub const REDUCED_FLUX_QUANTUM: f64 = HBAR / (2.0 * ELEMENTARY_CHARGE);
/// h/k_B in kelvin per hertz.
pub const PLANCK_OVER_BOLTZMANN: f64 = PLANCK / BOLTZMANN;

/// Physical dimension expected for a configuration value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    /// Hz. Also used for rates quoted as ω/2π.
    Frequency,
    Temperature,
    Length,
    Capacitance,
    Inductance,
    /// Energies are quoted as E/h in Hz and resolve to joules.
    Energy,
    Dimensionless,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dimension::Frequency => "frequency",
            Dimension::Temperature => "temperature",
            Dimension::Length => "length",
            Dimension::Capacitance => "capacitance",
            Dimension::Inductance => "inductance",
            Dimension::Energy => "energy",
            Dimension::Dimensionless => "dimensionless",
        };
        f.write_str(s)
    }
}

fn suffix_scale(dim: Dimension, suffix: &str) -> Option<f64> {
    let s = suffix;
    let hz = |x: &str| match x {
        "Hz" => Some(1.0),
        "kHz" => Some(1e3),
        "MHz" => Some(1e6),
        "GHz" => Some(1e9),
        "THz" => Some(1e12),
        _ => None,
    };
    match dim {
        Dimension::Frequency => hz(s),
        Dimension::Energy => match s {
            "J" => Some(1.0),
            _ => hz(s).map(|k| k * PLANCK),
        },
        Dimension::Temperature => match s {
            "K" => Some(1.0),
            "mK" => Some(1e-3),
            "uK" | "µK" => Some(1e-6),
            _ => None,
        },
        Dimension::Length => match s {
            "m" => Some(1.0),
            "km" => Some(1e3),
            "cm" => Some(1e-2),
            "mm" => Some(1e-3),
            "um" | "µm" => Some(1e-6),
            _ => None,
        },
        Dimension::Capacitance => match s {
            "F" => Some(1.0),
            "uF" | "µF" => Some(1e-6),
            "nF" => Some(1e-9),
            "pF" => Some(1e-12),
            "fF" => Some(1e-15),
            _ => None,
        },
        Dimension::Inductance => match s {
            "H" => Some(1.0),
            "mH" => Some(1e-3),
            "uH" | "µH" => Some(1e-6),
            "nH" => Some(1e-9),
            "pH" => Some(1e-12),
            _ => None,
        },
        Dimension::Dimensionless => None,
    }
}

/// Parses `"<number> [suffix]"` into an SI value.
///
/// A bare number is taken as already SI (for energies: joules). Whitespace
/// between number and suffix is optional: `"16.3pF"` and `"16.3 pF"` both work.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64, String> {
    let t = text.trim();
    let (value, suffix) = t
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(t.len()))
        .rev()
        .filter(|&i| i > 0)
        .find_map(|i| t[..i].trim().parse::<f64>().ok().map(|v| (v, &t[i..])))
        .ok_or_else(|| format!("cannot parse number in {text:?}"))?;
    let suffix = suffix.trim();
    if suffix.is_empty() {
        return Ok(value);
    }
    let scale = suffix_scale(dim, suffix)
        .ok_or_else(|| format!("unknown {dim} unit {suffix:?} in {text:?}"))?;
    Ok(value * scale)
}
