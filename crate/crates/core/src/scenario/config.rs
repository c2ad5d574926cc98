use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::circuit::{coupling_rate, quantize_netlist, read_netlist, PumpSpec};
use crate::error::{ConfigIssue, LinkError, Result};
use crate::metrics::PulseWidth;
use crate::network::SolverMode;
use crate::physics::QiModel;
use crate::units::{parse_quantity, Dimension};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "f_a")]
    ModeFrequency,
    #[serde(rename = "T_cable")]
    CableTemperature,
    /// Cable length over internal Q (meters); Q_i is swept at fixed length.
    #[serde(rename = "L_over_Qi")]
    LengthOverQi,
}

impl SweepAxis {
    fn dimension(self) -> Dimension {
        match self {
            SweepAxis::ModeFrequency => Dimension::Frequency,
            SweepAxis::CableTemperature => Dimension::Temperature,
            SweepAxis::LengthOverQi => Dimension::Length,
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::ModeFrequency => "f_a",
            SweepAxis::CableTemperature => "T_cable",
            SweepAxis::LengthOverQi => "L_over_Qi",
        })
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "f_a" => Ok(SweepAxis::ModeFrequency),
            "T_cable" => Ok(SweepAxis::CableTemperature),
            "L_over_Qi" => Ok(SweepAxis::LengthOverQi),
            _ => Err(format!("unknown sweep axis {s:?} (expected f_a, T_cable or L_over_Qi)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(format!("unknown output format {s:?} (expected csv or json)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CableSettings {
    pub qi: QiModel<f64>,
    pub length_m: f64,
    pub epsilon_r: f64,
    pub temperature_k: f64,
}

/// Source of the a-mode intrinsic loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum IntrinsicLoss {
    /// `κ_a^i = ω_a / Q`, recomputed whenever `f_a` changes.
    QualityFactor(f64),
    /// Fixed `κ/2π` in Hz.
    RateHz(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PumpDerivation {
    pub netlist: PathBuf,
    pub amplitude_over_pi: f64,
    pub drive_strength: f64,
    pub phi_a: f64,
    pub phi_b: f64,
    pub josephson_energy_j: f64,
    pub mode_frequencies_hz: (f64, f64),
}

/// Transducer parameters. Rates are `κ/2π` and `g/2π` in Hz.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransducerSettings {
    pub f_a_hz: f64,
    pub f_b_hz: f64,
    pub g_hz: f64,
    pub kappa_a_ext_hz: f64,
    pub kappa_b_ext_hz: f64,
    pub a_intrinsic: IntrinsicLoss,
    pub kappa_b_int_hz: f64,
    pub temperature_k: f64,
    pub b_intrinsic_vacuum: bool,
    pub pump: Option<PumpDerivation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PulseSettings {
    /// `BW/2π` in Hz.
    pub bandwidth_hz: f64,
    pub width: PulseWidth,
    pub points: usize,
    /// Grid half-span in bandwidths.
    pub span_bw: f64,
    /// Multiplies ψ after normalization. Anything but 1 is a fault injection
    /// that `check` must catch.
    pub normalization_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    pub axis: SweepAxis,
    /// SI values along the axis.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputSettings {
    pub path: Option<PathBuf>,
    pub format: OutputFormat,
}

/// Regression target carried by shipped scenarios.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Expectation {
    /// Sweep value the target applies to; `None` for point runs.
    pub at: Option<f64>,
    pub metric: String,
    pub value: f64,
    pub tolerance: f64,
    pub relative: bool,
}

impl Expectation {
    pub fn accepts(&self, measured: f64) -> bool {
        let err = (measured - self.value).abs();
        let bound = if self.relative { self.tolerance * self.value.abs() } else { self.tolerance };
        err <= bound
    }
}

/// Fully resolved scenario: SI values, defaults bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub cable: CableSettings,
    pub transducer: TransducerSettings,
    pub pulse: PulseSettings,
    pub solver: SolverMode,
    pub sweep: Option<Sweep>,
    pub output: OutputSettings,
    pub expectations: Vec<Expectation>,
}

pub const DEFAULT_POINTS: usize = 4097;
pub const DEFAULT_SPAN_BW: f64 = 8.0;

impl Scenario {
    /// The reference link: 200 MHz a-mode, 5.3 GHz b-mode, maximally flat
    /// converters with `κ^e/2π = 2g/2π = 50 MHz`, a-mode Q_i = 2×10⁴, b-mode
    /// intrinsic linewidth 50 kHz, 100 m cable with Q_i = 10⁵ and ε_r = 1.7,
    /// everything at 10 mK, pulse bandwidth g/2.
    pub fn reference() -> Self {
        let g_hz = 25e6;
        Self {
            cable: CableSettings {
                qi: QiModel::Constant(1e5),
                length_m: 100.0,
                epsilon_r: 1.7,
                temperature_k: 0.01,
            },
            transducer: TransducerSettings {
                f_a_hz: 200e6,
                f_b_hz: 5.3e9,
                g_hz,
                kappa_a_ext_hz: 2.0 * g_hz,
                kappa_b_ext_hz: 2.0 * g_hz,
                a_intrinsic: IntrinsicLoss::QualityFactor(20e3),
                kappa_b_int_hz: 50e3,
                temperature_k: 0.01,
                b_intrinsic_vacuum: true,
                pump: None,
            },
            pulse: PulseSettings {
                bandwidth_hz: g_hz / 2.0,
                width: PulseWidth::Amplitude,
                points: DEFAULT_POINTS,
                span_bw: DEFAULT_SPAN_BW,
                normalization_scale: 1.0,
            },
            solver: SolverMode::Full,
            sweep: None,
            output: OutputSettings { path: None, format: OutputFormat::Csv },
            expectations: Vec::new(),
        }
    }

    /// Copy with one sweep value applied and the sweep removed.
    pub fn at_axis_value(&self, axis: SweepAxis, value: f64) -> Self {
        let mut s = self.clone();
        s.sweep = None;
        match axis {
            SweepAxis::ModeFrequency => s.transducer.f_a_hz = value,
            SweepAxis::CableTemperature => s.cable.temperature_k = value,
            SweepAxis::LengthOverQi => s.cable.qi = QiModel::Constant(s.cable.length_m / value),
        }
        s
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawValue {
    Number(f64),
    Text(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCable {
    qi: Option<RawValue>,
    qi_table: Option<Vec<(RawValue, RawValue)>>,
    length: Option<RawValue>,
    epsilon_r: Option<RawValue>,
    temperature: Option<RawValue>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPump {
    netlist: PathBuf,
    amplitude_over_pi: f64,
    drive_strength: f64,
    #[serde(default)]
    use_mode_frequencies: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTransducer {
    f_a: Option<RawValue>,
    f_b: Option<RawValue>,
    g: Option<RawValue>,
    kappa_a_ext: Option<RawValue>,
    kappa_b_ext: Option<RawValue>,
    qi_a: Option<RawValue>,
    kappa_a_int: Option<RawValue>,
    kappa_b_int: Option<RawValue>,
    temperature: Option<RawValue>,
    b_intrinsic_vacuum: Option<bool>,
    pump: Option<RawPump>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPulse {
    bandwidth: Option<RawValue>,
    width: Option<PulseWidth>,
    points: Option<usize>,
    span_bw: Option<f64>,
    normalization_scale: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    mode: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    axis: String,
    values: Vec<RawValue>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    path: Option<PathBuf>,
    format: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExpect {
    at: Option<RawValue>,
    metric: String,
    value: f64,
    tolerance: f64,
    #[serde(default)]
    relative: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default)]
    description: Option<String>,
    #[serde(default)]
    cable: RawCable,
    #[serde(default)]
    transducer: RawTransducer,
    #[serde(default)]
    pulse: RawPulse,
    #[serde(default)]
    solver: RawSolver,
    sweep: Option<RawSweep>,
    #[serde(default)]
    output: RawOutput,
    #[serde(default)]
    expect: Vec<RawExpect>,
}

pub const METRICS: [&str; 8] = [
    "eta",
    "n_added_total",
    "n_th",
    "fidelity",
    "qcap_lower_per_g",
    "qcap_upper_per_g",
    "qcap_lower_qubits_s",
    "g_hz",
];

struct Resolver {
    issues: Vec<ConfigIssue>,
}

impl Resolver {
    fn issue(&mut self, section: &str, key: &str, message: impl Into<String>) {
        self.issues.push(ConfigIssue { section: section.into(), key: key.into(), message: message.into() });
    }

    fn value(&mut self, section: &str, key: &str, raw: &Option<RawValue>, dim: Dimension) -> Option<f64> {
        let raw = raw.as_ref()?;
        let parsed = match raw {
            RawValue::Number(v) => Ok(*v),
            RawValue::Text(s) => parse_quantity(s, dim),
        };
        match parsed {
            Ok(v) if v.is_finite() => Some(v),
            Ok(_) => {
                self.issue(section, key, "value must be finite");
                None
            }
            Err(e) => {
                self.issue(section, key, e);
                None
            }
        }
    }

    fn positive(&mut self, section: &str, key: &str, v: Option<f64>) -> Option<f64> {
        match v {
            Some(x) if x > 0.0 => Some(x),
            Some(_) => {
                self.issue(section, key, "must be positive");
                None
            }
            None => None,
        }
    }

    fn non_negative(&mut self, section: &str, key: &str, v: Option<f64>) -> Option<f64> {
        match v {
            Some(x) if x >= 0.0 => Some(x),
            Some(_) => {
                self.issue(section, key, "must be non-negative");
                None
            }
            None => None,
        }
    }
}

/// Parses a scenario file. Relative netlist paths resolve against `base_dir`.
pub fn parse_scenario(text: &str, base_dir: &Path) -> Result<Scenario> {
    let raw: RawScenario = toml::from_str(text)?;
    let _ = raw.description;
    let defaults = Scenario::reference();
    let mut r = Resolver { issues: Vec::new() };

    // cable
    let c = &raw.cable;
    let qi = match (&c.qi, &c.qi_table) {
        (Some(_), Some(_)) => {
            r.issue("cable", "qi", "give either qi or qi_table, not both");
            None
        }
        (Some(_), None) => {
            let q = r.value("cable", "qi", &c.qi, Dimension::Dimensionless);
            r.positive("cable", "qi", q).map(QiModel::Constant)
        }
        (None, Some(rows)) => {
            let mut table = Vec::new();
            for (f, q) in rows {
                let f = r.value("cable", "qi_table", &Some(clone_raw(f)), Dimension::Frequency);
                let q = r.value("cable", "qi_table", &Some(clone_raw(q)), Dimension::Dimensionless);
                if let (Some(f), Some(q)) = (f, q) {
                    table.push((f, q));
                }
            }
            if table.is_empty() || table.iter().any(|&(f, q)| f < 0.0 || q <= 0.0) {
                r.issue("cable", "qi_table", "needs non-empty rows of [frequency, positive Q]");
            }
            if table.windows(2).any(|w| w[1].0 <= w[0].0) {
                r.issue("cable", "qi_table", "frequencies must be strictly increasing");
            }
            Some(QiModel::Table(table))
        }
        (None, None) => Some(defaults.cable.qi.clone()),
    };
    let length = r.value("cable", "length", &c.length, Dimension::Length);
    let length = r.positive("cable", "length", length).or(c.length.is_none().then_some(defaults.cable.length_m));
    let eps = r.value("cable", "epsilon_r", &c.epsilon_r, Dimension::Dimensionless);
    if matches!(eps, Some(e) if e < 1.0) {
        r.issue("cable", "epsilon_r", "must be at least 1");
    }
    let eps = eps.or(c.epsilon_r.is_none().then_some(defaults.cable.epsilon_r));
    let t_cable = r.value("cable", "temperature", &c.temperature, Dimension::Temperature);
    let t_cable = r
        .non_negative("cable", "temperature", t_cable)
        .or(c.temperature.is_none().then_some(defaults.cable.temperature_k));

    // transducer
    let t = &raw.transducer;
    let mut f_a = r.value("transducer", "f_a", &t.f_a, Dimension::Frequency);
    f_a = r.positive("transducer", "f_a", f_a);
    let mut f_b = r.value("transducer", "f_b", &t.f_b, Dimension::Frequency);
    f_b = r.positive("transducer", "f_b", f_b);
    let mut g_hz = r.value("transducer", "g", &t.g, Dimension::Frequency);
    g_hz = r.non_negative("transducer", "g", g_hz);
    let mut pump = None;
    if let Some(p) = &t.pump {
        if t.g.is_some() {
            r.issue("transducer", "g", "give either g or [transducer.pump], not both");
        }
        let path = if p.netlist.is_absolute() { p.netlist.clone() } else { base_dir.join(&p.netlist) };
        match derive_pump(&path, p) {
            Ok(d) => {
                g_hz = Some(d.0);
                if p.use_mode_frequencies {
                    if t.f_a.is_some() || t.f_b.is_some() {
                        r.issue("transducer.pump", "use_mode_frequencies", "conflicts with explicit f_a/f_b");
                    }
                    f_a = Some(d.1.mode_frequencies_hz.0);
                    f_b = Some(d.1.mode_frequencies_hz.1);
                }
                pump = Some(d.1);
            }
            Err(e) => r.issue("transducer.pump", "netlist", e.to_string()),
        }
    }
    let f_a = f_a.or(t.f_a.is_none().then_some(defaults.transducer.f_a_hz));
    let f_b = f_b.or(t.f_b.is_none().then_some(defaults.transducer.f_b_hz));
    let g_hz = g_hz.or((t.g.is_none() && t.pump.is_none()).then_some(defaults.transducer.g_hz));
    let kae = r.value("transducer", "kappa_a_ext", &t.kappa_a_ext, Dimension::Frequency);
    let kae = r.non_negative("transducer", "kappa_a_ext", kae);
    let kbe = r.value("transducer", "kappa_b_ext", &t.kappa_b_ext, Dimension::Frequency);
    let kbe = r.non_negative("transducer", "kappa_b_ext", kbe);
    let a_intrinsic = match (&t.qi_a, &t.kappa_a_int) {
        (Some(_), Some(_)) => {
            r.issue("transducer", "qi_a", "give either qi_a or kappa_a_int, not both");
            None
        }
        (Some(_), None) => {
            let q = r.value("transducer", "qi_a", &t.qi_a, Dimension::Dimensionless);
            r.positive("transducer", "qi_a", q).map(IntrinsicLoss::QualityFactor)
        }
        (None, Some(_)) => {
            let k = r.value("transducer", "kappa_a_int", &t.kappa_a_int, Dimension::Frequency);
            r.non_negative("transducer", "kappa_a_int", k).map(IntrinsicLoss::RateHz)
        }
        (None, None) => Some(defaults.transducer.a_intrinsic),
    };
    let kbi = r.value("transducer", "kappa_b_int", &t.kappa_b_int, Dimension::Frequency);
    let kbi = r
        .non_negative("transducer", "kappa_b_int", kbi)
        .or(t.kappa_b_int.is_none().then_some(defaults.transducer.kappa_b_int_hz));
    let t_tr = r.value("transducer", "temperature", &t.temperature, Dimension::Temperature);
    let t_tr = r
        .non_negative("transducer", "temperature", t_tr)
        .or(t.temperature.is_none().then_some(defaults.transducer.temperature_k));

    // pulse
    let p = &raw.pulse;
    let bw = r.value("pulse", "bandwidth", &p.bandwidth, Dimension::Frequency);
    let bw = r.positive("pulse", "bandwidth", bw);
    let points = p.points.unwrap_or(DEFAULT_POINTS);
    if points < 3 || points % 2 == 0 {
        r.issue("pulse", "points", "must be odd and at least 3");
    }
    let span_bw = p.span_bw.unwrap_or(DEFAULT_SPAN_BW);
    if !(span_bw > 0.0) {
        r.issue("pulse", "span_bw", "must be positive");
    }
    let normalization_scale = p.normalization_scale.unwrap_or(1.0);

    let solver = match raw.solver.mode.as_deref() {
        None => SolverMode::default(),
        Some(m) => m.parse().unwrap_or_else(|e: String| {
            r.issue("solver", "mode", e);
            SolverMode::default()
        }),
    };

    let sweep = match &raw.sweep {
        None => None,
        Some(s) => match s.axis.parse::<SweepAxis>() {
            Ok(axis) => {
                let mut values = Vec::new();
                for v in &s.values {
                    if let Some(x) = r.value("sweep", "values", &Some(clone_raw(v)), axis.dimension()) {
                        values.push(x);
                    }
                }
                if s.values.is_empty() {
                    r.issue("sweep", "values", "sweep needs at least one value");
                }
                if axis != SweepAxis::CableTemperature && values.iter().any(|&v| v <= 0.0) {
                    r.issue("sweep", "values", "values must be positive");
                }
                Some(Sweep { axis, values })
            }
            Err(e) => {
                r.issue("sweep", "axis", e);
                None
            }
        },
    };

    let format = match raw.output.format.as_deref() {
        None => OutputFormat::default(),
        Some(f) => f.parse().unwrap_or_else(|e: String| {
            r.issue("output", "format", e);
            OutputFormat::default()
        }),
    };

    let mut expectations = Vec::new();
    for e in &raw.expect {
        if !METRICS.contains(&e.metric.as_str()) {
            r.issue("expect", "metric", format!("unknown metric {:?}", e.metric));
        }
        let at = match (&e.at, &sweep) {
            (Some(v), Some(s)) => r.value("expect", "at", &Some(clone_raw(v)), s.axis.dimension()),
            (Some(_), None) => {
                r.issue("expect", "at", "only meaningful with a [sweep] section");
                None
            }
            (None, _) => None,
        };
        expectations.push(Expectation {
            at,
            metric: e.metric.clone(),
            value: e.value,
            tolerance: e.tolerance,
            relative: e.relative,
        });
    }

    if let (Some(fa), Some(g)) = (f_a, g_hz) {
        if g >= fa {
            r.issue("transducer", "g", "conversion rate must stay below f_a");
        }
    }

    if !r.issues.is_empty() {
        return Err(LinkError::InvalidConfig(r.issues));
    }
    let g_hz = g_hz.expect("resolved");
    Ok(Scenario {
        cable: CableSettings {
            qi: qi.expect("resolved"),
            length_m: length.expect("resolved"),
            epsilon_r: eps.expect("resolved"),
            temperature_k: t_cable.expect("resolved"),
        },
        transducer: TransducerSettings {
            f_a_hz: f_a.expect("resolved"),
            f_b_hz: f_b.expect("resolved"),
            g_hz,
            kappa_a_ext_hz: kae.unwrap_or(2.0 * g_hz),
            kappa_b_ext_hz: kbe.unwrap_or(2.0 * g_hz),
            a_intrinsic: a_intrinsic.expect("resolved"),
            kappa_b_int_hz: kbi.expect("resolved"),
            temperature_k: t_tr.expect("resolved"),
            b_intrinsic_vacuum: t.b_intrinsic_vacuum.unwrap_or(true),
            pump,
        },
        pulse: PulseSettings {
            bandwidth_hz: bw.unwrap_or(g_hz / 2.0),
            width: p.width.unwrap_or_default(),
            points,
            span_bw,
            normalization_scale,
        },
        solver,
        sweep,
        output: OutputSettings { path: raw.output.path.clone(), format },
        expectations,
    })
}

fn clone_raw(v: &RawValue) -> RawValue {
    match v {
        RawValue::Number(x) => RawValue::Number(*x),
        RawValue::Text(s) => RawValue::Text(s.clone()),
    }
}

/// Quantizes the netlist and evaluates `g/2π` from the pump settings.
fn derive_pump(path: &Path, p: &RawPump) -> Result<(f64, PumpDerivation)> {
    let netlist = read_netlist(path)?;
    let modes = quantize_netlist(&netlist)?;
    if modes.modes.len() < 2 {
        return Err(LinkError::InvalidNetlist(format!(
            "need at least two oscillatory modes, found {}",
            modes.modes.len()
        )));
    }
    let a = modes.lowest().expect("two modes");
    let b = modes.highest().expect("two modes");
    let pump = PumpSpec::from_amplitude_over_pi(p.amplitude_over_pi, p.drive_strength);
    let ej = netlist.junction_energy();
    let g = coupling_rate(ej, &pump, a.phi, b.phi);
    let two_pi = 2.0 * std::f64::consts::PI;
    Ok((
        g / two_pi,
        PumpDerivation {
            netlist: path.to_path_buf(),
            amplitude_over_pi: p.amplitude_over_pi,
            drive_strength: p.drive_strength,
            phi_a: a.phi,
            phi_b: b.phi,
            josephson_energy_j: ej,
            mode_frequencies_hz: (a.omega / two_pi, b.omega / two_pi),
        },
    ))
}

pub fn read_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_scenario(&text, base)
}
