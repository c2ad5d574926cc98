use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LinkError, Result};
use crate::metrics::{gaussian_pulse_with, summarize, ChannelSummary, PulseSpec, MIN_SPAN_BANDWIDTHS};
use crate::network::{assemble_link, verify_passivity, FrequencyGrid, NetworkResponse};
use crate::physics::{CableSpec, TransducerSpec};
use crate::report::{Diagnostics, LinkReport, ReportRow, TOOL_VERSION};

use super::config::{Expectation, IntrinsicLoss, Scenario, Sweep};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Relative change of η, F and Q_L tolerated when the grid is refined.
pub const GRID_CONVERGENCE_TOLERANCE: f64 = 1e-4;
/// Allowed deviation of Σ|ψ|² from 1.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

impl Scenario {
    /// Conversion rate in rad/s.
    pub fn g(&self) -> f64 {
        TWO_PI * self.transducer.g_hz
    }

    /// Pulse bandwidth in rad/s.
    pub fn bandwidth(&self) -> f64 {
        TWO_PI * self.pulse.bandwidth_hz
    }

    /// Both converters share these parameters.
    pub fn transducer_spec(&self) -> TransducerSpec<f64> {
        let t = &self.transducer;
        let omega_a = TWO_PI * t.f_a_hz;
        let kappa_a_int = match t.a_intrinsic {
            IntrinsicLoss::QualityFactor(q) => omega_a / q,
            IntrinsicLoss::RateHz(k) => TWO_PI * k,
        };
        TransducerSpec {
            omega_a,
            omega_b: TWO_PI * t.f_b_hz,
            kappa_a_ext: TWO_PI * t.kappa_a_ext_hz,
            kappa_b_ext: TWO_PI * t.kappa_b_ext_hz,
            kappa_a_int,
            kappa_b_int: TWO_PI * t.kappa_b_int_hz,
            g: self.g(),
            temperature: t.temperature_k,
            b_intrinsic_vacuum: t.b_intrinsic_vacuum,
        }
    }

    pub fn cable_spec(&self) -> CableSpec<f64> {
        CableSpec {
            qi: self.cable.qi.clone(),
            length: self.cable.length_m,
            epsilon_r: self.cable.epsilon_r,
            temperature: self.cable.temperature_k,
        }
    }

    pub fn grid(&self) -> Result<FrequencyGrid<f64>> {
        let spec = self.transducer_spec();
        FrequencyGrid::new(self.pulse.points, self.pulse.span_bw * self.bandwidth(), spec.omega_a, spec.omega_b)
    }

    /// Pulse on `grid`, including any configured normalization fault.
    pub fn pulse_on(&self, grid: &FrequencyGrid<f64>) -> Result<PulseSpec<f64>> {
        let mut pulse = gaussian_pulse_with(grid.offsets(), self.bandwidth(), 0.0, self.pulse.width)?;
        let scale = self.pulse.normalization_scale;
        if scale != 1.0 {
            for a in &mut pulse.amplitudes {
                *a *= scale;
            }
        }
        Ok(pulse)
    }

    pub fn response_on(&self, grid: &FrequencyGrid<f64>) -> Result<NetworkResponse<f64>> {
        let t = self.transducer_spec();
        assemble_link(&t, &self.cable_spec(), &t, grid, self.solver)
    }

    /// Metrics on an explicit grid.
    pub fn summary_on(&self, grid: &FrequencyGrid<f64>) -> Result<(ChannelSummary, NetworkResponse<f64>)> {
        let resp = self.response_on(grid)?;
        let pulse = self.pulse_on(grid)?;
        let summary = summarize(&resp, &pulse, self.g())?;
        Ok((summary, resp))
    }

    fn row_context(&self, axis_value: Option<f64>) -> ReportRow {
        ReportRow {
            axis_value,
            f_a_hz: self.transducer.f_a_hz,
            t_cable_k: self.cable.temperature_k,
            qi: self.cable.qi.at(self.transducer.f_a_hz),
            l_m: self.cable.length_m,
            summary: None,
            diagnostics: None,
            error: None,
        }
    }

    /// The point scenarios a run evaluates, paired with their axis value.
    pub fn points(&self) -> Vec<(Option<f64>, Scenario)> {
        match &self.sweep {
            None => vec![(None, self.clone())],
            Some(Sweep { axis, values }) => {
                values.iter().map(|&v| (Some(v), self.at_axis_value(*axis, v))).collect()
            }
        }
    }
}

fn relative_change(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Largest relative change of η, F and Q_L between `grid` and its refinement.
pub fn grid_convergence(s: &Scenario, grid: &FrequencyGrid<f64>, coarse: &ChannelSummary) -> Result<f64> {
    let (fine, _) = s.summary_on(&grid.refined())?;
    Ok([
        relative_change(coarse.eta, fine.eta),
        relative_change(coarse.fidelity, fine.fidelity),
        relative_change(coarse.qcap_lower_qubits_s, fine.qcap_lower_qubits_s),
    ]
    .into_iter()
    .fold(0.0, f64::max))
}

fn evaluate(s: &Scenario, axis_value: Option<f64>) -> ReportRow {
    let mut row = s.row_context(axis_value);
    let outcome = (|| -> Result<(ChannelSummary, Diagnostics)> {
        let grid = s.grid()?;
        let (summary, resp) = s.summary_on(&grid)?;
        summary.check_ranges()?;
        let passivity = verify_passivity(&resp);
        let convergence = grid_convergence(s, &grid, &summary)?;
        Ok((
            summary,
            Diagnostics {
                passivity_max: passivity.max_row_sum,
                grid_convergence: Some(convergence),
                warnings: resp.warnings.clone(),
            },
        ))
    })();
    match outcome {
        Ok((summary, diag)) => {
            row.summary = Some(summary);
            row.diagnostics = Some(diag);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

fn report(s: &Scenario, rows: Vec<ReportRow>) -> LinkReport {
    LinkReport {
        tool_version: TOOL_VERSION.to_owned(),
        mode: s.solver,
        axis: s.sweep.as_ref().map(|sw| sw.axis),
        config: s.clone(),
        rows,
    }
}

/// Evaluates a scenario without a sweep axis.
pub fn run_point(s: &Scenario) -> Result<LinkReport> {
    if s.sweep.is_some() {
        return Err(LinkError::InvalidSpec("run_point needs a scenario without a sweep axis".into()));
    }
    let row = evaluate(s, None);
    if let Some(e) = &row.error {
        return Err(LinkError::InvalidSpec(e.clone()));
    }
    Ok(report(s, vec![row]))
}

/// Evaluates every sweep value; failures become error rows.
pub fn run_sweep(s: &Scenario) -> Result<LinkReport> {
    if s.sweep.is_none() {
        return Err(LinkError::InvalidSpec("run_sweep needs a [sweep] section".into()));
    }
    let rows = s.points().par_iter().map(|(v, p)| evaluate(p, *v)).collect();
    Ok(report(s, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub name: String,
    pub axis_value: Option<f64>,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub diagnostics: Vec<Diagnostic>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.diagnostics.iter().all(|d| d.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| !d.passed)
    }

    pub fn find(&self, name: &str) -> Option<&Diagnostic> {
        self.diagnostics.iter().find(|d| d.name == name)
    }
}

fn metric(summary: &ChannelSummary, s: &Scenario, name: &str) -> Option<f64> {
    Some(match name {
        "eta" => summary.eta,
        "n_added_total" => summary.n_added_total,
        "n_th" => summary.n_th,
        "fidelity" => summary.fidelity,
        "qcap_lower_per_g" => summary.qcap_lower_per_g,
        "qcap_upper_per_g" => summary.qcap_upper_per_g,
        "qcap_lower_qubits_s" => summary.qcap_lower_qubits_s,
        "g_hz" => s.transducer.g_hz,
        _ => return None,
    })
}

fn same_axis_value(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

fn check_point(s: &Scenario, axis_value: Option<f64>, expectations: &[Expectation], out: &mut Vec<Diagnostic>) {
    let mut push = |name: &str, passed: bool, detail: String| {
        out.push(Diagnostic { name: name.to_owned(), axis_value, passed, detail });
    };

    let grid = match s.grid() {
        Ok(g) => g,
        Err(e) => return push("grid", false, e.to_string()),
    };
    if s.pulse.span_bw < MIN_SPAN_BANDWIDTHS {
        return push(
            "span",
            false,
            format!("insufficient span: ±{} BW, at least ±{MIN_SPAN_BANDWIDTHS} BW required", s.pulse.span_bw),
        );
    }
    push("span", true, format!("±{} BW", s.pulse.span_bw));

    let pulse = match s.pulse_on(&grid) {
        Ok(p) => p,
        Err(e) => return push("pulse", false, e.to_string()),
    };
    let norm_err = (pulse.norm_sqr() - 1.0).abs();
    push(
        "normalization",
        norm_err <= NORMALIZATION_TOLERANCE,
        if norm_err <= NORMALIZATION_TOLERANCE {
            format!("|Σ|ψ|² − 1| = {norm_err:.3e}")
        } else {
            format!("normalization failure: |Σ|ψ|² − 1| = {norm_err:.3e}")
        },
    );

    let resp = match s.response_on(&grid) {
        Ok(r) => r,
        Err(e) => return push("assembly", false, e.to_string()),
    };
    let passivity = verify_passivity(&resp);
    push(
        "passivity",
        passivity.passed(),
        format!("max Σ|S_2i|² = {:.12}, {} violations", passivity.max_row_sum, passivity.violations.len()),
    );

    let summary = match summarize(&resp, &pulse, s.g()).and_then(|x| x.check_ranges().map(|_| x)) {
        Ok(x) => x,
        Err(e) => return push("metrics", false, e.to_string()),
    };
    match grid_convergence(s, &grid, &summary) {
        Ok(c) => push(
            "grid_convergence",
            c <= GRID_CONVERGENCE_TOLERANCE,
            format!("relative change under refinement {c:.3e}"),
        ),
        Err(e) => push("grid_convergence", false, e.to_string()),
    }

    for e in expectations {
        let applies = match (e.at, axis_value) {
            (None, _) => true,
            (Some(a), Some(v)) => same_axis_value(a, v),
            (Some(_), None) => false,
        };
        if !applies {
            continue;
        }
        match metric(&summary, s, &e.metric) {
            Some(m) => push(
                &format!("expect:{}", e.metric),
                e.accepts(m),
                format!(
                    "{} = {m:.6} (target {} ± {}{})",
                    e.metric,
                    e.value,
                    e.tolerance,
                    if e.relative { " relative" } else { "" }
                ),
            ),
            None => push("expect", false, format!("unknown metric {}", e.metric)),
        }
    }
}

/// Passivity, grid refinement, pulse normalization and any regression targets.
pub fn check(s: &Scenario) -> CheckReport {
    let points = s.points();
    let per_point: Vec<Vec<Diagnostic>> = points
        .par_iter()
        .map(|(v, p)| {
            let mut out = Vec::new();
            check_point(p, *v, &s.expectations, &mut out);
            out
        })
        .collect();
    let mut diagnostics: Vec<Diagnostic> = per_point.into_iter().flatten().collect();
    if let Some(sw) = &s.sweep {
        for e in &s.expectations {
            if let Some(a) = e.at {
                if !sw.values.iter().any(|&v| same_axis_value(a, v)) {
                    diagnostics.push(Diagnostic {
                        name: format!("expect:{}", e.metric),
                        axis_value: Some(a),
                        passed: false,
                        detail: "target refers to a value outside the sweep".into(),
                    });
                }
            }
        }
    }
    CheckReport { diagnostics }
}
