//! CSV and JSON emission for scenario runs.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::metrics::ChannelSummary;
use crate::network::SolverMode;
use crate::scenario::{Scenario, SweepAxis};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Locale-free scientific notation with 9 significant digits.
pub fn sci(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_owned()
    } else {
        format!("{x:.8e}")
    }
}

/// Numerical health of one evaluated point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub passivity_max: f64,
    /// Largest relative change of η, F and Q_L when the grid is refined.
    pub grid_convergence: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub axis_value: Option<f64>,
    pub f_a_hz: f64,
    pub t_cable_k: f64,
    pub qi: f64,
    pub l_m: f64,
    pub summary: Option<ChannelSummary>,
    pub diagnostics: Option<Diagnostics>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkReport {
    pub tool_version: String,
    pub mode: SolverMode,
    pub axis: Option<SweepAxis>,
    pub config: Scenario,
    pub rows: Vec<ReportRow>,
}

pub const CSV_COLUMNS: [&str; 11] = [
    "axis_value",
    "f_a_hz",
    "T_cable_k",
    "Qi",
    "L_m",
    "eta",
    "n_added_total",
    "n_th",
    "fidelity",
    "qcap_lower_per_g",
    "qcap_upper_per_g",
];

impl LinkReport {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        w.write_record(CSV_COLUMNS)?;
        for row in &self.rows {
            let metrics = match &row.summary {
                Some(s) => {
                    s.check_ranges()?;
                    [s.eta, s.n_added_total, s.n_th, s.fidelity, s.qcap_lower_per_g, s.qcap_upper_per_g]
                }
                None => [f64::NAN; 6],
            };
            let mut record = vec![
                row.axis_value.map(sci).unwrap_or_default(),
                sci(row.f_a_hz),
                sci(row.t_cable_k),
                sci(row.qi),
                sci(row.l_m),
            ];
            record.extend(metrics.iter().map(|&x| sci(x)));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut writer: W) -> Result<()> {
        for s in self.rows.iter().filter_map(|r| r.summary.as_ref()) {
            s.check_ranges()?;
        }
        serde_json::to_writer_pretty(&mut writer, self)?;
        writeln!(writer)?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("ascii output"))
    }

    pub fn to_json_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_json(&mut buf)?;
        Ok(String::from_utf8(buf).expect("utf-8 output"))
    }
}
