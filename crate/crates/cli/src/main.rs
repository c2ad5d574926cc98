use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use coldlink_core::circuit::{coupling_rate, quantize_netlist, read_netlist, PumpSpec};
use coldlink_core::network::SolverMode;
use coldlink_core::report::LinkReport;
use coldlink_core::scenario::{self, OutputFormat, Scenario};

#[derive(Parser)]
#[command(name = "coldlink", version, about = "Superconducting coax quantum link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a scenario without a sweep axis.
    Run(RunArgs),
    /// Evaluate every value of the scenario's sweep axis.
    Sweep(RunArgs),
    /// Passivity, grid refinement, pulse normalization and regression targets.
    Check(OverrideArgs),
    /// Normal modes of a lumped-element netlist.
    Quantize(QuantizeArgs),
}

#[derive(Args)]
struct OverrideArgs {
    config: PathBuf,
    #[arg(long)]
    mode: Option<SolverMode>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long = "span-bw")]
    span_bw: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: OverrideArgs,
    /// Output file; `-` writes to stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    format: Option<OutputFormat>,
}

#[derive(Args)]
struct QuantizeArgs {
    netlist: PathBuf,
    /// Pump amplitude in units of π; prints g when given with --drive-strength.
    #[arg(long = "pump-over-pi")]
    pump_over_pi: Option<f64>,
    #[arg(long = "drive-strength")]
    drive_strength: Option<f64>,
}

fn load(args: &OverrideArgs) -> Result<Scenario> {
    let mut s = scenario::read_scenario(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    if let Some(m) = args.mode {
        s.solver = m;
    }
    if let Some(n) = args.points {
        if n < 3 || n % 2 == 0 {
            bail!("--points must be odd and at least 3");
        }
        s.pulse.points = n;
    }
    if let Some(x) = args.span_bw {
        s.pulse.span_bw = x;
    }
    Ok(s)
}

fn emit(report: &LinkReport, s: &Scenario, args: &RunArgs) -> Result<()> {
    let format = args.format.unwrap_or(s.output.format);
    let path = args.output.clone().or_else(|| s.output.path.clone());
    let writer: Box<dyn Write> = match path.as_deref() {
        None => Box::new(io::stdout().lock()),
        Some(p) if p == Path::new("-") => Box::new(io::stdout().lock()),
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
    };
    let mut w = BufWriter::new(writer);
    match format {
        OutputFormat::Csv => report.write_csv(&mut w)?,
        OutputFormat::Json => report.write_json(&mut w)?,
    }
    w.flush()?;
    let mut seen = std::collections::BTreeSet::new();
    for w in report.rows.iter().filter_map(|r| r.diagnostics.as_ref()).flat_map(|d| &d.warnings) {
        if seen.insert(w) {
            eprintln!("warning: {w}");
        }
    }
    for row in &report.rows {
        if let Some(e) = &row.error {
            eprintln!("error at {}: {e}", row.axis_value.map_or("point".into(), |v| format!("{v:.6e}")));
        }
    }
    Ok(())
}

fn quantize(args: &QuantizeArgs) -> Result<()> {
    let netlist = read_netlist(&args.netlist).with_context(|| format!("reading {}", args.netlist.display()))?;
    let sol = quantize_netlist(&netlist)?;
    let two_pi = 2.0 * std::f64::consts::PI;
    println!("{:>4}  {:>14}  {:>12}  {:>12}", "mode", "f_hz", "phi", "Z_ohm");
    for (k, m) in sol.modes.iter().enumerate() {
        println!("{k:>4}  {:>14.6e}  {:>12.6}  {:>12.4}", m.omega / two_pi, m.phi, m.impedance);
    }
    for w in &sol.warnings {
        eprintln!("warning: {w}");
    }
    if let (Some(p), Some(beta)) = (args.pump_over_pi, args.drive_strength) {
        let (Some(a), Some(b)) = (sol.lowest(), sol.highest()) else {
            bail!("no oscillatory modes");
        };
        if sol.modes.len() < 2 {
            bail!("need two modes for a conversion rate");
        }
        let pump = PumpSpec::from_amplitude_over_pi(p, beta);
        let g = coupling_rate(netlist.junction_energy(), &pump, a.phi, b.phi);
        println!("g/2pi = {:.6e} Hz", g / two_pi);
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => load(&args.common).and_then(|s| {
            if s.sweep.is_some() {
                bail!("scenario has a [sweep] section; use `coldlink sweep`");
            }
            let report = scenario::run_point(&s)?;
            emit(&report, &s, args)
        }),
        Command::Sweep(args) => load(&args.common).and_then(|s| {
            if s.sweep.is_none() {
                bail!("scenario has no [sweep] section; use `coldlink run`");
            }
            let report = scenario::run_sweep(&s)?;
            emit(&report, &s, args)
        }),
        Command::Check(args) => load(args).map(|s| {
            let report = scenario::check(&s);
            for d in &report.diagnostics {
                let at = d.axis_value.map(|v| format!(" @ {v:.6e}")).unwrap_or_default();
                println!("{} {}{at}: {}", if d.passed { "ok  " } else { "FAIL" }, d.name, d.detail);
            }
            if !report.passed() {
                eprintln!("{} check(s) failed", report.failures().count());
                std::process::exit(1);
            }
        }),
        Command::Quantize(args) => quantize(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
