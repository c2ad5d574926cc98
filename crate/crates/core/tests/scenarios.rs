use std::path::{Path, PathBuf};

use coldlink_core::network::SolverMode;
use coldlink_core::scenario::{check, parse_scenario, read_scenario, run_point, run_sweep, Scenario, Sweep, SweepAxis};
use coldlink_core::LinkError;

fn shipped() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    files.sort();
    files
}

fn quick() -> Scenario {
    let mut s = Scenario::reference();
    s.solver = SolverMode::SinglePass;
    s.pulse.points = 1025;
    s
}

#[test]
fn every_shipped_scenario_self_validates() {
    let files = shipped();
    for name in [
        "fig1d",
        "fig2a_fidelity",
        "fig2b_noise",
        "fig2c_LoverQ",
        "fig3a_capacity",
        "fig3b_capacity_LoverQ",
        "tableA_designs",
    ] {
        assert!(files.iter().any(|f| f.file_stem().unwrap() == name), "missing {name}");
    }
    for f in files {
        let s = read_scenario(&f).unwrap_or_else(|e| panic!("{}: {e}", f.display()));
        let report = check(&s);
        let failures: Vec<_> = report.failures().map(|d| format!("{} {}", d.name, d.detail)).collect();
        assert!(failures.is_empty(), "{}: {failures:?}", f.display());
    }
}

#[test]
fn narrow_span_is_diagnosed() {
    let mut s = quick();
    s.pulse.span_bw = 2.0;
    let report = check(&s);
    assert!(!report.passed());
    let d = report.find("span").unwrap();
    assert!(!d.passed && d.detail.contains("insufficient span"), "{}", d.detail);
}

#[test]
fn perturbed_pulse_norm_is_diagnosed() {
    let mut s = quick();
    s.pulse.normalization_scale = 1.0 + 1e-6;
    let report = check(&s);
    let d = report.find("normalization").unwrap();
    assert!(!d.passed && d.detail.contains("normalization failure"));
    s.pulse.normalization_scale = 1.0;
    assert!(check(&s).passed());
}

#[test]
fn check_never_panics_on_bad_physics() {
    let mut s = quick();
    s.transducer.g_hz = 300e6;
    let report = check(&s);
    assert!(!report.passed());
}

#[test]
fn single_value_sweep_equals_point_run() {
    let point = quick();
    let mut sweep = point.clone();
    sweep.sweep = Some(Sweep { axis: SweepAxis::ModeFrequency, values: vec![point.transducer.f_a_hz] });
    let a = run_point(&point).unwrap();
    let b = run_sweep(&sweep).unwrap();
    assert_eq!(a.rows.len(), 1);
    assert_eq!(b.rows.len(), 1);
    assert_eq!(a.rows[0].summary, b.rows[0].summary);
    assert_eq!(b.rows[0].axis_value, Some(point.transducer.f_a_hz));
    let csv_a = a.to_csv_string().unwrap();
    let csv_b = b.to_csv_string().unwrap();
    let tail = |s: &str| s.lines().nth(1).unwrap().split_once(',').unwrap().1.to_owned();
    assert_eq!(tail(&csv_a), tail(&csv_b));
}

#[test]
fn output_is_identical_across_thread_counts() {
    let mut s = quick();
    s.sweep = Some(Sweep { axis: SweepAxis::ModeFrequency, values: vec![2e8, 7e8, 3e9, 8e9] });
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                let r = run_sweep(&s).unwrap();
                (r.to_csv_string().unwrap(), r.to_json_string().unwrap())
            })
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(4));
}

#[test]
fn sweep_rows_follow_axis_order_and_survive_failures() {
    let mut s = quick();
    // 30 MHz puts the ±4g grid below zero frequency
    s.sweep = Some(Sweep { axis: SweepAxis::ModeFrequency, values: vec![8e9, 30e6, 2e8] });
    let r = run_sweep(&s).unwrap();
    let axis: Vec<_> = r.rows.iter().map(|row| row.axis_value.unwrap()).collect();
    assert_eq!(axis, vec![8e9, 30e6, 2e8]);
    assert!(r.rows[0].summary.is_some());
    assert!(r.rows[1].error.is_some());
    assert!(r.rows[2].summary.is_some());
    let csv = r.to_csv_string().unwrap();
    let bad = csv.lines().nth(2).unwrap();
    assert!(bad.ends_with("NaN,NaN,NaN,NaN,NaN,NaN"), "{bad}");
    let json: serde_json::Value = serde_json::from_str(&r.to_json_string().unwrap()).unwrap();
    assert!(json["rows"][1]["error"].is_string());
    assert_eq!(json["tool_version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn csv_layout_is_fixed() {
    let r = run_point(&quick()).unwrap();
    let csv = r.to_csv_string().unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "axis_value,f_a_hz,T_cable_k,Qi,L_m,eta,n_added_total,n_th,fidelity,qcap_lower_per_g,qcap_upper_per_g"
    );
    let row: Vec<_> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), 11);
    assert_eq!(row[0], "");
    assert_eq!(row[1], "2.00000000e8");
    for field in &row[1..] {
        let mantissa = field.split('e').next().unwrap();
        assert_eq!(mantissa.trim_start_matches('-').len(), 10, "{field}");
    }
}

#[test]
fn run_modes_reject_wrong_shape() {
    let mut s = quick();
    assert!(run_sweep(&s).is_err());
    s.sweep = Some(Sweep { axis: SweepAxis::CableTemperature, values: vec![0.01] });
    assert!(run_point(&s).is_err());
}

#[test]
fn qi_a_tracks_swept_frequency() {
    let mut s = quick();
    s.sweep = Some(Sweep { axis: SweepAxis::ModeFrequency, values: vec![2e8, 4e8] });
    let p = s.points();
    let k0 = p[0].1.transducer_spec().kappa_a_int;
    let k1 = p[1].1.transducer_spec().kappa_a_int;
    assert!((k1 / k0 - 2.0).abs() < 1e-12);
}

#[test]
fn pump_netlist_resolves_relative_to_config() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let s = parse_scenario(
        "[transducer.pump]\nnetlist = \"netlists/design_b.toml\"\namplitude_over_pi = 0.03\ndrive_strength = 6\n",
        &dir,
    )
    .unwrap();
    assert!((s.transducer.g_hz / 31.48e6 - 1.0).abs() < 0.01);
    assert_eq!(s.transducer.f_a_hz, 200e6);
    let missing = parse_scenario(
        "[transducer.pump]\nnetlist = \"nope.toml\"\namplitude_over_pi = 0.03\ndrive_strength = 6\n",
        &dir,
    );
    match missing {
        Err(LinkError::InvalidConfig(issues)) => assert_eq!(issues[0].section, "transducer.pump"),
        other => panic!("{other:?}"),
    }
}
