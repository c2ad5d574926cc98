use std::f64::consts::PI;

use coldlink_core::network::{
    assemble_link, assemble_link_with_order, compose_link, verify_passivity, EliminationOrder, FrequencyGrid,
    SolverMode, OUTPUT_PORT, SIGNAL_PORT,
};
use coldlink_core::physics::{lossy_beamsplitter, ports, transducer_smatrix, Bath, CableSpec, TransducerSpec};
use coldlink_core::network::connect;
use proptest::prelude::*;

fn reference(fa: f64, kai: f64, kbi: f64, t: f64) -> TransducerSpec<f64> {
    let g = 2.0 * PI * 25e6;
    TransducerSpec::maximally_flat(2.0 * PI * fa, 2.0 * PI * 5.3e9, g, kai, kbi, t)
}

fn grid_for(spec: &TransducerSpec<f64>, points: usize) -> FrequencyGrid<f64> {
    FrequencyGrid::new(points, 8.0 * spec.g / 2.0, spec.omega_a, spec.omega_b).unwrap()
}

fn link() -> impl Strategy<Value = (TransducerSpec<f64>, CableSpec<f64>)> {
    (0.1e9..8e9f64, 5e6..40e6f64, 0.5..3.0f64, 1e2..1e5f64, 0.0..1e6f64, 1e4..1e7f64, 1.0..2e3f64, 0.0..1.0f64)
        .prop_map(|(fa, g, r, qa, kbi, qc, len, t)| {
            // keep the ±4g grid at positive absolute frequency
            let g = 2.0 * PI * g.min(fa / 6.0);
            let omega_a = 2.0 * PI * fa;
            let spec = TransducerSpec {
                omega_a,
                omega_b: 2.0 * PI * 5.3e9,
                kappa_a_ext: r * g,
                kappa_b_ext: r * g,
                kappa_a_int: omega_a / qa,
                kappa_b_int: 2.0 * PI * kbi,
                g,
                temperature: t,
                b_intrinsic_vacuum: true,
            };
            (spec, CableSpec::new(qc, len, 1.7, t))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn loss_complete_full_network_is_unitary((spec, cable) in link(), x in -4.0..4.0f64) {
        let d = x * spec.g;
        let a = transducer_smatrix(d, &spec);
        let b = transducer_smatrix(d, &spec);
        let c = coldlink_core::physics::cable_smatrix((spec.omega_a + d) / (2.0 * PI), &cable).unwrap();
        let full = compose_link(&a, &c, &b, EliminationOrder::Global).unwrap();
        prop_assert!(full.unitarity_error() <= 1e-9, "{}", full.unitarity_error());
        prop_assert!(full.symmetry_error() <= 1e-9);
    }

    #[test]
    fn assembled_links_never_violate_passivity((spec, cable) in link(), full in any::<bool>()) {
        let mode = if full { SolverMode::Full } else { SolverMode::SinglePass };
        let resp = assemble_link(&spec, &cable, &spec, &grid_for(&spec, 129), mode).unwrap();
        let report = verify_passivity(&resp);
        prop_assert!(report.passed(), "{:?}", report.max_row_sum);
        if full {
            prop_assert!((report.min_row_sum - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn elimination_orders_agree((spec, cable) in link()) {
        let grid = grid_for(&spec, 33);
        let base = assemble_link_with_order(&spec, &cable, &spec, &grid, SolverMode::Full, EliminationOrder::Global).unwrap();
        for order in [EliminationOrder::SourceFirst, EliminationOrder::SinkFirst] {
            let other = assemble_link_with_order(&spec, &cable, &spec, &grid, SolverMode::Full, order).unwrap();
            for (r0, r1) in base.rows.iter().zip(&other.rows) {
                for (x, y) in r0.iter().zip(r1) {
                    prop_assert!((x - y).norm() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn single_pass_efficiency_ignores_cable_phase((spec, cable) in link(), eps in 1.0..10.0f64) {
        let grid = grid_for(&spec, 65);
        let r0 = assemble_link(&spec, &cable, &spec, &grid, SolverMode::SinglePass).unwrap();
        let other = CableSpec { epsilon_r: eps, qi: coldlink_core::physics::QiModel::Constant(cable.qi.at(1.0) * eps.sqrt() / 1.7f64.sqrt()), ..cable.clone() };
        let r1 = assemble_link(&spec, &other, &spec, &grid, SolverMode::SinglePass).unwrap();
        for (a, b) in r0.efficiency_profile().unwrap().iter().zip(r1.efficiency_profile().unwrap()) {
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300) + 1e-15);
        }
    }
}

#[test]
fn lossless_pass_through_on_resonance() {
    let spec = reference(200e6, 0.0, 0.0, 0.0);
    let cable = CableSpec::new(f64::INFINITY, 100.0, 1.7, 0.0);
    for mode in [SolverMode::Full, SolverMode::SinglePass] {
        let resp = assemble_link(&spec, &cable, &spec, &grid_for(&spec, 65), mode).unwrap();
        let mid = resp.rows.len() / 2;
        let s = resp.signal_index().unwrap();
        assert!((resp.rows[mid][s].norm_sqr() - 1.0).abs() < 1e-12);
        for (i, v) in resp.rows[mid].iter().enumerate() {
            if i != s {
                assert!(v.norm() < 1e-6, "{}", resp.ports[i].label);
            }
        }
    }
}

#[test]
fn ideal_cable_reduces_to_direct_cascade() {
    let spec = reference(300e6, 2.0 * PI * 30e3, 2.0 * PI * 40e3, 0.02);
    for &d in &[-2.0 * spec.g, 0.0, 0.3 * spec.g] {
        let a = transducer_smatrix(d, &spec);
        let b = transducer_smatrix(d, &spec);
        let ideal = lossy_beamsplitter(1.0, 0.0, Bath::vacuum(), 1.0);
        let via = compose_link(&a, &ideal, &b, EliminationOrder::Global).unwrap();
        let direct = connect(&a.clone().with_prefix("A"), ports::A_EXT, &b.clone().with_prefix("B"), ports::A_EXT).unwrap();
        for out in &direct.ports {
            for inp in &direct.ports {
                let x = via.element(&out.label, &inp.label).unwrap();
                let y = direct.element(&out.label, &inp.label).unwrap();
                assert!((x - y).norm() < 1e-14);
            }
        }
        // the lossless cable's loss ports are decoupled
        let o = via.require_port(OUTPUT_PORT).unwrap();
        assert!(via.matrix[(o, via.require_port("cable.loss1").unwrap())].norm() < 1e-15);
    }
}

#[test]
fn design_a_like_link_has_near_unit_peak() {
    let spec = reference(200e6, 2.0 * PI * 200e6 / 2e4, 2.0 * PI * 50e3, 0.01);
    let cable = CableSpec::new(1e5, 20.0, 1.7, 0.01);
    for mode in [SolverMode::Full, SolverMode::SinglePass] {
        let resp = assemble_link(&spec, &cable, &spec, &grid_for(&spec, 4097), mode).unwrap();
        let eta = resp.efficiency_profile().unwrap();
        assert!(eta[eta.len() / 2] >= 0.99, "{}", eta[eta.len() / 2]);
    }
    // off-band standing waves between the two converters leak through in full mode only
    let single = assemble_link(&spec, &cable, &spec, &grid_for(&spec, 4097), SolverMode::SinglePass).unwrap();
    assert!(single.warnings.is_empty());
}

#[test]
fn dropping_b_intrinsic_port_leaves_unaccounted_loss() {
    let spec = reference(200e6, 2.0 * PI * 10e3, 2.0 * PI * 2e6, 0.0);
    let cable = CableSpec::new(1e5, 100.0, 1.7, 0.0);
    let resp = assemble_link(&spec, &cable, &spec, &grid_for(&spec, 33), SolverMode::Full).unwrap();
    let partial = resp.without_port("B.b_int").unwrap();
    let report = verify_passivity(&partial);
    assert!(report.max_row_sum < 1.0 - 1e-6);
    assert!(partial.port_index(SIGNAL_PORT).is_some());
}

#[test]
fn narrow_grid_is_flagged() {
    let spec = reference(200e6, 0.0, 0.0, 0.0);
    let cable = CableSpec::new(1e5, 100.0, 1.7, 0.0);
    let grid = FrequencyGrid::new(33, 0.2 * spec.g, spec.omega_a, spec.omega_b).unwrap();
    let resp = assemble_link(&spec, &cable, &spec, &grid, SolverMode::SinglePass).unwrap();
    assert!(resp.warnings.iter().any(|w| w.contains("too narrow")));
}

#[test]
fn mismatched_converters_are_rejected() {
    let a = reference(200e6, 0.0, 0.0, 0.0);
    let b = reference(210e6, 0.0, 0.0, 0.0);
    let cable = CableSpec::new(1e5, 100.0, 1.7, 0.0);
    assert!(assemble_link(&a, &cable, &b, &grid_for(&a, 33), SolverMode::Full).is_err());
    let slightly = reference(200e6 * (1.0 + 1e-6), 0.0, 0.0, 0.0);
    let resp = assemble_link(&a, &cable, &slightly, &grid_for(&a, 33), SolverMode::Full).unwrap();
    assert!(resp.warnings.iter().any(|w| w.contains("asymmetric")));
}

/// Worst `||S_21|²_full − |S_21|²_single|` over grid points where both
/// converters reflect less than `threshold` of the incident a-mode power.
fn worst_mode_gap(threshold: f64) -> (f64, usize) {
    let spec = reference(200e6, 2.0 * PI * 200e6 / 2e4, 2.0 * PI * 50e3, 0.01);
    let cable = CableSpec::new(1e5, 100.0, 1.7, 0.01);
    let grid = grid_for(&spec, 4097);
    let full = assemble_link(&spec, &cable, &spec, &grid, SolverMode::Full).unwrap();
    let single = assemble_link(&spec, &cable, &spec, &grid, SolverMode::SinglePass).unwrap();
    let ef = full.efficiency_profile().unwrap();
    let es = single.efficiency_profile().unwrap();
    let mut worst = 0.0f64;
    let mut count = 0;
    for (j, &d) in grid.offsets().iter().enumerate() {
        let r = transducer_smatrix(d, &spec).matrix[(ports::A_EXT, ports::A_EXT)].norm_sqr();
        if r < threshold {
            worst = worst.max((ef[j] - es[j]).abs());
            count += 1;
        }
    }
    (worst, count)
}

#[test]
fn solver_modes_agree_where_reflection_is_small() {
    // the round-trip correction is about 2|r|²η, so −33 dB keeps it under 10⁻³
    let (gap, n) = worst_mode_gap(5e-4);
    assert!(n > 100);
    assert!(gap < 1e-3, "{gap}");
}

/// Same comparison at the −20 dB reflection threshold. Two −20 dB mirrors
/// produce a round-trip term of up to 1% in amplitude, so per-point
/// agreement to 10⁻³ cannot hold at the edge of that region.
#[test]
#[ignore = "per-point agreement at the -20 dB edge exceeds 1e-3; see worst_mode_gap"]
fn solver_modes_agree_at_minus_20_db() {
    let (gap, _) = worst_mode_gap(1e-2);
    assert!(gap < 1e-3, "{gap}");
}

