use std::path::Path;

use coldlink_core::circuit::{parse_netlist, quantize_netlist, read_netlist, Branch, BranchKind, Netlist};
use coldlink_core::units::{HBAR, PLANCK, REDUCED_FLUX_QUANTUM};
use proptest::prelude::*;

fn branch(id: &str, from: &str, to: &str, kind: BranchKind<f64>) -> Branch<f64> {
    Branch { id: id.into(), from: from.into(), to: to.into(), kind }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

proptest! {
    #[test]
    fn parallel_lc_matches_closed_form(c in 1e-15..1e-9f64, l in 1e-10..1e-6f64) {
        let n = Netlist::new(
            "gnd",
            vec![
                branch("C", "n", "gnd", BranchKind::Capacitor(c)),
                branch("L", "n", "gnd", BranchKind::Inductor(l)),
                branch("J", "n", "gnd", BranchKind::Junction(1e9 * PLANCK)),
            ],
            "J",
        )
        .unwrap();
        let sol = quantize_netlist(&n).unwrap();
        prop_assert_eq!(sol.modes.len(), 1);
        let m = &sol.modes[0];
        let z = (l / c).sqrt();
        prop_assert!(rel(m.omega, 1.0 / (l * c).sqrt()) < 1e-9);
        prop_assert!(rel(m.impedance, z) < 1e-9);
        prop_assert!(rel(m.phi, (HBAR * z / 2.0).sqrt() / REDUCED_FLUX_QUANTUM) < 1e-9);
    }

    #[test]
    fn capacitively_coupled_pair_matches_symbolic_roots(
        c1 in 0.05..20.0f64,
        c2 in 0.05..20.0f64,
        cc in 0.001..2.0f64,
        l1 in 1.0..100.0f64,
        l2 in 1.0..100.0f64,
    ) {
        let (c1, c2, cc) = (c1 * 1e-12, c2 * 1e-12, cc * 1e-12);
        let (l1, l2) = (l1 * 1e-9, l2 * 1e-9);
        let n = Netlist::new(
            "gnd",
            vec![
                branch("C1", "p", "gnd", BranchKind::Capacitor(c1)),
                branch("L1", "p", "gnd", BranchKind::Inductor(l1)),
                branch("C2", "q", "gnd", BranchKind::Capacitor(c2)),
                branch("L2", "q", "gnd", BranchKind::Inductor(l2)),
                branch("Cc", "p", "q", BranchKind::Capacitor(cc)),
                branch("J", "p", "gnd", BranchKind::Junction(3e9 * PLANCK)),
            ],
            "J",
        )
        .unwrap();
        let sol = quantize_netlist(&n).unwrap();
        prop_assert_eq!(sol.modes.len(), 2);

        // det(L⁻¹ − ω²C) = 0 as a quadratic in x = ω²
        let (k11, k22) = (c1 + cc, c2 + cc);
        let a = k11 * k22 - cc * cc;
        let b = -(k11 / l2 + k22 / l1);
        let c = 1.0 / (l1 * l2);
        let disc = (b * b - 4.0 * a * c).sqrt();
        // stable pair of roots
        let q = -0.5 * (b - disc);
        let mut roots = [q / a, c / q];
        roots.sort_by(|x, y| x.partial_cmp(y).unwrap());

        for (m, x) in sol.modes.iter().zip(roots) {
            prop_assert!(rel(m.omega, x.sqrt()) < 1e-9, "{} vs {}", m.omega, x.sqrt());
            // (L⁻¹ − xC)v = 0 from the first row
            let v = [x * cc, -(1.0 / l1 - x * k11)];
            let norm = k11 * v[0] * v[0] - 2.0 * cc * v[0] * v[1] + k22 * v[1] * v[1];
            let flux = (HBAR / (2.0 * x.sqrt())).sqrt() * v[0].abs() / norm.sqrt();
            prop_assert!(rel(m.phi, flux / REDUCED_FLUX_QUANTUM) < 1e-9, "{} vs {}", m.phi, flux / REDUCED_FLUX_QUANTUM);
        }
    }
}

#[test]
fn scaling_all_elements_scales_frequencies() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/netlists/design_a.toml");
    let n = read_netlist(path).unwrap();
    let base = quantize_netlist(&n).unwrap();
    let scaled = quantize_netlist(&n.scaled(4.0)).unwrap();
    for (a, b) in base.modes.iter().zip(&scaled.modes) {
        assert!(rel(b.omega, a.omega / 4.0) < 1e-9);
        assert!(rel(b.phi, a.phi) < 1e-9);
    }
}

#[test]
fn shipped_designs_land_near_reported_modes() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/netlists");
    for (file, fa, fb) in [("design_a.toml", 210e6, 5.3e9), ("design_b.toml", 690e6, 5.3e9)] {
        let sol = quantize_netlist(&read_netlist(dir.join(file)).unwrap()).unwrap();
        let two_pi = 2.0 * std::f64::consts::PI;
        assert!(rel(sol.lowest().unwrap().omega / two_pi, fa) < 0.05);
        assert!(rel(sol.highest().unwrap().omega / two_pi, fb) < 0.05);
    }
}

#[test]
fn floating_capacitor_island_is_ill_posed() {
    let n = parse_netlist(
        r#"
junction = "J"
[[branch]]
id = "L"
from = "a"
to = "gnd"
kind = "L"
value = "10 nH"
[[branch]]
id = "Lab"
from = "a"
to = "b"
kind = "L"
value = "10 nH"
[[branch]]
id = "C"
from = "a"
to = "gnd"
kind = "C"
value = "1 pF"
[[branch]]
id = "J"
from = "a"
to = "gnd"
kind = "J"
value = "1 GHz"
"#,
    )
    .unwrap();
    assert!(quantize_netlist(&n).is_err());
}

#[test]
fn disconnected_netlist_is_rejected() {
    let err = Netlist::new(
        "gnd",
        vec![
            branch("C", "a", "gnd", BranchKind::Capacitor(1e-12)),
            branch("L", "b", "c", BranchKind::Inductor(1e-9)),
            branch("J", "a", "gnd", BranchKind::Junction(1e-24)),
        ],
        "J",
    );
    assert!(err.is_err());
}
