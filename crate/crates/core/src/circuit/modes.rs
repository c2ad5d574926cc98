use log::warn;
use nalgebra::{DMatrix, DVector};

use super::netlist::{BranchKind, Netlist};
use crate::error::{LinkError, Result};
use crate::scalar::{lit, Real};
use crate::units::{HBAR, REDUCED_FLUX_QUANTUM};

/// One normal mode of the linearized circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode<T> {
    /// Angular frequency in rad/s.
    pub omega: T,
    /// Zero-point phase fluctuation across the junction branch, `Φ_zpf/φ₀`.
    pub phi: T,
    /// Effective impedance seen by the junction, defined by `Φ_zpf = √(ħZ/2)`.
    pub impedance: T,
    /// Node-flux mode shape, normalized so that `vᵀ·C·v = 1`.
    pub node_flux: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSolution<T> {
    /// Oscillatory modes sorted by ascending frequency.
    pub modes: Vec<Mode<T>>,
    /// Node order matching `Mode::node_flux`.
    pub nodes: Vec<String>,
    /// Number of zero-frequency modes dropped from `modes`.
    pub excluded_zero_modes: usize,
    pub warnings: Vec<String>,
}

impl<T: Real> ModeSolution<T> {
    pub fn lowest(&self) -> Option<&Mode<T>> {
        self.modes.first()
    }

    pub fn highest(&self) -> Option<&Mode<T>> {
        self.modes.last()
    }
}

/// Capacitance and inverse-inductance matrices over the non-ground nodes.
pub(crate) fn circuit_matrices<T: Real>(netlist: &Netlist<T>) -> (DMatrix<T>, DMatrix<T>) {
    let index = netlist.node_index();
    let n = index.len();
    let mut cap = DMatrix::zeros(n, n);
    let mut inv_l = DMatrix::zeros(n, n);
    for b in netlist.branches() {
        let (m, v) = match b.kind {
            BranchKind::Capacitor(c) => (&mut cap, c),
            BranchKind::Inductor(l) => (&mut inv_l, T::one() / l),
            // linear inductance cancels at the saddle point
            BranchKind::Junction(_) => continue,
        };
        let i = index.get(b.from.as_str()).copied();
        let j = index.get(b.to.as_str()).copied();
        if let Some(i) = i {
            m[(i, i)] += v;
        }
        if let Some(j) = j {
            m[(j, j)] += v;
        }
        if let (Some(i), Some(j)) = (i, j) {
            m[(i, j)] -= v;
            m[(j, i)] -= v;
        }
    }
    (cap, inv_l)
}

/// Normal modes of the node-flux equations `C·Φ̈ = −L⁻¹·Φ`.
///
/// Solved by Cholesky-reducing the generalized problem `L⁻¹·v = ω²·C·v` to a
/// symmetric one. Zero-frequency modes (inductor-only cycles or floating
/// inductive islands) are dropped with a warning.
pub fn quantize_netlist<T: Real>(netlist: &Netlist<T>) -> Result<ModeSolution<T>> {
    let (cap, inv_l) = circuit_matrices(netlist);
    let n = cap.nrows();
    let nodes: Vec<String> = netlist.nodes().into_iter().map(str::to_owned).collect();
    let chol = cap.clone().cholesky().ok_or_else(|| {
        LinkError::IllPosedNetlist("capacitance matrix is singular; every node needs a capacitive path to ground".into())
    })?;
    let lower = chol.l();
    // A = L⁻¹ K L⁻ᵀ
    let x = lower
        .solve_lower_triangular(&inv_l)
        .ok_or_else(|| LinkError::IllPosedNetlist("triangular solve failed".into()))?;
    let a = lower
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| LinkError::IllPosedNetlist("triangular solve failed".into()))?;
    let a = (&a + a.transpose()) * lit::<T>(0.5);
    let eig = a.symmetric_eigen();

    let scale = eig.eigenvalues.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    let zero_tol = scale * lit(1e-12);
    let jb = netlist.junction();
    let index = netlist.node_index();
    let ji = index.get(jb.from.as_str()).copied();
    let jj = index.get(jb.to.as_str()).copied();
    let hbar: T = lit(HBAR);
    let phi0: T = lit(REDUCED_FLUX_QUANTUM);

    let mut modes = Vec::with_capacity(n);
    let mut excluded = 0;
    for k in 0..n {
        let lambda = eig.eigenvalues[k];
        if lambda <= zero_tol {
            excluded += 1;
            continue;
        }
        let u: DVector<T> = eig.eigenvectors.column(k).into_owned();
        let v = lower
            .transpose()
            .solve_upper_triangular(&u)
            .ok_or_else(|| LinkError::IllPosedNetlist("triangular solve failed".into()))?;
        let omega = lambda.sqrt();
        let at = |i: Option<usize>| i.map_or(T::zero(), |i| v[i]);
        let shape = (at(ji) - at(jj)).abs();
        let flux_zpf = shape * (hbar / (lit::<T>(2.0) * omega)).sqrt();
        modes.push(Mode {
            omega,
            phi: flux_zpf / phi0,
            impedance: lit::<T>(2.0) * flux_zpf * flux_zpf / hbar,
            node_flux: v.iter().copied().collect(),
        });
    }
    modes.sort_by(|a, b| a.omega.partial_cmp(&b.omega).unwrap_or(std::cmp::Ordering::Equal));

    let mut warnings = Vec::new();
    if excluded > 0 {
        let msg = format!("excluded {excluded} zero-frequency mode(s) from the solution");
        warn!("{msg}");
        warnings.push(msg);
    }
    Ok(ModeSolution { modes, nodes, excluded_zero_modes: excluded, warnings })
}
