//! Lumped-element circuit quantization and the parametric conversion rate.
//!
//! The junction branch is linearized at the flux saddle point, where its
//! linear inductance cancels. It therefore contributes nothing to the mode
//! structure and only serves as the reference branch for the zero-point phase
//! fluctuations.

mod modes;
mod netlist;

pub use modes::{quantize_netlist, Mode, ModeSolution};
pub use netlist::{parse_netlist, read_netlist, Branch, BranchKind, Netlist};

use crate::scalar::{lit, Real};
use crate::units::HBAR;

/// Flux-pump drive parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpSpec<T> {
    /// Pump amplitude ε_p in radians of flux.
    pub amplitude: T,
    /// Off-resonant buffer drive strength β.
    pub drive_strength: T,
    /// Buffer drive detuning Δ in rad/s. Not used by the first-order rate.
    pub detuning: T,
}

impl<T: Real> PumpSpec<T> {
    /// Builds a pump from an amplitude quoted in units of π, as in `ε_p/π = 0.03`.
    pub fn from_amplitude_over_pi(amplitude_over_pi: T, drive_strength: T) -> Self {
        Self {
            amplitude: amplitude_over_pi * T::pi(),
            drive_strength,
            detuning: T::zero(),
        }
    }
}

/// First-order beam-splitter rate `g = (E_J/ħ)·ε_p·β·φ_b²·φ_a` in rad/s.
///
/// `josephson_energy` is in joules.
pub fn coupling_rate<T: Real>(josephson_energy: T, pump: &PumpSpec<T>, phi_a: T, phi_b: T) -> T {
    josephson_energy / lit::<T>(HBAR) * pump.amplitude * pump.drive_strength * phi_b * phi_b * phi_a
}

/// Longitudinal-coupling comparison rate `g = g₀·√n_c`.
pub fn longitudinal_baseline<T: Real>(single_photon_rate: T, intracavity_photons: T) -> T {
    single_photon_rate * intracavity_photons.sqrt()
}
