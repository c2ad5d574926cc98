//! Simulation of a microwave-to-microwave quantum link: two parametric
//! converters joined by a lossy superconducting coax.
//!
//! The library is generic over the scalar type; the aliases below fix it to
//! `f64`.

pub mod circuit;
pub mod error;
pub mod metrics;
pub mod network;
pub mod physics;
pub mod report;
pub mod scalar;
pub mod scenario;
pub mod units;

pub use error::{LinkError, Result};
pub use scalar::Real;

pub type Netlist = circuit::Netlist<f64>;
pub type ModeSolution = circuit::ModeSolution<f64>;
pub type PumpSpec = circuit::PumpSpec<f64>;
pub type CableSpec = physics::CableSpec<f64>;
pub type TransducerSpec = physics::TransducerSpec<f64>;
pub type ComponentS = physics::ComponentS<f64>;
pub type FrequencyGrid = network::FrequencyGrid<f64>;
pub type NetworkResponse = network::NetworkResponse<f64>;
pub type PulseSpec = metrics::PulseSpec<f64>;
pub type CapacityBounds = metrics::CapacityBounds<f64>;
