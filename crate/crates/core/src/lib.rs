//! Simulation and analytics for reading out GKP qubits through an ancilla
//! qubit coupled by Rabi-type (conditional displacement) interactions.
//!
//! Everything is generic over the scalar type through [`Real`]; the aliases
//! below fix it to `f64`, with `f32` variants for memory-bound sweeps.

pub mod analytics;
pub mod error;
pub mod export;
pub mod fock;
pub mod gkp;
pub mod invariants;
pub mod optimize;
pub mod quadrature;
pub mod readout;
pub mod scalar;

pub use error::{GkpError, Result};
pub use fock::{HilbertSpec, PauliAxis};
pub use gkp::LogicalBit;
pub use scalar::Real;

pub type Space = fock::FockSpace<f64>;
pub type Ket = fock::OscillatorKet<f64>;
pub type Density = fock::DensityOp<f64>;
pub type Operator = fock::LinearOp<f64>;
pub type Hybrid = fock::HybridState<f64>;
pub type State = gkp::OscillatorState<f64>;
pub type GkpSpec = gkp::GkpSpec<f64>;
pub type GkpPair = gkp::GkpStatePair<f64>;
pub type Circuit = readout::ReadoutCircuit<f64>;
pub type CircuitParams = readout::CircuitParams<f64>;
pub type SpaceCache = fock::SpaceCache<f64>;

pub type Space32 = fock::FockSpace<f32>;
pub type Ket32 = fock::OscillatorKet<f32>;
pub type Density32 = fock::DensityOp<f32>;
pub type State32 = gkp::OscillatorState<f32>;
pub type GkpPair32 = gkp::GkpStatePair<f32>;
