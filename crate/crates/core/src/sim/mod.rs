//! Exact statevector and density-matrix simulation.

pub mod density;
pub mod gate;
pub mod kernel;
pub mod pauli;
pub mod program;
pub mod state;

pub use density::DensityMatrix;
pub use gate::{BoundCircuit, BoundGate, GateKind, GateSpec};
pub use pauli::{Pauli, PauliString};
pub use program::Program;
pub use state::{fidelity_pure, StateVector};
pub mod input;
pub use input::QuantumInput;
