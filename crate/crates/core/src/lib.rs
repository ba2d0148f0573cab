//! Quantum-neural-network knowledge distillation toolkit.
//!
//! The numerical core (simulation, circuits, gradients, losses, training) is
//! generic over the real scalar type through [`Real`]; the aliases below pin
//! the common `f64` instantiation.

mod binio;
pub mod circuit;
pub mod data;
pub mod error;
pub mod experiment;
pub mod grad;
pub mod losses;
pub mod qae;
pub mod rng;
pub mod scalar;
pub mod sim;
pub mod train;

pub use circuit::{CnotTopology, ParamCircuit};
pub use error::{Error, Result};
pub use scalar::Real;

pub type StateVector = sim::StateVector<f64>;
pub type DensityMatrix = sim::DensityMatrix<f64>;
pub type PauliString = sim::PauliString<f64>;
pub type QuantumInput = sim::QuantumInput<f64>;
pub type ParamVector = circuit::ParamVector<f64>;
pub type LogitJacobian = grad::LogitJacobian<f64>;

pub type StateVectorF32 = sim::StateVector<f32>;
pub type DensityMatrixF32 = sim::DensityMatrix<f32>;
pub type ParamVectorF32 = circuit::ParamVector<f32>;
