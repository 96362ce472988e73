//! Simulation and analysis toolkit for pair-correlated variational
//! eigensolvers: hard-core boson Hamiltonians, a hop-exchange ansatz on a
//! ladder register, noisy statevector/density-matrix simulation, echo
//! verification and distillation error mitigation, estimator assembly, and
//! a model-gradient-descent optimizer.

pub mod circuits;
pub mod error;
pub mod estimation;
pub mod linalg;
pub mod mitigation;
pub mod models;
pub mod optimizer;
pub mod oracle;
pub mod pauli;
pub mod pipeline;
pub mod presets;
pub mod simulator;

pub use error::{Error, Result};
pub use pauli::{expectation, Pauli, PauliString, PauliSum};
pub use simulator::{
    apply_circuit, DensityState, MeasurementRecord, NoiseModel, PureState, QuantumState, Symmetry,
};
