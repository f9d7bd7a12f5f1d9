//! Trainable parametric-circuit QRAM on a from-scratch statevector simulator.
//!
//! * [`statevector`]: amplitudes, gates, Pauli-Z readout
//! * [`circuit`]: embeddings and the convolution / pooling / entangling templates
//! * [`training`]: adjoint gradients, losses, Adam, minibatching
//! * [`binary`]: address->bits storage with optional clustering
//! * [`ml`]: digit-image QRAM, QRAM-fed classifier and baselines
//! * [`gradcheck`]: randomized gradient cross-checks
//! * [`harness`]: metrics CSV and run manifests

pub mod binary;
pub mod circuit;
pub mod config;
pub mod error;
pub mod gradcheck;
pub mod harness;
pub mod ml;
pub mod seeding;
pub mod statevector;
pub mod training;

pub use circuit::{build_qram_circuit, ParamCircuit, QramArchitecture};
pub use config::TrainConfig;
pub use error::{QramError, Result};
pub use statevector::{Angle, Gate, GateKind, Statevector};
