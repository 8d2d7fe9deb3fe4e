//! Quantum circuit simulation with rewinding, cloning and adaptive
//! postselection.
//!
//! Circuits are written in a small line-oriented format (see
//! [`circuit::parse_circuit`]) and executed on one of three backends:
//!
//! * [`statevector`]: dense amplitudes, any gate.
//! * [`stabilizer`]: bit-packed tableau, Clifford gates only, exact
//!   dyadic probabilities.
//! * [`pathsum`]: Feynman path sum, exact and slow, used as an oracle.
//!
//! On top of these sit protocol drivers: amplitude mitigation
//! ([`mitigation`]), counting, collision finding and distribution
//! distinguishing ([`applications`]), and rewind-driven measurement-based
//! computation ([`mbqc`]).

pub mod applications;
pub mod circuit;
pub mod cli;
pub mod engine;
pub mod error;
pub mod mbqc;
pub mod mitigation;
pub mod pathsum;
pub mod report;
pub mod rng;
pub mod stabilizer;
pub mod statevector;
pub mod trials;

pub use circuit::{parse_circuit, serialize_circuit, Circuit, GateKind, Instruction};
pub use error::{Error, Result};
pub use statevector::PureState;

/// Environment variable overriding the default qubit budget.
pub const MAX_QUBITS_ENV: &str = "RWSIM_MAX_QUBITS";

/// Qubit budget from `RWSIM_MAX_QUBITS`, if set to a positive integer.
pub fn budget_from_env() -> Option<usize> {
    std::env::var(MAX_QUBITS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &usize| n > 0)
}
