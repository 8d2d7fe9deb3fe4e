use std::collections::BTreeMap;

use rand::Rng;

use super::{
    registry::is_single_qubit_projection, PureState, DEFAULT_MAX_QUBITS, REWIND_TOLERANCE,
};
use crate::circuit::{Circuit, GateKind, MeasurementRecord};
use crate::engine::{self, Backend, RunConfig};
use crate::error::Result;

impl Backend for PureState {
    type Prob = f64;
    const NAME: &'static str = "sv";

    fn init(n_qubits: usize) -> Result<Self> {
        PureState::init_with_max(
            n_qubits,
            crate::budget_from_env().unwrap_or(DEFAULT_MAX_QUBITS),
        )
    }

    fn supports(_: &GateKind) -> bool {
        true
    }

    fn apply_gate(&mut self, kind: &GateKind, targets: &[usize]) -> Result<()> {
        PureState::apply_gate(self, kind, targets)
    }

    fn outcome_probability(&self, qubit: usize, bit: u8) -> f64 {
        self.probability(qubit, bit)
    }

    fn project(&mut self, qubit: usize, bit: u8) {
        let p = self.probability(qubit, bit);
        self.project_unchecked(qubit, bit, p);
    }

    fn is_projection_of(&self, pre: &Self) -> bool {
        is_single_qubit_projection(pre, self, REWIND_TOLERANCE)
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub record: MeasurementRecord,
    /// Sampled readout of the accept qubit; `None` when none is declared.
    pub accept_bit: Option<u8>,
    pub accept_probability: Option<f64>,
    /// State before the accept readout.
    pub final_state: PureState,
    pub rewinds_used: usize,
}

/// Executes `circuit` once on the dense backend.
pub fn run<R: Rng + ?Sized>(circuit: &Circuit, rng: &mut R, cfg: &RunConfig) -> Result<RunResult> {
    let exec = engine::run_sampled::<PureState, R>(circuit, rng, cfg)?;
    let accept_probability = circuit.accept.map(|q| exec.final_state.probability(q, 1));
    let accept_bit = accept_probability.map(|p| u8::from(rng.random::<f64>() < p));
    Ok(RunResult {
        record: exec.record,
        accept_bit,
        accept_probability,
        final_state: exec.final_state,
        rewinds_used: exec.rewinds_used,
    })
}

/// Exact probability of every outcome string, keyed by
/// [`MeasurementRecord::outcome_key`].
pub fn exact_distribution(circuit: &Circuit, cfg: &RunConfig) -> Result<BTreeMap<String, f64>> {
    let mut dist = BTreeMap::new();
    for e in engine::enumerate::<PureState>(circuit, cfg, usize::MAX)? {
        *dist.entry(e.record.outcome_key()).or_insert(0.0) += e.weight;
    }
    Ok(dist)
}

/// Exact acceptance probability.
pub fn exact_acceptance(circuit: &Circuit, cfg: &RunConfig) -> Result<f64> {
    engine::exact_acceptance::<PureState>(circuit, cfg, usize::MAX)
}
