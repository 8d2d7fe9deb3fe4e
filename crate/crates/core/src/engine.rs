//! Backend-independent circuit execution.
//!
//! The control flow of a circuit (conditions, snapshots, rewinds, clones,
//! postselections) is the same for every backend; a [`Backend`] only has to
//! supply gate application, Z-outcome probabilities and projection.

use std::fmt::Debug;

use rand::Rng;

use crate::circuit::{Circuit, DescriptionTracker, GateKind, Instruction, MeasurementRecord};
use crate::error::{Error, Result};
use crate::statevector::{RewindMode, SnapshotRegistry, ZERO_PROBABILITY};

/// Branch probability as carried by a backend.
pub trait Probability: Clone + Debug + Send + Sync {
    fn one() -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn to_f64(&self) -> f64;
    fn is_zero(&self) -> bool;
}

impl Probability for f64 {
    fn one() -> Self {
        1.0
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn is_zero(&self) -> bool {
        *self <= ZERO_PROBABILITY
    }
}

pub trait Backend: Clone + Send + Sync + Sized {
    type Prob: Probability;
    const NAME: &'static str;

    fn init(n_qubits: usize) -> Result<Self>;
    fn supports(kind: &GateKind) -> bool;
    fn apply_gate(&mut self, kind: &GateKind, targets: &[usize]) -> Result<()>;
    fn outcome_probability(&self, qubit: usize, bit: u8) -> Self::Prob;
    /// Projects onto `bit`. Callers guarantee a nonzero branch.
    fn project(&mut self, qubit: usize, bit: u8);
    /// True when `self` is `pre` after a single-qubit Z projection.
    fn is_projection_of(&self, pre: &Self) -> bool;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    /// Postselections below this probability fail with a threshold error.
    pub min_postselect_prob: f64,
    pub rewind_mode: RewindMode,
    /// Cap on executed rewinds, in addition to the circuit's declared budget.
    pub max_rewinds: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            min_postselect_prob: 0.0,
            rewind_mode: RewindMode::Strict,
            max_rewinds: None,
        }
    }
}

/// Checks every gate line against the backend's gate set.
pub fn check_gate_set<B: Backend>(circuit: &Circuit) -> Result<()> {
    for (i, instr) in circuit.instructions.iter().enumerate() {
        if let Instruction::Gate { kind, .. } = instr.body() {
            if !B::supports(kind) {
                return Err(Error::UnsupportedGate {
                    backend: B::NAME,
                    gate: kind.to_string(),
                    line: circuit.line_of(i),
                });
            }
        }
    }
    Ok(())
}

/// Live state of one execution path.
#[derive(Clone)]
struct Frame<B: Backend> {
    pc: usize,
    state: B,
    record: MeasurementRecord,
    weight: B::Prob,
    tracker: DescriptionTracker,
    registry: SnapshotRegistry<B>,
    rewinds_used: usize,
}

enum Step {
    Measure { qubit: usize, label: String },
    Done,
}

impl<B: Backend> Frame<B> {
    fn new(circuit: &Circuit) -> Result<Self> {
        Ok(Frame {
            pc: 0,
            state: B::init(circuit.n_qubits)?,
            record: MeasurementRecord::new(),
            weight: B::Prob::one(),
            tracker: DescriptionTracker::new(circuit.n_qubits),
            registry: SnapshotRegistry::new(),
            rewinds_used: 0,
        })
    }

    /// Executes instructions up to the next measurement.
    fn advance(&mut self, circuit: &Circuit, cfg: &RunConfig) -> Result<Step> {
        while self.pc < circuit.instructions.len() {
            let instr = &circuit.instructions[self.pc];
            self.pc += 1;
            if let Some(cond) = instr.condition() {
                if !cond.holds(&self.record) {
                    continue;
                }
            }
            match instr.body() {
                Instruction::Gate { kind, targets } => {
                    self.state.apply_gate(kind, targets)?;
                    self.tracker.gate(kind, targets);
                }
                Instruction::Measure { qubit, label } => {
                    return Ok(Step::Measure {
                        qubit: *qubit,
                        label: label.clone(),
                    })
                }
                Instruction::Postselect { qubit, bit } => {
                    let p = self.state.outcome_probability(*qubit, *bit);
                    if p.is_zero() {
                        return Err(Error::InvalidPostselection {
                            qubit: *qubit,
                            bit: *bit,
                        });
                    }
                    let pf = p.to_f64();
                    if pf < cfg.min_postselect_prob {
                        return Err(Error::ThresholdViolation {
                            qubit: *qubit,
                            bit: *bit,
                            probability: pf,
                            min: cfg.min_postselect_prob,
                        });
                    }
                    self.state.project(*qubit, *bit);
                    self.tracker.postselected(*qubit, *bit);
                }
                Instruction::Snapshot { label } => {
                    self.tracker.snapshot(label);
                    self.registry
                        .snapshot(label, &self.state, Some(self.tracker.description()))?;
                }
                Instruction::Rewind { label } => {
                    let budget = match (circuit.meta.rewind_budget, cfg.max_rewinds) {
                        (Some(a), Some(b)) => Some(a.min(b)),
                        (a, b) => a.or(b),
                    };
                    if let Some(budget) = budget {
                        if self.rewinds_used >= budget {
                            return Err(Error::RewindBudgetExceeded { budget });
                        }
                    }
                    let entry = self.registry.get(label)?;
                    if cfg.rewind_mode == RewindMode::Strict
                        && !self.state.is_projection_of(&entry.state)
                    {
                        return Err(Error::RewindInconsistent {
                            label: label.clone(),
                        });
                    }
                    self.state = entry.state.clone();
                    self.tracker.restore(label)?;
                    self.rewinds_used += 1;
                }
                Instruction::Clone { label } => {
                    self.state = self.registry.get(label)?.state.clone();
                    self.tracker.restore(label)?;
                }
                Instruction::Conditional { .. } => unreachable!("body() strips conditions"),
            }
        }
        Ok(Step::Done)
    }

    fn resolve(&mut self, qubit: usize, bit: u8, label: String, p: B::Prob) {
        self.state.project(qubit, bit);
        self.tracker.measured(qubit, bit, &label);
        self.record.push(label, bit, p.to_f64());
        self.weight = self.weight.mul(&p);
    }
}

/// One complete execution path.
#[derive(Debug, Clone)]
pub struct Execution<B: Backend> {
    pub record: MeasurementRecord,
    /// Probability of this record; postselections are conditioned on, not
    /// weighted.
    pub weight: B::Prob,
    pub final_state: B,
    pub rewinds_used: usize,
}

impl<B: Backend> From<Frame<B>> for Execution<B> {
    fn from(f: Frame<B>) -> Self {
        Execution {
            record: f.record,
            weight: f.weight,
            final_state: f.state,
            rewinds_used: f.rewinds_used,
        }
    }
}

/// Executes `circuit` once, sampling every measurement.
pub fn run_sampled<B: Backend, R: Rng + ?Sized>(
    circuit: &Circuit,
    rng: &mut R,
    cfg: &RunConfig,
) -> Result<Execution<B>> {
    check_gate_set::<B>(circuit)?;
    let mut frame = Frame::<B>::new(circuit)?;
    loop {
        match frame.advance(circuit, cfg)? {
            Step::Done => return Ok(frame.into()),
            Step::Measure { qubit, label } => {
                let p1 = frame.state.outcome_probability(qubit, 1);
                let p0 = frame.state.outcome_probability(qubit, 0);
                let (f0, f1) = (p0.to_f64(), p1.to_f64());
                let u: f64 = rng.random::<f64>() * (f0 + f1);
                let (bit, p) = if !p1.is_zero() && (u < f1 || p0.is_zero()) {
                    (1, p1)
                } else {
                    (0, p0)
                };
                frame.resolve(qubit, bit, label, p);
            }
        }
    }
}

/// Enumerates every execution path with nonzero probability.
///
/// Fails with a depth-limit error when a path holds more than `depth_limit`
/// measurements.
pub fn enumerate<B: Backend>(
    circuit: &Circuit,
    cfg: &RunConfig,
    depth_limit: usize,
) -> Result<Vec<Execution<B>>> {
    check_gate_set::<B>(circuit)?;
    let mut out = Vec::new();
    let mut stack = vec![Frame::<B>::new(circuit)?];
    while let Some(mut frame) = stack.pop() {
        match frame.advance(circuit, cfg)? {
            Step::Done => out.push(frame.into()),
            Step::Measure { qubit, label } => {
                if frame.record.len() >= depth_limit {
                    return Err(Error::DepthLimit { limit: depth_limit });
                }
                // Push bit 1 first so paths come out in lexicographic order.
                for bit in [1u8, 0] {
                    let p = frame.state.outcome_probability(qubit, bit);
                    if p.is_zero() {
                        continue;
                    }
                    let mut child = frame.clone();
                    child.resolve(qubit, bit, label.clone(), p);
                    stack.push(child);
                }
            }
        }
    }
    Ok(out)
}

/// `sum_z q_z P(accept = 1 | z)` over the enumerated paths.
pub fn exact_acceptance<B: Backend>(
    circuit: &Circuit,
    cfg: &RunConfig,
    depth_limit: usize,
) -> Result<f64> {
    let accept = circuit.accept.ok_or(Error::NoAcceptQubit)?;
    Ok(enumerate::<B>(circuit, cfg, depth_limit)?
        .iter()
        .map(|e| e.weight.to_f64() * e.final_state.outcome_probability(accept, 1).to_f64())
        .sum())
}
