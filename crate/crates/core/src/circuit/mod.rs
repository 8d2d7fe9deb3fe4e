//! Circuit instruction set.
//!
//! A [`Circuit`] is a straight-line program over gates, computational-basis
//! measurements, postselections, snapshots, rewinds and clones. Any
//! instruction may be guarded by a [`Condition`], a conjunction of equality
//! tests on earlier measurement labels.

mod description;
mod parse;
mod record;

pub(crate) use description::DescriptionTracker;
pub use description::{description_of_prefix, ClassicalDescription, DescriptionOp};
pub use parse::{parse_circuit, serialize_circuit};
pub use record::{MeasurementRecord, RecordEntry};

use std::collections::HashSet;
use std::fmt;

use crate::error::{Error, Result};

/// Default bound on the exponent of the generalized Hadamard gate.
pub const DEFAULT_HK_BOUND: u32 = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum GateKind {
    X,
    H,
    S,
    Cz,
    /// Controlled Hadamard, control first.
    Ch,
    Ccz,
    Swap,
    /// Generalized Hadamard: `|0> -> (|0> + 2^k |1>)/sqrt(1+4^k)`,
    /// `|1> -> (2^k |0> - |1>)/sqrt(1+4^k)`.
    Hk(i32),
    /// Phase rotation `|0><0| + e^{i theta} |1><1|`.
    Rz(f64),
}

impl GateKind {
    pub fn arity(&self) -> usize {
        match self {
            GateKind::X | GateKind::H | GateKind::S | GateKind::Hk(_) | GateKind::Rz(_) => 1,
            GateKind::Cz | GateKind::Ch | GateKind::Swap => 2,
            GateKind::Ccz => 3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GateKind::X => "x",
            GateKind::H => "h",
            GateKind::S => "s",
            GateKind::Cz => "cz",
            GateKind::Ch => "ch",
            GateKind::Ccz => "ccz",
            GateKind::Swap => "swap",
            GateKind::Hk(_) => "hk",
            GateKind::Rz(_) => "rz",
        }
    }

    /// Gates the stabilizer backend can track exactly.
    pub fn is_clifford(&self) -> bool {
        matches!(
            self,
            GateKind::X | GateKind::H | GateKind::S | GateKind::Cz | GateKind::Swap
        )
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateKind::Hk(k) => write!(f, "hk {k}"),
            GateKind::Rz(theta) => write!(f, "rz {theta:?}"),
            other => f.write_str(other.name()),
        }
    }
}

/// Conjunction of `label == bit` tests.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Condition {
    pub clauses: Vec<(String, u8)>,
}

impl Condition {
    pub fn new<S: Into<String>>(clauses: impl IntoIterator<Item = (S, u8)>) -> Self {
        Condition {
            clauses: clauses.into_iter().map(|(l, b)| (l.into(), b)).collect(),
        }
    }

    /// A clause on a label absent from `record` is false.
    pub fn holds(&self, record: &MeasurementRecord) -> bool {
        self.clauses
            .iter()
            .all(|(label, bit)| record.get(label) == Some(*bit))
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (label, bit)) in self.clauses.iter().enumerate() {
            if i > 0 {
                f.write_str(" && ")?;
            }
            write!(f, "{label} == {bit}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Instruction {
    Gate {
        kind: GateKind,
        targets: Vec<usize>,
    },
    Measure {
        qubit: usize,
        label: String,
    },
    Postselect {
        qubit: usize,
        bit: u8,
    },
    Snapshot {
        label: String,
    },
    Rewind {
        label: String,
    },
    Clone {
        label: String,
    },
    Conditional {
        condition: Condition,
        inner: Box<Instruction>,
    },
}

impl Instruction {
    /// The instruction with any condition stripped.
    pub fn body(&self) -> &Instruction {
        match self {
            Instruction::Conditional { inner, .. } => inner,
            other => other,
        }
    }

    pub fn condition(&self) -> Option<&Condition> {
        match self {
            Instruction::Conditional { condition, .. } => Some(condition),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CircuitMeta {
    pub name: Option<String>,
    /// Declared number of rewind instructions.
    pub rewind_budget: Option<usize>,
    /// Upper bound on the encoded length of any snapshot description, in bits.
    pub description_bits: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Circuit {
    pub n_qubits: usize,
    pub instructions: Vec<Instruction>,
    /// Output qubit whose `|1>` projection defines acceptance.
    pub accept: Option<usize>,
    pub meta: CircuitMeta,
    /// Source line of each instruction, when parsed from text.
    lines: Vec<Option<usize>>,
}

impl PartialEq for Circuit {
    fn eq(&self, other: &Self) -> bool {
        self.n_qubits == other.n_qubits
            && self.instructions == other.instructions
            && self.accept == other.accept
            && self.meta == other.meta
    }
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Circuit {
            n_qubits,
            instructions: Vec::new(),
            accept: None,
            meta: CircuitMeta::default(),
            lines: Vec::new(),
        }
    }

    pub fn push(&mut self, instruction: Instruction) -> &mut Self {
        self.instructions.push(instruction);
        self.lines.push(None);
        self
    }

    pub(crate) fn push_at_line(&mut self, instruction: Instruction, line: usize) {
        self.instructions.push(instruction);
        self.lines.push(Some(line));
    }

    pub fn gate(&mut self, kind: GateKind, targets: &[usize]) -> &mut Self {
        self.push(Instruction::Gate {
            kind,
            targets: targets.to_vec(),
        })
    }

    pub fn measure(&mut self, qubit: usize, label: &str) -> &mut Self {
        self.push(Instruction::Measure {
            qubit,
            label: label.to_string(),
        })
    }

    pub fn postselect(&mut self, qubit: usize, bit: u8) -> &mut Self {
        self.push(Instruction::Postselect { qubit, bit })
    }

    pub fn snapshot(&mut self, label: &str) -> &mut Self {
        self.push(Instruction::Snapshot {
            label: label.to_string(),
        })
    }

    pub fn rewind(&mut self, label: &str) -> &mut Self {
        self.push(Instruction::Rewind {
            label: label.to_string(),
        })
    }

    pub fn clone_snapshot(&mut self, label: &str) -> &mut Self {
        self.push(Instruction::Clone {
            label: label.to_string(),
        })
    }

    /// Pushes `instruction` guarded by `condition`.
    pub fn when(&mut self, condition: Condition, instruction: Instruction) -> &mut Self {
        self.push(Instruction::Conditional {
            condition,
            inner: Box::new(instruction),
        })
    }

    pub fn accept(&mut self, qubit: usize) -> &mut Self {
        self.accept = Some(qubit);
        self
    }

    /// Source line of instruction `index`, if known.
    pub fn line_of(&self, index: usize) -> Option<usize> {
        self.lines.get(index).copied().flatten()
    }

    pub fn rewind_count(&self) -> usize {
        self.instructions
            .iter()
            .filter(|i| matches!(i.body(), Instruction::Rewind { .. }))
            .count()
    }

    pub fn measurement_count(&self) -> usize {
        self.instructions
            .iter()
            .filter(|i| matches!(i.body(), Instruction::Measure { .. }))
            .count()
    }

    pub fn is_clifford(&self) -> bool {
        self.instructions.iter().all(|i| match i.body() {
            Instruction::Gate { kind, .. } => kind.is_clifford(),
            _ => true,
        })
    }

    pub fn validate(&self) -> Result<()> {
        validate_with(self, &ValidationOptions::default())
    }
}

/// One violated invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub index: Option<usize>,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.index, self.line) {
            (Some(i), Some(l)) => write!(f, "instruction {i} (line {l}): {}", self.message),
            (Some(i), None) => write!(f, "instruction {i}: {}", self.message),
            _ => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ValidationOptions {
    pub hk_bound: u32,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            hk_bound: DEFAULT_HK_BOUND,
        }
    }
}

pub fn validate(circuit: &Circuit) -> Result<()> {
    circuit.validate()
}

pub fn validate_with(circuit: &Circuit, opts: &ValidationOptions) -> Result<()> {
    let mut diags = Vec::new();
    let n = circuit.n_qubits;
    if n == 0 {
        diags.push(Diagnostic {
            index: None,
            line: None,
            message: "circuit must have at least one qubit".into(),
        });
    }
    if let Some(q) = circuit.accept {
        if q >= n {
            diags.push(Diagnostic {
                index: None,
                line: None,
                message: format!("accept qubit {q} out of range for {n} qubits"),
            });
        }
    }

    let mut measured: HashSet<&str> = HashSet::new();
    let mut snapshots: HashSet<&str> = HashSet::new();

    for (index, instruction) in circuit.instructions.iter().enumerate() {
        let mut report = |message: String| {
            diags.push(Diagnostic {
                index: Some(index),
                line: circuit.line_of(index),
                message,
            })
        };
        let body = match instruction {
            Instruction::Conditional { condition, inner } => {
                if condition.clauses.is_empty() {
                    report("empty condition".into());
                }
                for (label, bit) in &condition.clauses {
                    if !measured.contains(label.as_str()) {
                        report(format!(
                            "condition references `{label}`, which is not measured earlier"
                        ));
                    }
                    if *bit > 1 {
                        report(format!("condition bit {bit} is not 0 or 1"));
                    }
                }
                if matches!(**inner, Instruction::Conditional { .. }) {
                    report("nested conditions are not allowed".into());
                }
                inner.as_ref()
            }
            other => other,
        };
        match body {
            Instruction::Gate { kind, targets } => {
                if targets.len() != kind.arity() {
                    report(format!(
                        "gate {} takes {} targets, got {}",
                        kind.name(),
                        kind.arity(),
                        targets.len()
                    ));
                }
                for &t in targets {
                    if t >= n {
                        report(format!("qubit {t} out of range for {n} qubits"));
                    }
                }
                let distinct: HashSet<_> = targets.iter().collect();
                if distinct.len() != targets.len() {
                    report(format!("duplicate targets in gate {}", kind.name()));
                }
                match kind {
                    GateKind::Hk(k) if k.unsigned_abs() > opts.hk_bound => {
                        report(format!("hk exponent {k} exceeds bound {}", opts.hk_bound))
                    }
                    GateKind::Rz(theta) if !theta.is_finite() => {
                        report("rz angle is not finite".into())
                    }
                    _ => {}
                }
            }
            Instruction::Measure { qubit, label } => {
                if *qubit >= n {
                    report(format!("qubit {qubit} out of range for {n} qubits"));
                }
                if !measured.insert(label.as_str()) {
                    report(format!("measurement label `{label}` reused"));
                }
            }
            Instruction::Postselect { qubit, bit } => {
                if *qubit >= n {
                    report(format!("qubit {qubit} out of range for {n} qubits"));
                }
                if *bit > 1 {
                    report(format!("postselect bit {bit} is not 0 or 1"));
                }
            }
            Instruction::Snapshot { label } => {
                if !snapshots.insert(label.as_str()) {
                    report(format!("snapshot label `{label}` reused"));
                }
            }
            Instruction::Rewind { label } | Instruction::Clone { label } => {
                if !snapshots.contains(label.as_str()) {
                    report(format!("`{label}` is not a snapshot declared earlier"));
                }
            }
            Instruction::Conditional { .. } => {}
        }
    }

    if let Some(budget) = circuit.meta.rewind_budget {
        let count = circuit.rewind_count();
        if count != budget {
            diags.push(Diagnostic {
                index: None,
                line: None,
                message: format!("circuit has {count} rewinds but declares a budget of {budget}"),
            });
        }
    }

    if diags.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(diags))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_messages(err: Error) -> Vec<String> {
        match err {
            Error::Validation(d) => d.into_iter().map(|d| d.message).collect(),
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn rewind_to_undeclared_snapshot_is_rejected() {
        let mut c = Circuit::new(1);
        c.measure(0, "m").rewind("s");
        let msgs = diag_messages(c.validate().unwrap_err());
        assert!(msgs[0].contains("not a snapshot"));
    }

    #[test]
    fn condition_on_later_label_is_rejected() {
        let mut c = Circuit::new(1);
        c.snapshot("s")
            .when(
                Condition::new([("m", 1)]),
                Instruction::Rewind { label: "s".into() },
            )
            .measure(0, "m");
        let msgs = diag_messages(c.validate().unwrap_err());
        assert!(msgs[0].contains("not measured earlier"));
    }

    #[test]
    fn every_violation_is_reported() {
        let mut c = Circuit::new(2);
        c.gate(GateKind::Cz, &[0, 0])
            .gate(GateKind::H, &[5])
            .gate(GateKind::Hk(65), &[0])
            .gate(GateKind::Rz(f64::NAN), &[1]);
        let err = c.validate().unwrap_err();
        let Error::Validation(diags) = err else {
            panic!()
        };
        let indices: Vec<_> = diags.iter().map(|d| d.index).collect();
        assert_eq!(indices, vec![Some(0), Some(1), Some(2), Some(3)]);
    }

    #[test]
    fn rewind_budget_must_match() {
        let mut c = Circuit::new(1);
        c.snapshot("s").measure(0, "m").rewind("s");
        c.meta.rewind_budget = Some(2);
        assert!(c.validate().is_err());
        c.meta.rewind_budget = Some(1);
        c.validate().unwrap();
    }

    #[test]
    fn clifford_detection() {
        let mut c = Circuit::new(2);
        c.gate(GateKind::H, &[0]).gate(GateKind::Cz, &[0, 1]);
        assert!(c.is_clifford());
        c.gate(GateKind::Ch, &[0, 1]);
        assert!(!c.is_clifford());
    }
}
