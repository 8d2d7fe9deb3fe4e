//! Classical descriptions of intermediate states.
//!
//! A description is the executed operator prefix leading to a state, with
//! every measurement replaced by the projector onto its recorded outcome.
//! Replaying it on `|0...0>` and renormalizing after each projector
//! reproduces the state exactly.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{Circuit, GateKind, Instruction, MeasurementRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum DescriptionOp {
    Gate { kind: GateKind, targets: Vec<usize> },
    Project { qubit: usize, bit: u8 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalDescription {
    pub n_qubits: usize,
    pub ops: Vec<DescriptionOp>,
    /// Outcomes of the measurements resolved into projectors, in order.
    pub outcomes: Vec<u8>,
}

impl ClassicalDescription {
    pub fn new(n_qubits: usize) -> Self {
        ClassicalDescription {
            n_qubits,
            ops: Vec::new(),
            outcomes: Vec::new(),
        }
    }

    pub fn gate(mut self, kind: GateKind, targets: &[usize]) -> Self {
        self.ops.push(DescriptionOp::Gate {
            kind,
            targets: targets.to_vec(),
        });
        self
    }

    pub fn project(mut self, qubit: usize, bit: u8) -> Self {
        self.ops.push(DescriptionOp::Project { qubit, bit });
        self
    }

    /// Serialized form: a `qubits` line, an `outcomes` line, then one
    /// `gate`/`postselect` line per op.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "qubits {}", self.n_qubits);
        let bits: String = self.outcomes.iter().map(|b| char::from(b'0' + b)).collect();
        let _ = writeln!(out, "outcomes {bits}");
        for op in &self.ops {
            match op {
                DescriptionOp::Gate { kind, targets } => {
                    let _ = write!(out, "gate {kind}");
                    for t in targets {
                        let _ = write!(out, " {t}");
                    }
                    out.push('\n');
                }
                DescriptionOp::Project { qubit, bit } => {
                    let _ = writeln!(out, "postselect {qubit} = {bit}");
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let bad = |line: usize, msg: &str| Error::Parse {
            line: line + 1,
            message: msg.to_string(),
        };
        let (i, first) = lines.next().ok_or_else(|| bad(0, "empty description"))?;
        let n_qubits = first
            .trim()
            .strip_prefix("qubits ")
            .and_then(|n| n.trim().parse().ok())
            .ok_or_else(|| bad(i, "expected `qubits N`"))?;
        let (i, second) = lines
            .next()
            .ok_or_else(|| bad(i, "missing outcomes line"))?;
        let bits = second
            .trim()
            .strip_prefix("outcomes")
            .ok_or_else(|| bad(i, "expected `outcomes`"))?
            .trim();
        let outcomes = bits
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(bad(i, "outcome bits must be 0 or 1")),
            })
            .collect::<Result<Vec<u8>>>()?;

        // The op lines use the circuit grammar restricted to gates and
        // unconditional postselections.
        let mut body = format!("qubits {n_qubits}\n");
        for (_, l) in lines {
            body.push_str(l);
            body.push('\n');
        }
        let circuit = super::parse_circuit(&body)?;
        let ops = circuit
            .instructions
            .into_iter()
            .enumerate()
            .map(|(idx, instr)| match instr {
                Instruction::Gate { kind, targets } => Ok(DescriptionOp::Gate { kind, targets }),
                Instruction::Postselect { qubit, bit } => Ok(DescriptionOp::Project { qubit, bit }),
                _ => Err(bad(idx + 2, "descriptions hold only gates and projectors")),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ClassicalDescription {
            n_qubits,
            ops,
            outcomes,
        })
    }

    /// Length of the serialized form in bits.
    pub fn encoded_bits(&self) -> usize {
        8 * self.to_text().len()
    }
}

#[derive(Debug, Clone)]
struct Prefix {
    ops: Vec<DescriptionOp>,
    /// Measurement label behind each projector, `None` for postselections
    /// and gates.
    labels: Vec<Option<String>>,
    outcomes: Vec<u8>,
}

/// Follows one execution path and keeps the description of the current
/// state. Rewinding or cloning resets it to the snapshot's prefix.
#[derive(Debug, Clone)]
pub(crate) struct DescriptionTracker {
    n_qubits: usize,
    current: Prefix,
    snapshots: HashMap<String, Prefix>,
}

impl DescriptionTracker {
    pub fn new(n_qubits: usize) -> Self {
        DescriptionTracker {
            n_qubits,
            current: Prefix {
                ops: Vec::new(),
                labels: Vec::new(),
                outcomes: Vec::new(),
            },
            snapshots: HashMap::new(),
        }
    }

    pub fn gate(&mut self, kind: &GateKind, targets: &[usize]) {
        self.current.ops.push(DescriptionOp::Gate {
            kind: kind.clone(),
            targets: targets.to_vec(),
        });
        self.current.labels.push(None);
    }

    pub fn measured(&mut self, qubit: usize, bit: u8, label: &str) {
        self.current.ops.push(DescriptionOp::Project { qubit, bit });
        self.current.labels.push(Some(label.to_string()));
        self.current.outcomes.push(bit);
    }

    pub fn postselected(&mut self, qubit: usize, bit: u8) {
        self.current.ops.push(DescriptionOp::Project { qubit, bit });
        self.current.labels.push(None);
    }

    pub fn snapshot(&mut self, label: &str) {
        self.snapshots
            .insert(label.to_string(), self.current.clone());
    }

    pub fn restore(&mut self, label: &str) -> Result<()> {
        let prefix = self
            .snapshots
            .get(label)
            .ok_or_else(|| Error::UnknownSnapshot(label.to_string()))?;
        self.current = prefix.clone();
        Ok(())
    }

    pub fn label_of_op(&self, op: usize) -> Option<&str> {
        self.current.labels.get(op).and_then(|l| l.as_deref())
    }

    pub fn description(&self) -> ClassicalDescription {
        ClassicalDescription {
            n_qubits: self.n_qubits,
            ops: self.current.ops.clone(),
            outcomes: self.current.outcomes.clone(),
        }
    }
}

/// Description of the state at `snapshot_label` on the branch fixed by
/// `record`.
///
/// Control flow before the snapshot is resolved from `record` alone, so the
/// same record always yields the same description.
pub fn description_of_prefix(
    circuit: &Circuit,
    record: &MeasurementRecord,
    snapshot_label: &str,
) -> Result<ClassicalDescription> {
    let mut tracker = DescriptionTracker::new(circuit.n_qubits);
    let mut seen = MeasurementRecord::new();
    let mut found = false;

    for instr in &circuit.instructions {
        if let Some(cond) = instr.condition() {
            if !cond.holds(&seen) {
                continue;
            }
        }
        match instr.body() {
            Instruction::Gate { kind, targets } => tracker.gate(kind, targets),
            Instruction::Measure { qubit, label } => {
                let bit = record
                    .get(label)
                    .ok_or_else(|| Error::IncompleteRecord(label.clone()))?;
                tracker.measured(*qubit, bit, label);
                seen.push(label.clone(), bit, 1.0);
            }
            Instruction::Postselect { qubit, bit } => tracker.postselected(*qubit, *bit),
            Instruction::Snapshot { label } => {
                tracker.snapshot(label);
                if label == snapshot_label {
                    found = true;
                    break;
                }
            }
            Instruction::Rewind { label } | Instruction::Clone { label } => {
                tracker.restore(label)?
            }
            Instruction::Conditional { .. } => unreachable!("body() strips conditions"),
        }
    }
    if !found {
        return Err(Error::UnknownSnapshot(snapshot_label.to_string()));
    }

    let description = tracker.description();
    if let Err(Error::ZeroNormReplay { op }) =
        crate::statevector::clone_from_description(&description)
    {
        let label = tracker
            .label_of_op(op)
            .map(str::to_string)
            .unwrap_or_else(|| format!("postselection at op {op}"));
        return Err(Error::ZeroProbabilityBranch(label));
    }
    if let Some(budget) = circuit.meta.description_bits {
        let bits = description.encoded_bits();
        if bits > budget {
            return Err(Error::DescriptionTooLong { bits, budget });
        }
    }
    Ok(description)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::parse_circuit;

    #[test]
    fn text_round_trip() {
        let d = ClassicalDescription {
            n_qubits: 2,
            ops: vec![
                DescriptionOp::Gate {
                    kind: GateKind::Hk(-2),
                    targets: vec![1],
                },
                DescriptionOp::Project { qubit: 1, bit: 1 },
            ],
            outcomes: vec![1],
        };
        assert_eq!(ClassicalDescription::from_text(&d.to_text()).unwrap(), d);
        assert_eq!(d.encoded_bits(), 8 * d.to_text().len());
    }

    #[test]
    fn incomplete_record_is_rejected() {
        let c = parse_circuit("qubits 1\ngate h 0\nmeasure 0 -> m\nsnapshot s").unwrap();
        let e = description_of_prefix(&c, &MeasurementRecord::new(), "s").unwrap_err();
        assert_eq!(e, Error::IncompleteRecord("m".into()));
    }

    #[test]
    fn zero_probability_branch_is_rejected() {
        let c = parse_circuit("qubits 1\nmeasure 0 -> m\nsnapshot s").unwrap();
        let rec = MeasurementRecord::from_bits([("m", 1)]);
        let e = description_of_prefix(&c, &rec, "s").unwrap_err();
        assert_eq!(e, Error::ZeroProbabilityBranch("m".into()));
    }

    #[test]
    fn rewind_resets_the_prefix() {
        let c = parse_circuit(
            "qubits 1\ngate h 0\nsnapshot a\nmeasure 0 -> m\nrewind a if m == 1\nsnapshot b",
        )
        .unwrap();
        let rec = MeasurementRecord::from_bits([("m", 1)]);
        let d = description_of_prefix(&c, &rec, "b").unwrap();
        assert_eq!(d.ops.len(), 1);
        let rec = MeasurementRecord::from_bits([("m", 0)]);
        let d = description_of_prefix(&c, &rec, "b").unwrap();
        assert_eq!(d.ops.len(), 2);
        assert_eq!(d.outcomes, vec![0]);
    }

    #[test]
    fn description_budget_is_enforced() {
        let mut c = parse_circuit("qubits 1\ngate h 0\nsnapshot s").unwrap();
        c.meta.description_bits = Some(16);
        let e = description_of_prefix(&c, &MeasurementRecord::new(), "s").unwrap_err();
        assert!(matches!(e, Error::DescriptionTooLong { budget: 16, .. }));
    }
}
