//! Exact acceptance probabilities by Feynman path summation.
//!
//! The amplitude of each final basis state `d` is a sum over computational
//! paths of products of gate matrix entries. Paths are enumerated depth
//! first and streamed into one compensated accumulator per `d`, so memory is
//! `O(2^n + depth)` regardless of the number of paths.
//!
//! Runs of single-qubit gates on the same qubit are multiplied out first;
//! only fused matrices with two nonzero entries in a column, and the target
//! of a controlled-Hadamard, open a path variable.

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;

use crate::circuit::{Circuit, DescriptionOp, GateKind, Instruction};
use crate::engine::{self, Backend, RunConfig};
use crate::error::{Error, Result};
use crate::statevector::{
    gate_matrix, is_single_qubit_projection, Matrix2, PureState, REWIND_TOLERANCE,
};

pub const DEFAULT_PATH_BIT_LIMIT: usize = 60;

/// Largest register for which amplitudes are accumulated.
pub const MAX_QUBITS: usize = 24;

/// Matrix entries below this magnitude after fusion are exact zeros.
const FUSED_ZERO: f64 = 1e-14;

/// Branch levels below which the two subtrees run in parallel.
const PARALLEL_LEVELS: usize = 4;

#[derive(Debug, Clone)]
enum PathOp {
    Diagonal { q: usize, d: [Complex64; 2] },
    Flip { q: usize, a: [Complex64; 2] },
    Branch { q: usize, m: Matrix2 },
    ControlledBranch { c: usize, t: usize, m: Matrix2 },
    PhaseFlip { mask: usize },
    Swap { a: usize, b: usize },
    Project { q: usize, bit: u8 },
}

fn mat_mul(a: &Matrix2, b: &Matrix2) -> Matrix2 {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn classify(q: usize, m: Matrix2) -> PathOp {
    let z = |c: Complex64| c.norm() < FUSED_ZERO;
    if z(m[0][1]) && z(m[1][0]) {
        PathOp::Diagonal {
            q,
            d: [m[0][0], m[1][1]],
        }
    } else if z(m[0][0]) && z(m[1][1]) {
        // a[b] is the amplitude of |1-b> from |b>.
        PathOp::Flip {
            q,
            a: [m[1][0], m[0][1]],
        }
    } else {
        PathOp::Branch { q, m }
    }
}

/// Fuses single-qubit runs and lowers gates to path operations.
fn compile(n: usize, ops: &[DescriptionOp]) -> Vec<PathOp> {
    let mut out = Vec::new();
    let mut pending: Vec<Option<Matrix2>> = vec![None; n];
    let flush = |q: usize, pending: &mut Vec<Option<Matrix2>>, out: &mut Vec<PathOp>| {
        if let Some(m) = pending[q].take() {
            out.push(classify(q, m));
        }
    };
    for op in ops {
        match op {
            DescriptionOp::Gate { kind, targets } => {
                if let Some(m) = gate_matrix(kind) {
                    let q = targets[0];
                    pending[q] = Some(match pending[q] {
                        Some(prev) => mat_mul(&m, &prev),
                        None => m,
                    });
                    continue;
                }
                for &t in targets {
                    flush(t, &mut pending, &mut out);
                }
                out.push(match kind {
                    GateKind::Cz | GateKind::Ccz => PathOp::PhaseFlip {
                        mask: targets.iter().fold(0, |m, &t| m | (1 << t)),
                    },
                    GateKind::Swap => PathOp::Swap {
                        a: targets[0],
                        b: targets[1],
                    },
                    GateKind::Ch => PathOp::ControlledBranch {
                        c: targets[0],
                        t: targets[1],
                        m: gate_matrix(&GateKind::H).expect("single-qubit"),
                    },
                    _ => unreachable!("single-qubit kinds handled above"),
                });
            }
            DescriptionOp::Project { qubit, bit } => {
                flush(*qubit, &mut pending, &mut out);
                out.push(PathOp::Project {
                    q: *qubit,
                    bit: *bit,
                });
            }
        }
    }
    for q in 0..n {
        flush(q, &mut pending, &mut out);
    }
    out
}

fn branching_vars(ops: &[PathOp]) -> usize {
    ops.iter()
        .filter(|op| matches!(op, PathOp::Branch { .. } | PathOp::ControlledBranch { .. }))
        .count()
}

/// Number of path bits of an op sequence: `n` input bits plus one per
/// branching variable after fusion.
pub fn path_bits(n: usize, ops: &[DescriptionOp]) -> usize {
    n + branching_vars(&compile(n, ops))
}

/// Kahan-compensated complex accumulator over `2^n` basis states.
struct Accumulator {
    sum: Vec<Complex64>,
    comp: Vec<Complex64>,
}

impl Accumulator {
    fn new(len: usize) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Accumulator {
            sum: vec![zero; len],
            comp: vec![zero; len],
        }
    }

    fn add(&mut self, d: usize, v: Complex64) {
        let y_re = v.re - self.comp[d].re;
        let t_re = self.sum[d].re + y_re;
        self.comp[d].re = (t_re - self.sum[d].re) - y_re;
        self.sum[d].re = t_re;
        let y_im = v.im - self.comp[d].im;
        let t_im = self.sum[d].im + y_im;
        self.comp[d].im = (t_im - self.sum[d].im) - y_im;
        self.sum[d].im = t_im;
    }

    fn merge(&mut self, other: Accumulator) {
        for (d, (s, c)) in other.sum.into_iter().zip(other.comp).enumerate() {
            self.add(d, s);
            self.add(d, -c);
        }
    }
}

fn walk(ops: &[PathOp], i: usize, idx: usize, amp: Complex64, acc: &mut Accumulator, par: usize) {
    let Some(op) = ops.get(i) else {
        acc.add(idx, amp);
        return;
    };
    let bit_of = |q: usize| (idx >> q) & 1;
    match op {
        PathOp::Diagonal { q, d } => {
            let a = amp * d[bit_of(*q)];
            if a.norm_sqr() > 0.0 {
                walk(ops, i + 1, idx, a, acc, par);
            }
        }
        PathOp::Flip { q, a } => {
            let v = amp * a[bit_of(*q)];
            if v.norm_sqr() > 0.0 {
                walk(ops, i + 1, idx ^ (1 << q), v, acc, par);
            }
        }
        PathOp::PhaseFlip { mask } => {
            let a = if idx & mask == *mask { -amp } else { amp };
            walk(ops, i + 1, idx, a, acc, par);
        }
        PathOp::Swap { a, b } => {
            let (ba, bb) = (bit_of(*a), bit_of(*b));
            let j = if ba != bb {
                idx ^ (1 << a) ^ (1 << b)
            } else {
                idx
            };
            walk(ops, i + 1, j, amp, acc, par);
        }
        PathOp::Project { q, bit } => {
            if bit_of(*q) == *bit as usize {
                walk(ops, i + 1, idx, amp, acc, par);
            }
        }
        PathOp::Branch { q, m } => branch(ops, i, idx, *q, m, amp, acc, par),
        PathOp::ControlledBranch { c, t, m } => {
            if bit_of(*c) == 1 {
                branch(ops, i, idx, *t, m, amp, acc, par);
            } else {
                walk(ops, i + 1, idx, amp, acc, par);
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn branch(
    ops: &[PathOp],
    i: usize,
    idx: usize,
    q: usize,
    m: &Matrix2,
    amp: Complex64,
    acc: &mut Accumulator,
    par: usize,
) {
    let b = (idx >> q) & 1;
    let base = idx & !(1 << q);
    let a0 = amp * m[0][b];
    let a1 = amp * m[1][b];
    let live0 = a0.norm_sqr() > 0.0;
    let live1 = a1.norm_sqr() > 0.0;
    if par > 0 && live0 && live1 {
        let mut other = Accumulator::new(acc.sum.len());
        rayon::join(
            || walk(ops, i + 1, base, a0, acc, par - 1),
            || walk(ops, i + 1, base | (1 << q), a1, &mut other, par - 1),
        );
        acc.merge(other);
        return;
    }
    if live0 {
        walk(ops, i + 1, base, a0, acc, par.saturating_sub(1));
    }
    if live1 {
        walk(ops, i + 1, base | (1 << q), a1, acc, par.saturating_sub(1));
    }
}

/// Unnormalized amplitudes `Q|0...0>` of an op sequence whose projectors
/// are applied without renormalization.
pub fn amplitudes(
    n: usize,
    ops: &[DescriptionOp],
    path_bit_limit: usize,
) -> Result<Vec<Complex64>> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::QubitBudget {
            requested: n,
            max: MAX_QUBITS,
        });
    }
    let compiled = compile(n, ops);
    let bits = n + branching_vars(&compiled);
    if bits > path_bit_limit {
        return Err(Error::PathSumLimit {
            bits,
            limit: path_bit_limit,
        });
    }
    let mut acc = Accumulator::new(1 << n);
    walk(
        &compiled,
        0,
        0,
        Complex64::new(1.0, 0.0),
        &mut acc,
        PARALLEL_LEVELS,
    );
    Ok(acc.sum)
}

/// Path-sum backend: the state is the op sequence itself; amplitudes are
/// recomputed by path summation when a probability is needed.
#[derive(Debug, Clone)]
pub struct PathSum {
    n: usize,
    ops: Vec<DescriptionOp>,
    cache: OnceLock<Arc<Vec<Complex64>>>,
}

impl PathSum {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::QubitBudget {
                requested: n,
                max: MAX_QUBITS,
            });
        }
        Ok(PathSum {
            n,
            ops: Vec::new(),
            cache: OnceLock::new(),
        })
    }

    pub fn ops(&self) -> &[DescriptionOp] {
        &self.ops
    }

    fn push(&mut self, op: DescriptionOp) {
        self.ops.push(op);
        self.cache = OnceLock::new();
    }

    fn amps(&self) -> Arc<Vec<Complex64>> {
        self.cache
            .get_or_init(|| {
                Arc::new(
                    amplitudes(self.n, &self.ops, usize::MAX)
                        .expect("register size checked at construction"),
                )
            })
            .clone()
    }

    /// Normalized state, for comparisons.
    pub fn to_state(&self) -> Result<PureState> {
        PureState::from_amplitudes(self.amps().to_vec())
    }
}

impl Backend for PathSum {
    type Prob = f64;
    const NAME: &'static str = "pathsum";

    fn init(n_qubits: usize) -> Result<Self> {
        PathSum::new(n_qubits)
    }

    fn supports(_: &GateKind) -> bool {
        true
    }

    fn apply_gate(&mut self, kind: &GateKind, targets: &[usize]) -> Result<()> {
        if targets.len() != kind.arity() || targets.iter().any(|&t| t >= self.n) {
            return Err(Error::InvalidTargets(format!(
                "{kind} on {targets:?} with {} qubits",
                self.n
            )));
        }
        self.push(DescriptionOp::Gate {
            kind: kind.clone(),
            targets: targets.to_vec(),
        });
        Ok(())
    }

    fn outcome_probability(&self, qubit: usize, bit: u8) -> f64 {
        let amps = self.amps();
        let mut total = 0.0;
        let mut hit = 0.0;
        for (i, a) in amps.iter().enumerate() {
            let p = a.norm_sqr();
            total += p;
            if (i >> qubit) & 1 == bit as usize {
                hit += p;
            }
        }
        if total > 0.0 {
            hit / total
        } else {
            0.0
        }
    }

    fn project(&mut self, qubit: usize, bit: u8) {
        self.push(DescriptionOp::Project { qubit, bit });
    }

    fn is_projection_of(&self, pre: &Self) -> bool {
        match (pre.to_state(), self.to_state()) {
            (Ok(a), Ok(b)) => is_single_qubit_projection(&a, &b, REWIND_TOLERANCE),
            _ => false,
        }
    }
}

/// Path bits of the longest op sequence any execution of `circuit` can
/// reach: every gate and postselection counted regardless of conditions.
pub fn circuit_path_bits(circuit: &Circuit) -> usize {
    let ops: Vec<DescriptionOp> = circuit
        .instructions
        .iter()
        .filter_map(|i| match i.body() {
            Instruction::Gate { kind, targets } => Some(DescriptionOp::Gate {
                kind: kind.clone(),
                targets: targets.clone(),
            }),
            _ => None,
        })
        .collect();
    path_bits(circuit.n_qubits, &ops)
}

fn check_size(circuit: &Circuit, limit: usize) -> Result<()> {
    let bits = circuit_path_bits(circuit);
    if bits > limit {
        return Err(Error::PathSumLimit { bits, limit });
    }
    Ok(())
}

/// `sum_z q_z P(accept = 1 | z)`, with every `q_z` and conditional
/// probability computed by path summation.
pub fn acceptance_probability(
    circuit: &Circuit,
    cfg: &RunConfig,
    path_bit_limit: usize,
) -> Result<f64> {
    check_size(circuit, path_bit_limit)?;
    engine::exact_acceptance::<PathSum>(circuit, cfg, usize::MAX)
}

/// Exact outcome-string distribution.
pub fn outcome_distribution(
    circuit: &Circuit,
    cfg: &RunConfig,
    path_bit_limit: usize,
) -> Result<BTreeMap<String, f64>> {
    check_size(circuit, path_bit_limit)?;
    let mut dist = BTreeMap::new();
    for e in engine::enumerate::<PathSum>(circuit, cfg, usize::MAX)? {
        *dist.entry(e.record.outcome_key()).or_insert(0.0) += e.weight;
    }
    Ok(dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::parse_circuit;
    use crate::statevector;

    fn acc(text: &str) -> f64 {
        let c = parse_circuit(text).unwrap();
        acceptance_probability(&c, &RunConfig::default(), DEFAULT_PATH_BIT_LIMIT).unwrap()
    }

    #[test]
    fn single_hadamard() {
        assert!((acc("qubits 1\ngate h 0\naccept 0") - 0.5).abs() < 1e-15);
        assert!(acc("qubits 1\ngate h 0\ngate h 0\naccept 0").abs() < 1e-15);
    }

    #[test]
    fn fusion_removes_path_variables() {
        let ops = vec![
            DescriptionOp::Gate {
                kind: GateKind::H,
                targets: vec![0],
            },
            DescriptionOp::Gate {
                kind: GateKind::H,
                targets: vec![0],
            },
        ];
        assert_eq!(path_bits(1, &ops), 1);
        let ops = vec![DescriptionOp::Gate {
            kind: GateKind::Ch,
            targets: vec![0, 1],
        }];
        assert_eq!(path_bits(2, &ops), 3);
    }

    #[test]
    fn size_gate() {
        let mut text = String::from("qubits 2\naccept 0\n");
        for _ in 0..70 {
            text.push_str("gate h 0\ngate cz 0 1\n");
        }
        let c = parse_circuit(&text).unwrap();
        assert!(matches!(
            acceptance_probability(&c, &RunConfig::default(), DEFAULT_PATH_BIT_LIMIT),
            Err(Error::PathSumLimit { .. })
        ));
    }

    #[test]
    fn matches_statevector_with_measurements_and_rewinds() {
        let text = include_str!("../fixtures/retry_until_zero.qc");
        assert!((acc(text) - 7.0 / 8.0).abs() < 1e-12);
        let text = "qubits 3\ngate hk 2 0\ngate ch 0 1\ngate rz 0.3 1\ngate h 1\nmeasure 1 -> a\n\
                    gate ccz 0 1 2\ngate h 2\npostselect 2 = 1\ngate swap 0 2\ngate h 0\naccept 0";
        let c = parse_circuit(text).unwrap();
        let sv = statevector::exact_acceptance(&c, &RunConfig::default()).unwrap();
        assert!((acc(text) - sv).abs() < 1e-12);
    }

    #[test]
    fn amplitudes_of_entangled_state() {
        let ops = vec![
            DescriptionOp::Gate {
                kind: GateKind::H,
                targets: vec![0],
            },
            DescriptionOp::Gate {
                kind: GateKind::H,
                targets: vec![1],
            },
            DescriptionOp::Gate {
                kind: GateKind::Cz,
                targets: vec![0, 1],
            },
        ];
        let a = amplitudes(2, &ops, 60).unwrap();
        let want = [0.5, 0.5, 0.5, -0.5];
        for (x, w) in a.iter().zip(want) {
            assert!((x.re - w).abs() < 1e-15 && x.im.abs() < 1e-15);
        }
    }
}
