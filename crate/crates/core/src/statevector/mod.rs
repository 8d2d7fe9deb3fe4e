//! Dense pure-state backend.
//!
//! Qubit `q` is bit `q` of the basis index (little-endian). Amplitudes are
//! `Complex64`; norms are kept at 1 after every projective step.

mod registry;
mod run;

pub use registry::{
    is_single_qubit_projection, rewind, RewindMode, SnapshotEntry, SnapshotRegistry,
    REWIND_TOLERANCE,
};
pub use run::{exact_acceptance, exact_distribution, run, RunResult};

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;

use crate::circuit::{ClassicalDescription, DescriptionOp, GateKind};
use crate::error::{Error, Result};

/// Default cap on the number of qubits of a dense state.
pub const DEFAULT_MAX_QUBITS: usize = 24;

/// Branches with probability at or below this are treated as impossible.
pub const ZERO_PROBABILITY: f64 = 1e-24;

pub type Matrix2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// 2x2 matrix of a single-qubit gate kind.
pub fn gate_matrix(kind: &GateKind) -> Option<Matrix2> {
    let h = FRAC_1_SQRT_2;
    Some(match kind {
        GateKind::X => [[ZERO, ONE], [ONE, ZERO]],
        GateKind::H => [[real(h), real(h)], [real(h), real(-h)]],
        GateKind::S => [[ONE, ZERO], [ZERO, Complex64::i()]],
        GateKind::Hk(k) => {
            let t = 2f64.powi(*k);
            let norm = (1.0 + t * t).sqrt();
            // Columns are the images of |0> and |1>.
            [
                [real(1.0 / norm), real(t / norm)],
                [real(t / norm), real(-1.0 / norm)],
            ]
        }
        GateKind::Rz(theta) => [[ONE, ZERO], [ZERO, Complex64::from_polar(1.0, *theta)]],
        _ => return None,
    })
}

/// Normalized pure state on `n` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    n: usize,
    amps: Vec<Complex64>,
}

impl PureState {
    /// `|0...0>` on `n` qubits, `1 <= n <= DEFAULT_MAX_QUBITS`.
    pub fn init(n: usize) -> Result<Self> {
        Self::init_with_max(n, DEFAULT_MAX_QUBITS)
    }

    pub fn init_with_max(n: usize, max: usize) -> Result<Self> {
        if n == 0 || n > max {
            return Err(Error::QubitBudget { requested: n, max });
        }
        Ok(Self::zero(n))
    }

    pub(crate) fn zero(n: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n];
        amps[0] = ONE;
        PureState { n, amps }
    }

    /// Builds a state from raw amplitudes, normalizing them.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "amplitude vector length {len} is not a power of two >= 2"
            )));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm <= ZERO_PROBABILITY {
            return Err(Error::InvalidArgument("zero vector".into()));
        }
        let n = len.trailing_zeros() as usize;
        let mut s = PureState { n, amps };
        s.scale(1.0 / norm);
        Ok(s)
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::from_amplitudes(amps.iter().map(|&a| real(a)).collect())
    }

    /// Computational basis state; bit `q` of `index` is qubit `q`.
    pub fn basis(n: usize, index: usize) -> Result<Self> {
        let mut s = Self::init_with_max(n, usize::MAX)?;
        if index >= 1 << n {
            return Err(Error::InvalidArgument(format!(
                "basis index {index} out of range"
            )));
        }
        s.amps[0] = ZERO;
        s.amps[index] = ONE;
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amps[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn scale(&mut self, factor: f64) {
        for a in &mut self.amps {
            *a *= factor;
        }
    }

    fn check_targets(&self, targets: &[usize]) -> Result<()> {
        for (i, &t) in targets.iter().enumerate() {
            if t >= self.n {
                return Err(Error::InvalidTargets(format!(
                    "qubit {t} out of range for {} qubits",
                    self.n
                )));
            }
            if targets[..i].contains(&t) {
                return Err(Error::InvalidTargets(format!("qubit {t} repeated")));
            }
        }
        Ok(())
    }

    pub fn apply_gate(&mut self, kind: &GateKind, targets: &[usize]) -> Result<()> {
        self.check_targets(targets)?;
        if targets.len() != kind.arity() {
            return Err(Error::InvalidTargets(format!(
                "gate {} takes {} targets, got {}",
                kind.name(),
                kind.arity(),
                targets.len()
            )));
        }
        match kind {
            GateKind::Cz => self.apply_phase_flip(&[targets[0], targets[1]]),
            GateKind::Ccz => self.apply_phase_flip(targets),
            GateKind::Swap => self.apply_swap(targets[0], targets[1]),
            GateKind::Ch => {
                let h = gate_matrix(&GateKind::H).expect("single-qubit");
                self.apply_controlled(targets[0], 1, targets[1], &h)
            }
            single => {
                let m = gate_matrix(single).expect("single-qubit");
                self.apply_single(targets[0], &m)
            }
        }
        Ok(())
    }

    /// Applies `m` to qubit `q`. `q` must be in range.
    pub fn apply_single(&mut self, q: usize, m: &Matrix2) {
        let bit = 1usize << q;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let a0 = self.amps[i];
                let a1 = self.amps[i | bit];
                self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[i | bit] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }

    /// Applies `m` to `target` on the subspace where `control` reads
    /// `control_value`.
    pub fn apply_controlled(
        &mut self,
        control: usize,
        control_value: u8,
        target: usize,
        m: &Matrix2,
    ) {
        let cbit = 1usize << control;
        let tbit = 1usize << target;
        let want = if control_value == 1 { cbit } else { 0 };
        for i in 0..self.amps.len() {
            if i & tbit == 0 && i & cbit == want {
                let a0 = self.amps[i];
                let a1 = self.amps[i | tbit];
                self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[i | tbit] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }

    fn apply_phase_flip(&mut self, qubits: &[usize]) {
        let mask = qubits.iter().fold(0usize, |m, &q| m | (1 << q));
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & mask == mask {
                *a = -*a;
            }
        }
    }

    fn apply_swap(&mut self, a: usize, b: usize) {
        let (ba, bb) = (1usize << a, 1usize << b);
        for i in 0..self.amps.len() {
            if i & ba != 0 && i & bb == 0 {
                self.amps.swap(i, (i & !ba) | bb);
            }
        }
    }

    /// Permutes basis states by XOR-ing `f(input)` into the output register:
    /// `|x>|y> -> |x>|y ^ f(x)>`. Register bit `j` is qubit `reg[j]`.
    pub fn apply_oracle(
        &mut self,
        input: &[usize],
        output: &[usize],
        f: impl Fn(u64) -> u64,
    ) -> Result<()> {
        let all: Vec<usize> = input.iter().chain(output).copied().collect();
        self.check_targets(&all)?;
        let mut next = vec![ZERO; self.amps.len()];
        for (i, a) in self.amps.iter().enumerate() {
            if *a == ZERO {
                continue;
            }
            let x = gather(i, input);
            let fx = f(x);
            let mut j = i;
            for (k, &q) in output.iter().enumerate() {
                if (fx >> k) & 1 == 1 {
                    j ^= 1 << q;
                }
            }
            next[j] = *a;
        }
        self.amps = next;
        Ok(())
    }

    /// Probability that qubit `q` reads `bit`.
    pub fn probability(&self, q: usize, bit: u8) -> f64 {
        let mask = 1usize << q;
        let want = if bit == 1 { mask } else { 0 };
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask == want)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Projects qubit `q` onto `bit` and renormalizes. Returns the branch
    /// probability.
    pub fn project(&mut self, q: usize, bit: u8) -> Result<f64> {
        self.check_targets(&[q])?;
        let p = self.probability(q, bit);
        if p <= ZERO_PROBABILITY {
            return Err(Error::InvalidPostselection { qubit: q, bit });
        }
        self.project_unchecked(q, bit, p);
        Ok(p)
    }

    pub(crate) fn project_unchecked(&mut self, q: usize, bit: u8, p: f64) {
        let mask = 1usize << q;
        let keep = if bit == 1 { mask } else { 0 };
        let s = 1.0 / p.sqrt();
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & mask == keep {
                *a *= s;
            } else {
                *a = ZERO;
            }
        }
    }

    /// Z measurement of qubit `q`: samples a bit with its Born probability
    /// and collapses onto it. Returns `(bit, probability)`.
    pub fn measure<R: Rng + ?Sized>(&mut self, q: usize, rng: &mut R) -> Result<(u8, f64)> {
        self.check_targets(&[q])?;
        let p1 = self.probability(q, 1);
        let p0 = self.probability(q, 0);
        let u: f64 = rng.random::<f64>() * (p0 + p1);
        let bit = if u < p1 { 1 } else { 0 };
        let p = if bit == 1 { p1 } else { p0 };
        self.project_unchecked(q, bit, p);
        Ok((bit, p))
    }

    /// Postselects qubit `q` onto `bit`. Fails when the branch probability
    /// is zero or below `min_prob`.
    pub fn postselect(&mut self, q: usize, bit: u8, min_prob: f64) -> Result<f64> {
        self.check_targets(&[q])?;
        let p = self.probability(q, bit);
        if p <= ZERO_PROBABILITY {
            return Err(Error::InvalidPostselection { qubit: q, bit });
        }
        if p < min_prob {
            return Err(Error::ThresholdViolation {
                qubit: q,
                bit,
                probability: p,
                min: min_prob,
            });
        }
        self.project_unchecked(q, bit, p);
        Ok(p)
    }

    /// Measures the register `qubits` in one pass. Bit `j` of the returned
    /// value is qubit `qubits[j]`. Equivalent in distribution to measuring
    /// the qubits one at a time.
    pub fn measure_register<R: Rng + ?Sized>(
        &mut self,
        qubits: &[usize],
        rng: &mut R,
    ) -> Result<(u64, f64)> {
        self.check_targets(qubits)?;
        let contiguous = qubits.windows(2).all(|w| w[1] == w[0] + 1);
        let (shift, mask) = (
            qubits.first().copied().unwrap_or(0),
            (1usize << qubits.len()) - 1,
        );
        let key = |i: usize| {
            if contiguous {
                (i >> shift) & mask
            } else {
                gather(i, qubits) as usize
            }
        };
        let mut marginal = vec![0.0f64; 1 << qubits.len()];
        for (i, a) in self.amps.iter().enumerate() {
            let w = a.norm_sqr();
            if w != 0.0 {
                marginal[key(i)] += w;
            }
        }
        let total: f64 = marginal.iter().sum();
        let mut u: f64 = rng.random::<f64>() * total;
        let mut value = marginal.len() - 1;
        for (v, &p) in marginal.iter().enumerate() {
            if p > 0.0 && u < p {
                value = v;
                break;
            }
            u -= p;
        }
        while marginal[value] <= 0.0 {
            value -= 1;
        }
        let p = marginal[value] / total;
        let s = 1.0 / marginal[value].sqrt();
        for (i, a) in self.amps.iter_mut().enumerate() {
            if key(i) == value {
                *a *= s;
            } else {
                *a = ZERO;
            }
        }
        Ok((value as u64, p))
    }

    /// Appends `k` qubits in `|0>` as the new highest-index qubits.
    pub fn append_qubits(&mut self, k: usize) {
        self.amps.resize(self.amps.len() << k, ZERO);
        self.n += k;
    }

    /// Removes qubit `q`, which must be in a computational basis state
    /// (within 1e-12 of probability). Returns its value.
    pub fn discard_qubit(&mut self, q: usize) -> Result<u8> {
        self.check_targets(&[q])?;
        if self.n == 1 {
            return Err(Error::InvalidArgument(
                "cannot discard the last qubit".into(),
            ));
        }
        let p1 = self.probability(q, 1);
        let bit = if p1 > 1.0 - 1e-12 {
            1
        } else if p1 < 1e-12 {
            0
        } else {
            return Err(Error::InvalidArgument(format!(
                "qubit {q} is not in a basis state (P(1) = {p1})"
            )));
        };
        let low_mask = (1usize << q) - 1;
        let mut next = vec![ZERO; self.amps.len() / 2];
        for (j, slot) in next.iter_mut().enumerate() {
            let i = (j & low_mask) | ((j & !low_mask) << 1) | ((bit as usize) << q);
            *slot = self.amps[i];
        }
        self.amps = next;
        self.n -= 1;
        let norm = self.norm_sqr().sqrt();
        self.scale(1.0 / norm);
        Ok(bit)
    }

    /// Inner product `<self|other>`.
    pub fn inner(&self, other: &PureState) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &PureState) -> f64 {
        if self.n != other.n {
            return 0.0;
        }
        self.inner(other).norm_sqr()
    }

    /// Amplitude-wise comparison after removing the relative global phase.
    pub fn approx_eq_up_to_phase(&self, other: &PureState, tol: f64) -> bool {
        if self.n != other.n {
            return false;
        }
        let overlap = self.inner(other);
        if overlap.norm() <= ZERO_PROBABILITY {
            return false;
        }
        let phase = overlap / overlap.norm();
        self.amps
            .iter()
            .zip(&other.amps)
            .all(|(a, b)| (a * phase - b).norm() <= tol)
    }

    /// Maximum amplitude-wise difference, without phase alignment.
    pub fn max_abs_diff(&self, other: &PureState) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Collects the bits of `index` at positions `qubits` into a register value.
pub(crate) fn gather(index: usize, qubits: &[usize]) -> u64 {
    qubits
        .iter()
        .enumerate()
        .fold(0u64, |v, (j, &q)| v | ((((index >> q) & 1) as u64) << j))
}

/// Replays a description on `|0...0>`, renormalizing after every projector.
pub fn clone_from_description(description: &ClassicalDescription) -> Result<PureState> {
    let mut state = PureState::zero(description.n_qubits);
    for (op_index, op) in description.ops.iter().enumerate() {
        match op {
            DescriptionOp::Gate { kind, targets } => state.apply_gate(kind, targets)?,
            DescriptionOp::Project { qubit, bit } => {
                state.check_targets(&[*qubit])?;
                let p = state.probability(*qubit, *bit);
                if p <= ZERO_PROBABILITY {
                    return Err(Error::ZeroNormReplay { op: op_index });
                }
                state.project_unchecked(*qubit, *bit, p);
            }
        }
    }
    Ok(state)
}
