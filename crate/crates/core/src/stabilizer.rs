//! Stabilizer tableau backend for circuits over {X, H, S, CZ, SWAP}.
//!
//! The state is stored as `n` commuting, independent signed Pauli
//! generators. Each generator is a row of bit-packed X and Z words; signs
//! are packed one bit per row. No destabilizer half is kept, so
//! deterministic measurement outcomes are resolved by GF(2) elimination.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;

use crate::circuit::{Circuit, GateKind};
use crate::engine::{self, Backend, Execution, Probability, RunConfig};
use crate::error::{Error, Result};
use crate::statevector::SnapshotRegistry;

/// Default bound on measurements per path for exact enumeration.
pub const DEFAULT_DEPTH_LIMIT: usize = 20;

/// A probability that is zero or `2^-exp`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dyadic(Option<u32>);

impl Dyadic {
    pub const ZERO: Dyadic = Dyadic(None);
    pub const ONE: Dyadic = Dyadic(Some(0));
    pub const HALF: Dyadic = Dyadic(Some(1));

    /// `None` for zero, otherwise the exponent of `1/2`.
    pub fn exponent(&self) -> Option<u32> {
        self.0
    }

    pub fn to_rational(&self) -> BigRational {
        match self.0 {
            None => BigRational::zero(),
            Some(k) => BigRational::new(BigInt::one(), BigInt::one() << k),
        }
    }
}

impl Probability for Dyadic {
    fn one() -> Self {
        Dyadic::ONE
    }
    fn mul(&self, other: &Self) -> Self {
        match (self.0, other.0) {
            (Some(a), Some(b)) => Dyadic(Some(a + b)),
            _ => Dyadic::ZERO,
        }
    }
    fn to_f64(&self) -> f64 {
        match self.0 {
            None => 0.0,
            Some(k) => 0.5f64.powi(k as i32),
        }
    }
    fn is_zero(&self) -> bool {
        self.0.is_none()
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            None => f.write_str("0"),
            Some(0) => f.write_str("1"),
            Some(k) => write!(f, "1/2^{k}"),
        }
    }
}

/// Signed Pauli operator on `n` qubits, bit-packed.
#[derive(Debug, Clone, PartialEq, Eq)]
struct PauliRow {
    x: Vec<u64>,
    z: Vec<u64>,
    /// Power of `i` in the phase, 0..4.
    phase: u8,
}

impl PauliRow {
    fn identity(words: usize) -> Self {
        PauliRow {
            x: vec![0; words],
            z: vec![0; words],
            phase: 0,
        }
    }

    /// `self <- other * self`, tracking the phase exactly.
    fn left_mul(&mut self, other: &PauliRow) {
        let mut count: i64 = 0;
        for w in 0..self.x.len() {
            let (x1, z1, x2, z2) = (other.x[w], other.z[w], self.x[w], self.z[w]);
            let pos = (x1 & z1 & z2 & !x2) | (x1 & !z1 & z2 & x2) | (!x1 & z1 & x2 & !z2);
            let neg = (x1 & z1 & x2 & !z2) | (x1 & !z1 & z2 & !x2) | (!x1 & z1 & x2 & z2);
            count += pos.count_ones() as i64 - neg.count_ones() as i64;
            self.x[w] ^= x1;
            self.z[w] ^= z1;
        }
        self.phase = ((self.phase as i64 + other.phase as i64 + count).rem_euclid(4)) as u8;
    }
}

fn bit(words: &[u64], q: usize) -> bool {
    (words[q / 64] >> (q % 64)) & 1 == 1
}

fn flip(words: &mut [u64], q: usize) {
    words[q / 64] ^= 1 << (q % 64);
}

fn set(words: &mut [u64], q: usize, v: bool) {
    if v {
        words[q / 64] |= 1 << (q % 64);
    } else {
        words[q / 64] &= !(1 << (q % 64));
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StabilizerTableau {
    n: usize,
    words: usize,
    /// Row-major: generator `r` occupies `x[r*words..(r+1)*words]`.
    x: Vec<u64>,
    z: Vec<u64>,
    /// Bit `r` is the sign of generator `r` (1 = negative).
    signs: Vec<u64>,
}

impl StabilizerTableau {
    /// `|0...0>`: generators `+Z_i`.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::QubitBudget {
                requested: 0,
                max: 0,
            });
        }
        let words = n.div_ceil(64);
        let mut t = StabilizerTableau {
            n,
            words,
            x: vec![0; n * words],
            z: vec![0; n * words],
            signs: vec![0; words],
        };
        for q in 0..n {
            flip(&mut t.z[q * words..(q + 1) * words], q);
        }
        Ok(t)
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    fn xr(&self, r: usize) -> &[u64] {
        &self.x[r * self.words..(r + 1) * self.words]
    }

    fn zr(&self, r: usize) -> &[u64] {
        &self.z[r * self.words..(r + 1) * self.words]
    }

    fn x_bit(&self, r: usize, q: usize) -> bool {
        bit(self.xr(r), q)
    }

    fn z_bit(&self, r: usize, q: usize) -> bool {
        bit(self.zr(r), q)
    }

    fn sign(&self, r: usize) -> bool {
        bit(&self.signs, r)
    }

    fn row(&self, r: usize) -> PauliRow {
        PauliRow {
            x: self.xr(r).to_vec(),
            z: self.zr(r).to_vec(),
            phase: if self.sign(r) { 2 } else { 0 },
        }
    }

    fn store(&mut self, r: usize, p: &PauliRow) {
        debug_assert!(p.phase.is_multiple_of(2), "generators are Hermitian");
        let w = self.words;
        self.x[r * w..(r + 1) * w].copy_from_slice(&p.x);
        self.z[r * w..(r + 1) * w].copy_from_slice(&p.z);
        set(&mut self.signs, r, p.phase == 2);
    }

    /// Generator `r` as a string like `+XZI` (qubit 0 first).
    pub fn generator(&self, r: usize) -> String {
        let mut s = String::with_capacity(self.n + 1);
        s.push(if self.sign(r) { '-' } else { '+' });
        for q in 0..self.n {
            s.push(match (self.x_bit(r, q), self.z_bit(r, q)) {
                (false, false) => 'I',
                (true, false) => 'X',
                (false, true) => 'Z',
                (true, true) => 'Y',
            });
        }
        s
    }

    pub fn generators(&self) -> Vec<String> {
        (0..self.n).map(|r| self.generator(r)).collect()
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n {
            return Err(Error::InvalidTargets(format!(
                "qubit {q} out of range for {} qubits",
                self.n
            )));
        }
        Ok(())
    }

    fn h(&mut self, q: usize) {
        for r in 0..self.n {
            let (xb, zb) = (self.x_bit(r, q), self.z_bit(r, q));
            if xb && zb {
                flip(&mut self.signs, r);
            }
            if xb != zb {
                let w = self.words;
                flip(&mut self.x[r * w..(r + 1) * w], q);
                flip(&mut self.z[r * w..(r + 1) * w], q);
            }
        }
    }

    fn s(&mut self, q: usize) {
        let w = self.words;
        for r in 0..self.n {
            let (xb, zb) = (self.x_bit(r, q), self.z_bit(r, q));
            if xb && zb {
                flip(&mut self.signs, r);
            }
            if xb {
                flip(&mut self.z[r * w..(r + 1) * w], q);
            }
        }
    }

    fn x_gate(&mut self, q: usize) {
        for r in 0..self.n {
            if self.z_bit(r, q) {
                flip(&mut self.signs, r);
            }
        }
    }

    fn cnot(&mut self, a: usize, b: usize) {
        let w = self.words;
        for r in 0..self.n {
            let (xa, za, xb, zb) = (
                self.x_bit(r, a),
                self.z_bit(r, a),
                self.x_bit(r, b),
                self.z_bit(r, b),
            );
            if xa && zb && (xb == za) {
                flip(&mut self.signs, r);
            }
            if xa {
                flip(&mut self.x[r * w..(r + 1) * w], b);
            }
            if zb {
                flip(&mut self.z[r * w..(r + 1) * w], a);
            }
        }
    }

    fn swap(&mut self, a: usize, b: usize) {
        let w = self.words;
        for r in 0..self.n {
            let (xa, za, xb, zb) = (
                self.x_bit(r, a),
                self.z_bit(r, a),
                self.x_bit(r, b),
                self.z_bit(r, b),
            );
            let xs = &mut self.x[r * w..(r + 1) * w];
            set(xs, a, xb);
            set(xs, b, xa);
            let zs = &mut self.z[r * w..(r + 1) * w];
            set(zs, a, zb);
            set(zs, b, za);
        }
    }

    /// Conjugates every generator by a Clifford gate.
    pub fn apply(&mut self, kind: &GateKind, targets: &[usize]) -> Result<()> {
        if !kind.is_clifford() {
            return Err(Error::UnsupportedGate {
                backend: "stab",
                gate: format!("{kind} (stabilizer backend accepts only x, h, s, cz, swap)"),
                line: None,
            });
        }
        if targets.len() != kind.arity() {
            return Err(Error::InvalidTargets(format!(
                "gate {} takes {} targets, got {}",
                kind.name(),
                kind.arity(),
                targets.len()
            )));
        }
        for (i, &t) in targets.iter().enumerate() {
            self.check_qubit(t)?;
            if targets[..i].contains(&t) {
                return Err(Error::InvalidTargets(format!("qubit {t} repeated")));
            }
        }
        match kind {
            GateKind::X => self.x_gate(targets[0]),
            GateKind::H => self.h(targets[0]),
            GateKind::S => self.s(targets[0]),
            GateKind::Cz => {
                self.h(targets[1]);
                self.cnot(targets[0], targets[1]);
                self.h(targets[1]);
            }
            GateKind::Swap => self.swap(targets[0], targets[1]),
            _ => unreachable!("non-Clifford kinds rejected above"),
        }
        debug_assert!(self.check_invariants().is_ok());
        Ok(())
    }

    fn anticommuting_rows(&self, q: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&r| self.x_bit(r, q))
    }

    /// Probability of reading `b` on qubit `q`: `1/2`, `1` or `0`.
    pub fn outcome_probability(&self, q: usize, b: u8) -> Dyadic {
        if self.anticommuting_rows(q).next().is_some() {
            return Dyadic::HALF;
        }
        if self.deterministic_outcome(q) == b {
            Dyadic::ONE
        } else {
            Dyadic::ZERO
        }
    }

    /// Outcome of measuring `q` when `Z_q` or `-Z_q` is in the group.
    fn deterministic_outcome(&self, q: usize) -> u8 {
        let combo = self
            .solve(&{
                let mut t = PauliRow::identity(self.words);
                flip(&mut t.z, q);
                t
            })
            .expect("+-Z_q lies in the stabilizer group when it commutes with every generator");
        let mut acc = PauliRow::identity(self.words);
        for r in combo {
            acc.left_mul(&self.row(r));
        }
        debug_assert!(acc.phase.is_multiple_of(2));
        u8::from(acc.phase == 2)
    }

    /// Indices of generators whose product equals `target` up to sign, or
    /// `None` if `target` is outside the group.
    fn solve(&self, target: &PauliRow) -> Option<Vec<usize>> {
        let n = self.n;
        let cols = 2 * n;
        // Each row: (x|z) bits followed by an n-bit combination mask.
        let mut rows: Vec<(Vec<bool>, Vec<bool>)> = (0..n)
            .map(|r| {
                let mut v = Vec::with_capacity(cols);
                v.extend((0..n).map(|q| self.x_bit(r, q)));
                v.extend((0..n).map(|q| self.z_bit(r, q)));
                let mut c = vec![false; n];
                c[r] = true;
                (v, c)
            })
            .collect();
        let mut t: Vec<bool> = (0..n)
            .map(|q| bit(&target.x, q))
            .chain((0..n).map(|q| bit(&target.z, q)))
            .collect();
        let mut tc = vec![false; n];
        let mut pivot_row = 0;
        for col in 0..cols {
            let Some(p) = (pivot_row..n).find(|&r| rows[r].0[col]) else {
                continue;
            };
            rows.swap(pivot_row, p);
            let (pv, pc) = rows[pivot_row].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != pivot_row && row.0[col] {
                    xor_into(&mut row.0, &pv);
                    xor_into(&mut row.1, &pc);
                }
            }
            if t[col] {
                xor_into(&mut t, &pv);
                xor_into(&mut tc, &pc);
            }
            pivot_row += 1;
        }
        if t.iter().any(|&b| b) {
            return None;
        }
        Some((0..n).filter(|&r| tc[r]).collect())
    }

    /// Projects qubit `q` onto `b`. Returns the branch probability; the
    /// tableau is unchanged when it is zero.
    pub fn project(&mut self, q: usize, b: u8) -> Result<Dyadic> {
        self.check_qubit(q)?;
        let rows: Vec<usize> = self.anticommuting_rows(q).collect();
        let Some((&pivot, rest)) = rows.split_first() else {
            return Ok(if self.deterministic_outcome(q) == b {
                Dyadic::ONE
            } else {
                Dyadic::ZERO
            });
        };
        let pivot_row = self.row(pivot);
        for &r in rest {
            let mut row = self.row(r);
            row.left_mul(&pivot_row);
            self.store(r, &row);
        }
        let mut zq = PauliRow::identity(self.words);
        flip(&mut zq.z, q);
        zq.phase = if b == 1 { 2 } else { 0 };
        self.store(pivot, &zq);
        debug_assert!(self.check_invariants().is_ok());
        Ok(Dyadic::HALF)
    }

    /// Samples a Z measurement of `q`.
    pub fn measure<R: Rng + ?Sized>(&mut self, q: usize, rng: &mut R) -> Result<(u8, Dyadic)> {
        self.check_qubit(q)?;
        let b = if self.anticommuting_rows(q).next().is_some() {
            u8::from(rng.random::<bool>())
        } else {
            self.deterministic_outcome(q)
        };
        let p = self.project(q, b)?;
        Ok((b, p))
    }

    /// Verifies pairwise commutation and full rank.
    pub fn check_invariants(&self) -> Result<()> {
        for a in 0..self.n {
            for b in a + 1..self.n {
                let mut s = 0u32;
                for w in 0..self.words {
                    s += (self.xr(a)[w] & self.zr(b)[w]).count_ones();
                    s += (self.zr(a)[w] & self.xr(b)[w]).count_ones();
                }
                if s % 2 == 1 {
                    return Err(Error::InvalidArgument(format!(
                        "generators {a} and {b} anticommute"
                    )));
                }
            }
        }
        if self.rank() != self.n {
            return Err(Error::InvalidArgument("generators are dependent".into()));
        }
        Ok(())
    }

    /// GF(2) rank of the `(X|Z)` matrix.
    pub fn rank(&self) -> usize {
        let mut rows: Vec<Vec<u64>> = (0..self.n)
            .map(|r| self.xr(r).iter().chain(self.zr(r)).copied().collect())
            .collect();
        let mut rank = 0;
        for col in 0..2 * self.n {
            let (w, b) = if col < self.n {
                (col / 64, col % 64)
            } else {
                (self.words + (col - self.n) / 64, (col - self.n) % 64)
            };
            let Some(p) = (rank..rows.len()).find(|&r| (rows[r][w] >> b) & 1 == 1) else {
                continue;
            };
            rows.swap(rank, p);
            let pv = rows[rank].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && (row[w] >> b) & 1 == 1 {
                    for (a, c) in row.iter_mut().zip(&pv) {
                        *a ^= c;
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    /// Reduced row-echelon generating set of the same group, signs
    /// included. Two tableaus describe the same state iff their canonical
    /// forms are equal.
    pub fn canonical(&self) -> StabilizerTableau {
        let mut rows: Vec<PauliRow> = (0..self.n).map(|r| self.row(r)).collect();
        let mut pivot_row = 0;
        for col in 0..2 * self.n {
            let has = |p: &PauliRow| {
                if col < self.n {
                    bit(&p.x, col)
                } else {
                    bit(&p.z, col - self.n)
                }
            };
            let Some(p) = (pivot_row..self.n).find(|&r| has(&rows[r])) else {
                continue;
            };
            rows.swap(pivot_row, p);
            let pv = rows[pivot_row].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != pivot_row && has(row) {
                    row.left_mul(&pv);
                }
            }
            pivot_row += 1;
        }
        let mut out = self.clone();
        for (r, row) in rows.iter().enumerate() {
            out.store(r, row);
        }
        out
    }

    /// Same stabilizer group as `other`.
    pub fn same_state(&self, other: &StabilizerTableau) -> bool {
        self.n == other.n && self.canonical() == other.canonical()
    }

    /// Joint probability that every `(qubit, bit)` pair reads as given.
    pub fn projector_probability(&self, projector: &[(usize, u8)]) -> Result<Dyadic> {
        let mut t = self.clone();
        let mut p = Dyadic::ONE;
        for &(q, b) in projector {
            p = p.mul(&t.project(q, b)?);
            if p.is_zero() {
                break;
            }
        }
        Ok(p)
    }
}

fn xor_into(a: &mut [bool], b: &[bool]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x ^= y;
    }
}

impl Backend for StabilizerTableau {
    type Prob = Dyadic;
    const NAME: &'static str = "stab";

    fn init(n_qubits: usize) -> Result<Self> {
        StabilizerTableau::new(n_qubits)
    }

    fn supports(kind: &GateKind) -> bool {
        kind.is_clifford()
    }

    fn apply_gate(&mut self, kind: &GateKind, targets: &[usize]) -> Result<()> {
        self.apply(kind, targets)
    }

    fn outcome_probability(&self, qubit: usize, bit: u8) -> Dyadic {
        StabilizerTableau::outcome_probability(self, qubit, bit)
    }

    fn project(&mut self, qubit: usize, bit: u8) {
        let _ = StabilizerTableau::project(self, qubit, bit);
    }

    fn is_projection_of(&self, pre: &Self) -> bool {
        (0..pre.n).any(|q| {
            (0..2u8).any(|b| {
                let mut t = pre.clone();
                matches!(t.project(q, b), Ok(p) if !p.is_zero()) && t.same_state(self)
            })
        })
    }
}

/// Copy of a tableau taken at a snapshot point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableauSnapshot {
    pub label: String,
    pub tableau: StabilizerTableau,
}

pub fn stab_snapshot(tab: &StabilizerTableau, label: &str) -> TableauSnapshot {
    TableauSnapshot {
        label: label.to_string(),
        tableau: tab.clone(),
    }
}

/// Restores the tableau stored under `label`.
pub fn stab_rewind(
    registry: &SnapshotRegistry<StabilizerTableau>,
    label: &str,
) -> Result<StabilizerTableau> {
    Ok(registry.get(label)?.state.clone())
}

/// Runs `circuit` once, sampling every measurement.
pub fn run<R: Rng + ?Sized>(
    circuit: &Circuit,
    rng: &mut R,
    cfg: &RunConfig,
) -> Result<Execution<StabilizerTableau>> {
    engine::run_sampled::<StabilizerTableau, R>(circuit, rng, cfg)
}

/// Exact probability of each measurement record jointly with `projector`
/// holding at the end, keyed by outcome string.
pub fn stab_outcome_probabilities(
    circuit: &Circuit,
    projector: &[(usize, u8)],
    depth_limit: usize,
) -> Result<BTreeMap<String, BigRational>> {
    let mut out = BTreeMap::new();
    for e in engine::enumerate::<StabilizerTableau>(circuit, &RunConfig::default(), depth_limit)? {
        let p = e
            .weight
            .mul(&e.final_state.projector_probability(projector)?);
        let slot = out
            .entry(e.record.outcome_key())
            .or_insert_with(BigRational::zero);
        *slot += p.to_rational();
    }
    Ok(out)
}

/// Exact probability that `projector` holds at the end of `circuit`,
/// summed over all measurement branches.
pub fn stab_strong_probability(
    circuit: &Circuit,
    projector: &[(usize, u8)],
    depth_limit: usize,
) -> Result<BigRational> {
    Ok(stab_outcome_probabilities(circuit, projector, depth_limit)?
        .into_values()
        .fold(BigRational::zero(), |a, b| a + b))
}

/// Exact outcome-string distribution.
pub fn exact_distribution(
    circuit: &Circuit,
    depth_limit: usize,
) -> Result<BTreeMap<String, BigRational>> {
    stab_outcome_probabilities(circuit, &[], depth_limit)
}
