//! Protocol drivers built on rewinding: counting via amplitude mitigation,
//! collision finding and distribution distinguishing. Each comes with a
//! classical brute-force counterpart.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;

use crate::circuit::GateKind;
use crate::error::{Error, Result};
use crate::mitigation::{extract_target, make_flagged, mitigate, prepare_psi, MitigationOutcome};
use crate::statevector::{rewind, PureState, RewindMode, SnapshotRegistry, DEFAULT_MAX_QUBITS};

fn qubit_budget() -> usize {
    crate::budget_from_env().unwrap_or(DEFAULT_MAX_QUBITS)
}

/// Total function `{0,1}^n -> {0,1}^m` stored by rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthTable {
    n_inputs: u32,
    n_outputs: u32,
    rows: Vec<u64>,
}

impl TruthTable {
    pub fn new(n_inputs: u32, n_outputs: u32, rows: Vec<u64>) -> Result<Self> {
        if rows.len() != 1usize << n_inputs {
            return Err(Error::InvalidArgument(format!(
                "{} rows for {n_inputs} inputs",
                rows.len()
            )));
        }
        if n_outputs == 0 || n_outputs > 63 {
            return Err(Error::InvalidArgument(format!("output width {n_outputs}")));
        }
        if let Some(r) = rows.iter().find(|&&r| r >> n_outputs != 0) {
            return Err(Error::InvalidArgument(format!(
                "row value {r} wider than {n_outputs} bits"
            )));
        }
        Ok(TruthTable {
            n_inputs,
            n_outputs,
            rows,
        })
    }

    /// Single-output table.
    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        let len = bits.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "{len} entries is not a power of two"
            )));
        }
        Self::new(
            len.trailing_zeros(),
            1,
            bits.iter().map(|&b| u64::from(b)).collect(),
        )
    }

    pub fn random<R: Rng + ?Sized>(n_inputs: u32, n_outputs: u32, rng: &mut R) -> Result<Self> {
        let mask = (1u64 << n_outputs) - 1;
        let rows = (0..1usize << n_inputs)
            .map(|_| rng.random::<u64>() & mask)
            .collect();
        Self::new(n_inputs, n_outputs, rows)
    }

    /// Parses one binary row per line, input 0 first. The leftmost digit is
    /// the highest output bit. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        let mut width = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                line: i + 1,
                message,
            };
            if line.len() > 63 || !line.chars().all(|c| c == '0' || c == '1') {
                return Err(parse_err(format!("`{line}` is not a binary row")));
            }
            match width {
                None => width = Some(line.len()),
                Some(w) if w != line.len() => {
                    return Err(parse_err(format!(
                        "row width {} differs from {w}",
                        line.len()
                    )))
                }
                _ => {}
            }
            rows.push(u64::from_str_radix(line, 2).map_err(|e| parse_err(e.to_string()))?);
        }
        let width = width.ok_or_else(|| Error::Parse {
            line: 0,
            message: "no rows".into(),
        })?;
        if !rows.len().is_power_of_two() {
            return Err(Error::Parse {
                line: 0,
                message: format!("{} rows is not a power of two", rows.len()),
            });
        }
        Self::new(rows.len().trailing_zeros(), width as u32, rows)
    }

    pub fn n_inputs(&self) -> u32 {
        self.n_inputs
    }

    pub fn n_outputs(&self) -> u32 {
        self.n_outputs
    }

    pub fn eval(&self, x: u64) -> u64 {
        self.rows[x as usize]
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    /// Inputs with nonzero output.
    pub fn count(&self) -> u64 {
        self.rows.iter().filter(|&&r| r != 0).count() as u64
    }

    pub fn bits(&self) -> Vec<bool> {
        self.rows.iter().map(|&r| r != 0).collect()
    }
}

impl fmt::Display for TruthTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rows {
            writeln!(f, "{:0width$b}", r, width = self.n_outputs as usize)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountClass {
    /// `0 < s < 2^{n-1}`
    Low,
    /// `s >= 2^{n-1}`
    High,
}

impl CountClass {
    pub fn of(n: u32, s: u64) -> Self {
        if s < 1u64 << (n - 1) {
            CountClass::Low
        } else {
            CountClass::High
        }
    }
}

impl fmt::Display for CountClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CountClass::Low => "low",
            CountClass::High => "high",
        })
    }
}

/// Per-copy `|+>` probability when the count is low (at the best ratio).
pub const LOW_PLUS_BOUND: f64 = 0.971_404_520_791_031_7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpConfig {
    /// Target copies measured per ratio `2^k`.
    pub copies: usize,
    /// LOW is declared iff some ratio reaches this `|+>` fraction.
    pub threshold: f64,
}

impl PpConfig {
    pub fn for_arity(n: u32) -> Self {
        PpConfig {
            copies: copies_per_k(n),
            threshold: 0.75,
        }
    }
}

/// Copies per ratio so that a union bound over the `2n + 1` ratios keeps the
/// Hoeffding error below `2^-10` at the distance between the low-case bound
/// and the 0.75 threshold.
pub fn copies_per_k(n: u32) -> usize {
    let gap = LOW_PLUS_BOUND - 0.75;
    let ln = ((2 * n + 1) as f64).ln() + 10.0 * std::f64::consts::LN_2;
    (ln / (2.0 * gap * gap)).ceil() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpDecision {
    pub class: CountClass,
    /// `(k, fraction of |+> outcomes)` for each ratio tried.
    pub plus_fractions: Vec<(i32, f64)>,
    pub copies_per_k: usize,
    /// Copies answered at random because mitigation ran out of retries.
    pub fallbacks: usize,
    /// Copies answered at random because preparation or extraction failed.
    pub failures: usize,
}

/// `|<+|phi>|^2` for the extracted target at ratio `2^k`.
pub fn plus_probability_analytic(n: u32, s: u64, k: i32) -> f64 {
    let r = 2f64.powi(k) * (2f64.powi(n as i32) - 2.0 * s as f64) / (2f64.sqrt() * s as f64);
    (1.0 + r) * (1.0 + r) / (2.0 * (1.0 + r * r))
}

/// One copy of the target at ratio `2^k`, measured in the `{|+>, |->}`
/// basis. `Err(true)` marks a fallback, `Err(false)` a failure; both carry a
/// random answer in the caller.
fn plus_outcome<R: Rng + ?Sized>(
    bits: &[bool],
    n: u32,
    k: i32,
    rng: &mut R,
) -> Result<std::result::Result<u8, bool>> {
    let psi = match prepare_psi(bits, rng) {
        Ok((psi, _)) => psi,
        Err(Error::PreparationFailed { .. }) => return Ok(Err(false)),
        Err(e) => return Err(e),
    };
    let fs = make_flagged(&psi, k, n)?;
    let mut registry = SnapshotRegistry::new();
    let (fs, trace) = mitigate(fs, n as usize, &mut registry, rng)?;
    if let MitigationOutcome::RandomFallback { .. } = trace.outcome {
        return Ok(Err(true));
    }
    let mut target = match extract_target(fs, n as usize, &mut registry, rng) {
        Ok(t) => t,
        Err(Error::ExtractionFailed { .. }) => return Ok(Err(false)),
        Err(e) => return Err(e),
    };
    target.apply_gate(&GateKind::H, &[0])?;
    let (bit, _) = target.measure(0, rng)?;
    Ok(Ok(1 - bit))
}

/// Decides whether the number of ones of `table` is below half its size.
pub fn pp_decide<R: Rng + ?Sized>(
    table: &TruthTable,
    cfg: &PpConfig,
    rng: &mut R,
) -> Result<PpDecision> {
    if table.n_outputs() != 1 {
        return Err(Error::InvalidArgument(
            "counting needs a single-output table".into(),
        ));
    }
    let n = table.n_inputs();
    if n == 0 {
        return Err(Error::InvalidArgument(
            "counting needs at least one input".into(),
        ));
    }
    if table.count() == 0 {
        return Err(Error::PromiseViolation(
            "function is identically zero".into(),
        ));
    }
    let bits = table.bits();
    let mut decision = PpDecision {
        class: CountClass::High,
        plus_fractions: Vec::new(),
        copies_per_k: cfg.copies,
        fallbacks: 0,
        failures: 0,
    };
    for k in -(n as i32)..=(n as i32) {
        let mut plus = 0usize;
        for _ in 0..cfg.copies {
            let bit = match plus_outcome(&bits, n, k, rng)? {
                Ok(b) => b,
                Err(fallback) => {
                    if fallback {
                        decision.fallbacks += 1;
                    } else {
                        decision.failures += 1;
                    }
                    u8::from(rng.random::<bool>())
                }
            };
            plus += bit as usize;
        }
        let fraction = plus as f64 / cfg.copies as f64;
        decision.plus_fractions.push((k, fraction));
        if fraction >= cfg.threshold {
            decision.class = CountClass::Low;
        }
    }
    Ok(decision)
}

/// Function family evaluated on `0..domain_size()`.
pub trait FunctionFamily: Sync {
    fn name(&self) -> String;
    fn domain_size(&self) -> u64;
    fn input_bits(&self) -> usize;
    fn output_bits(&self) -> usize;
    fn eval(&self, x: u64) -> u64;
    /// Exact two-preimage fraction, when known in closed form.
    fn exact_delta(&self) -> Option<f64> {
        None
    }
}

/// `f(x) = x >> 1` on `b + 1` bits: every image has exactly two preimages,
/// differing in bit 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToyTwoRegular {
    pub image_bits: usize,
}

impl FunctionFamily for ToyTwoRegular {
    fn name(&self) -> String {
        format!("toy(b={})", self.image_bits)
    }
    fn domain_size(&self) -> u64 {
        1 << (self.image_bits + 1)
    }
    fn input_bits(&self) -> usize {
        self.image_bits + 1
    }
    fn output_bits(&self) -> usize {
        self.image_bits.max(1)
    }
    fn eval(&self, x: u64) -> u64 {
        x >> 1
    }
    fn exact_delta(&self) -> Option<f64> {
        Some(1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LweParams {
    pub n: usize,
    pub q: u64,
    pub m: usize,
    /// Error coordinates range over `[-mu, mu]`.
    pub mu: u64,
    /// Bound of the shift error `e0`.
    pub mu_prime: f64,
    /// Set when the parameters are not the asymptotic derivation.
    pub toy: bool,
}

fn ceil_log2(n: usize) -> u32 {
    n.next_power_of_two().trailing_zeros()
}

impl LweParams {
    /// `q = 2^{5 ceil(log2 n) + 21}`, `m = 23n + 5n ceil(log2 n)`,
    /// `mu = 2mn sqrt(23 + 5 log2 n)`, `mu' = mu / m`.
    pub fn derived(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        let l = ceil_log2(n);
        let q_bits = 5 * l + 21;
        if q_bits > 62 {
            return Err(Error::InvalidArgument(format!(
                "q = 2^{q_bits} does not fit the classical evaluator"
            )));
        }
        let m = 23 * n + 5 * n * l as usize;
        let mu = 2.0 * (m * n) as f64 * (23.0 + 5.0 * (n as f64).log2()).sqrt();
        Ok(LweParams {
            n,
            q: 1 << q_bits,
            m,
            mu: mu.floor() as u64,
            mu_prime: mu / m as f64,
            toy: false,
        })
    }

    pub fn toy(n: usize, q: u64, m: usize, mu: u64) -> Result<Self> {
        if n == 0 || m == 0 || !(2..=1 << 31).contains(&q) {
            return Err(Error::InvalidArgument(format!(
                "LWE parameters n={n} q={q} m={m}"
            )));
        }
        if 2 * mu + 1 > q {
            return Err(Error::InvalidArgument(format!(
                "mu = {mu} wraps modulo q = {q}"
            )));
        }
        Ok(LweParams {
            n,
            q,
            m,
            mu,
            mu_prime: mu as f64 / m as f64,
            toy: true,
        })
    }

    fn error_width(&self) -> u64 {
        2 * self.mu + 1
    }
}

/// `f(s, e, c) = A s + e + c (A s0 + e0) mod q` with `s` in `Z_q^n` and `e`
/// in `[-mu, mu]^m`.
///
/// Input index: bit 0 is `c`; the rest is a mixed-radix number whose low
/// digits are `s` (radix `q`) followed by `e + mu` (radix `2 mu + 1`).
/// Output index: mixed radix `q` over the `m` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LweFamily {
    pub params: LweParams,
    /// `m x n`, row-major.
    pub a: Vec<Vec<u64>>,
    pub s0: Vec<u64>,
    pub e0: Vec<i64>,
}

/// Centered representative of `v mod q` in `(-q/2, q/2]`.
pub fn centered(v: u64, q: u64) -> i64 {
    let v = v % q;
    if v > q / 2 {
        v as i64 - q as i64
    } else {
        v as i64
    }
}

impl LweFamily {
    /// Uniform `A` and `s0`; `e0` uniform in `[-floor(mu'), floor(mu')]^m`.
    pub fn keygen<R: Rng + ?Sized>(params: LweParams, rng: &mut R) -> Self {
        let q = params.q;
        let a = (0..params.m)
            .map(|_| (0..params.n).map(|_| rng.random_range(0..q)).collect())
            .collect();
        let s0 = (0..params.n).map(|_| rng.random_range(0..q)).collect();
        let bound = params.mu_prime.floor() as i64;
        let e0 = (0..params.m)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        LweFamily { params, a, s0, e0 }
    }

    /// [`LweFamily::keygen`] retried until `(s, e) -> A s + e` is injective on
    /// the enumerable domain, so every collision is a claw between the two
    /// values of `c`.
    pub fn keygen_injective<R: Rng + ?Sized>(
        params: LweParams,
        rng: &mut R,
        tries: usize,
    ) -> Result<Self> {
        for _ in 0..tries {
            let family = Self::keygen(params.clone(), rng);
            if family.branch_injective()? {
                return Ok(family);
            }
        }
        Err(Error::InvalidArgument(format!(
            "no injective key found in {tries} tries for {params:?}"
        )))
    }

    fn branch_injective(&self) -> Result<bool> {
        let half = self.domain_size() / 2;
        check_enumerable(self.domain_size())?;
        let mut seen = HashMap::new();
        for i in 0..half {
            if seen.insert(self.eval(i << 1), ()).is_some() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn s_space(&self) -> u64 {
        self.params.q.pow(self.params.n as u32)
    }

    fn e_space(&self) -> u64 {
        self.params.error_width().pow(self.params.m as u32)
    }

    pub fn encode(&self, s: &[u64], e: &[i64], c: u8) -> u64 {
        let p = &self.params;
        let mut v = 0u64;
        for &ei in e.iter().rev() {
            v = v * p.error_width() + (ei + p.mu as i64) as u64;
        }
        for &si in s.iter().rev() {
            v = v * p.q + si % p.q;
        }
        (v << 1) | c as u64
    }

    pub fn decode(&self, x: u64) -> (Vec<u64>, Vec<i64>, u8) {
        let p = &self.params;
        let c = (x & 1) as u8;
        let mut v = x >> 1;
        let s = (0..p.n)
            .map(|_| {
                let d = v % p.q;
                v /= p.q;
                d
            })
            .collect();
        let e = (0..p.m)
            .map(|_| {
                let d = v % p.error_width();
                v /= p.error_width();
                d as i64 - p.mu as i64
            })
            .collect();
        (s, e, c)
    }

    /// `A s + e + c (A s0 + e0) mod q`, coordinates in `[0, q)`.
    pub fn eval_parts(&self, s: &[u64], e: &[i64], c: u8) -> Vec<u64> {
        let q = self.params.q as i128;
        self.a
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut acc: i128 = e[i] as i128;
                for (j, &aij) in row.iter().enumerate() {
                    acc += aij as i128 * s[j] as i128;
                    if c == 1 {
                        acc += aij as i128 * self.s0[j] as i128;
                    }
                }
                if c == 1 {
                    acc += self.e0[i] as i128;
                }
                acc.rem_euclid(q) as u64
            })
            .collect()
    }

    /// True when `(s, e, 1)` and `(s + s0, e + e0, 0)` are the pair, with
    /// `e + e0` checked against the error range in centered form.
    pub fn is_claw(&self, x: u64, y: u64) -> bool {
        let (one, zero) = match (x & 1, y & 1) {
            (1, 0) => (x, y),
            (0, 1) => (y, x),
            _ => return false,
        };
        let (s1, e1, _) = self.decode(one);
        let (s0, e0, _) = self.decode(zero);
        let q = self.params.q;
        let s_ok = s1
            .iter()
            .zip(&self.s0)
            .zip(&s0)
            .all(|((a, b), c)| (a + b) % q == *c);
        let e_ok = e1.iter().zip(&self.e0).zip(&e0).all(|((a, b), c)| {
            let shifted = centered((a + b).rem_euclid(q as i64) as u64, q);
            shifted == *c
        });
        s_ok && e_ok
    }
}

impl FunctionFamily for LweFamily {
    fn name(&self) -> String {
        let p = &self.params;
        format!("lwe(n={},q={},m={},mu={})", p.n, p.q, p.m, p.mu)
    }
    fn domain_size(&self) -> u64 {
        2 * self.s_space() * self.e_space()
    }
    fn input_bits(&self) -> usize {
        bits_for(self.domain_size())
    }
    fn output_bits(&self) -> usize {
        bits_for(self.params.q.pow(self.params.m as u32))
    }
    fn eval(&self, x: u64) -> u64 {
        let (s, e, c) = self.decode(x);
        self.eval_parts(&s, &e, c)
            .iter()
            .rev()
            .fold(0u64, |v, &y| v * self.params.q + y)
    }
}

/// Bits needed to index `size` values.
fn bits_for(size: u64) -> usize {
    (64 - (size.max(2) - 1).leading_zeros()) as usize
}

/// Largest domain the brute-force routines enumerate.
pub const MAX_ENUMERABLE: u64 = 1 << 26;

fn check_enumerable(size: u64) -> Result<()> {
    if size > MAX_ENUMERABLE {
        return Err(Error::InvalidArgument(format!(
            "domain of {size} points exceeds enumeration limit {MAX_ENUMERABLE}"
        )));
    }
    Ok(())
}

/// Fraction of domain points whose image has exactly two preimages.
pub fn family_delta_exact(family: &dyn FunctionFamily) -> Result<f64> {
    let size = family.domain_size();
    check_enumerable(size)?;
    let mut counts: HashMap<u64, u32> = HashMap::new();
    for x in 0..size {
        *counts.entry(family.eval(x)).or_insert(0) += 1;
    }
    let paired = (0..size).filter(|&x| counts[&family.eval(x)] == 2).count();
    Ok(paired as f64 / size as f64)
}

/// Padding attempts before a collision run gives up.
pub const PADDING_ATTEMPTS: usize = 64;

/// Collision search on the graph state `sum_x |x>|f(x)>`, with the
/// measurement-free part of the preparation done once.
pub struct CollisionFinder<'a> {
    family: &'a dyn FunctionFamily,
    /// Uniform input register; with the image already computed unless a
    /// padding flag is pending.
    base: PureState,
    inputs: Vec<usize>,
    outputs: Vec<usize>,
    /// Padding flag qubit, present when the domain is not a power of two.
    flag: Option<usize>,
}

impl<'a> CollisionFinder<'a> {
    pub fn new(family: &'a dyn FunctionFamily) -> Result<Self> {
        let size = family.domain_size();
        let in_bits = family.input_bits();
        let out_bits = family.output_bits();
        let padded = !size.is_power_of_two();
        let total = in_bits + out_bits + usize::from(padded);
        let mut base = PureState::init_with_max(total, qubit_budget())?;
        let inputs: Vec<usize> = (0..in_bits).collect();
        let outputs: Vec<usize> = (in_bits..in_bits + out_bits).collect();
        for &q in &inputs {
            base.apply_gate(&GateKind::H, &[q])?;
        }
        let flag = if padded {
            let flag = total - 1;
            base.apply_oracle(&inputs, &[flag], |x| u64::from(x < size))?;
            Some(flag)
        } else {
            base.apply_oracle(&inputs, &outputs, |x| family.eval(x))?;
            None
        };
        Ok(CollisionFinder {
            family,
            base,
            inputs,
            outputs,
            flag,
        })
    }

    /// Graph state over the domain, retrying the padding flag until it reads 1.
    fn graph<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PureState> {
        let Some(flag) = self.flag else {
            return Ok(self.base.clone());
        };
        for _ in 0..PADDING_ATTEMPTS {
            let mut state = self.base.clone();
            let (bit, _) = state.measure(flag, rng)?;
            if bit == 1 {
                state.discard_qubit(flag)?;
                state.apply_oracle(&self.inputs, &self.outputs, |x| self.family.eval(x))?;
                return Ok(state);
            }
        }
        Err(Error::PreparationFailed {
            attempts: PADDING_ATTEMPTS,
        })
    }

    /// Measures the input register, bit 0 first.
    fn measure_input<R: Rng + ?Sized>(&self, state: &mut PureState, rng: &mut R) -> Result<u64> {
        let (c, _) = state.measure(self.inputs[0], rng)?;
        let (rest, _) = state.measure_register(&self.inputs[1..], rng)?;
        Ok((rest << 1) | c as u64)
    }

    /// With `allow_rewind`, the output register is measured once, the input
    /// is measured, the input qubit is rewound and the input measured again.
    /// A rewind refused by the strict check (the image had more than two
    /// preimages) ends the run without a pair. Without rewinding the
    /// procedure is run twice independently.
    pub fn find<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        allow_rewind: bool,
    ) -> Result<Option<(u64, u64)>> {
        const LABEL: &str = "collision";
        let (x1, x2) = if allow_rewind {
            let mut state = self.graph(rng)?;
            state.measure_register(&self.outputs, rng)?;
            let mut registry = SnapshotRegistry::new();
            registry.snapshot(LABEL, &state, None)?;
            let x1 = self.measure_input(&mut state, rng)?;
            state = match rewind(&state, &registry, LABEL, RewindMode::Strict) {
                Ok(s) => s,
                Err(Error::RewindInconsistent { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            (x1, self.measure_input(&mut state, rng)?)
        } else {
            let one_run = |rng: &mut R| -> Result<u64> {
                let mut state = self.graph(rng)?;
                state.measure_register(&self.outputs, rng)?;
                self.measure_input(&mut state, rng)
            };
            let x1 = one_run(rng)?;
            (x1, one_run(rng)?)
        };
        if x1 != x2 && self.family.eval(x1) == self.family.eval(x2) {
            Ok(Some((x1, x2)))
        } else {
            Ok(None)
        }
    }
}

/// One collision search; see [`CollisionFinder::find`].
pub fn collision_find<R: Rng + ?Sized>(
    family: &dyn FunctionFamily,
    rng: &mut R,
    allow_rewind: bool,
) -> Result<Option<(u64, u64)>> {
    CollisionFinder::new(family)?.find(rng, allow_rewind)
}

/// Exact error quantities of the distinguishing protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct SdErrors {
    /// Probability that both readouts of the selector agree.
    pub p_err: BigRational,
    /// Probability that they differ (the protocol outputs 1).
    pub p_err_prime: BigRational,
    /// Total variation distance of the two output distributions.
    pub d_tv: BigRational,
}

impl SdErrors {
    /// Checks `p + p' = 1`, `p <= 1/2 + D`, `p' <= 1 - D`.
    pub fn check(&self) -> std::result::Result<(), String> {
        let one = BigRational::one();
        let half = BigRational::new(BigInt::one(), BigInt::from(2));
        if &self.p_err + &self.p_err_prime != one {
            return Err(format!("p + p' = {}", &self.p_err + &self.p_err_prime));
        }
        if self.p_err > &half + &self.d_tv {
            return Err(format!(
                "p = {} above 1/2 + D = {}",
                self.p_err,
                &half + &self.d_tv
            ));
        }
        if self.p_err_prime > &one - &self.d_tv {
            return Err(format!("p' = {} above 1 - D", self.p_err_prime));
        }
        Ok(())
    }
}

fn output_histogram(c: &TruthTable) -> HashMap<u64, u64> {
    let mut h = HashMap::new();
    for &y in c.rows() {
        *h.entry(y).or_insert(0) += 1;
    }
    h
}

fn check_pair(c0: &TruthTable, c1: &TruthTable) -> Result<()> {
    if c0.n_inputs() != c1.n_inputs() || c0.n_outputs() != c1.n_outputs() {
        return Err(Error::InvalidArgument(format!(
            "circuit shapes differ: {}->{} vs {}->{}",
            c0.n_inputs(),
            c0.n_outputs(),
            c1.n_inputs(),
            c1.n_outputs()
        )));
    }
    Ok(())
}

/// Exact `p_err`, `p'_err` and `D_TV` by enumeration.
pub fn sd_error_exact(c0: &TruthTable, c1: &TruthTable) -> Result<SdErrors> {
    check_pair(c0, c1)?;
    let h0 = output_histogram(c0);
    let h1 = output_histogram(c1);
    let size = BigInt::one() << c0.n_inputs() as usize;
    let mut ys: Vec<u64> = h0.keys().chain(h1.keys()).copied().collect();
    ys.sort_unstable();
    ys.dedup();
    let two = BigRational::from_integer(BigInt::from(2));
    let mut p_err = BigRational::zero();
    let mut p_err_prime = BigRational::zero();
    let mut d_tv = BigRational::zero();
    for y in ys {
        let p0 = BigRational::new(BigInt::from(*h0.get(&y).unwrap_or(&0)), size.clone());
        let p1 = BigRational::new(BigInt::from(*h1.get(&y).unwrap_or(&0)), size.clone());
        let sum = &p0 + &p1;
        let weight = &sum / &two;
        let denom = &sum * &sum;
        p_err += &weight * (&p0 * &p0 + &p1 * &p1) / &denom;
        p_err_prime += &weight * (&two * &p0 * &p1) / &denom;
        d_tv += (&p0 - &p1).abs();
    }
    Ok(SdErrors {
        p_err,
        p_err_prime,
        d_tv: d_tv / two,
    })
}

/// One run of the distinguishing protocol: prepares
/// `sum_{b,x} |b>|x>|C_b(x)>`, measures the output register, reads `b`,
/// rewinds, reads `b` again. Returns 1 iff the two readouts differ.
pub fn sd_decide<R: Rng + ?Sized>(c0: &TruthTable, c1: &TruthTable, rng: &mut R) -> Result<u8> {
    const LABEL: &str = "sd";
    check_pair(c0, c1)?;
    let n = c0.n_inputs() as usize;
    let m = c0.n_outputs() as usize;
    let mut state = PureState::init_with_max(1 + n + m, qubit_budget())?;
    let inputs: Vec<usize> = (0..=n).collect();
    let outputs: Vec<usize> = (n + 1..=n + m).collect();
    for &q in &inputs {
        state.apply_gate(&GateKind::H, &[q])?;
    }
    state.apply_oracle(&inputs, &outputs, |v| {
        let x = v >> 1;
        if v & 1 == 0 {
            c0.eval(x)
        } else {
            c1.eval(x)
        }
    })?;
    state.measure_register(&outputs, rng)?;
    let mut registry = SnapshotRegistry::new();
    registry.snapshot(LABEL, &state, None)?;
    let (b1, _) = state.measure(0, rng)?;
    let mut state = rewind(&state, &registry, LABEL, RewindMode::Strict)?;
    let (b2, _) = state.measure(0, rng)?;
    Ok(u8::from(b1 != b2))
}
