//! Amplitude mitigation with rewinding.
//!
//! A [`FlaggedState`] is a data qubit entangled with a flag qubit:
//! `sqrt(p)|t_perp>|0> + sqrt(1-p)|t>|1>`. Each mitigation level attaches an
//! ancilla that is `|+>` on the flag-0 branch and `|0>` on the flag-1 branch,
//! then measures it; outcome 0 halves the nontarget weight relative to the
//! target (`p -> p / (2 - p)`), outcome 1 is undone by a rewind.

use std::f64::consts::FRAC_1_SQRT_2;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use rand::Rng;

use crate::circuit::GateKind;
use crate::error::{Error, Result};
use crate::statevector::{rewind, Matrix2, PureState, RewindMode, SnapshotRegistry};

pub const DATA_QUBIT: usize = 0;
pub const FLAG_QUBIT: usize = 1;

const LEVEL_LABEL: &str = "mitigation-level";
const EXTRACT_LABEL: &str = "mitigation-extract";

fn hadamard() -> Matrix2 {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    [[h, h], [h, -h]]
}

#[derive(Debug, Clone)]
pub struct FlaggedState {
    pub state: PureState,
    pub data_qubit: usize,
    pub flag_qubit: usize,
    /// Nontarget probability, tracked analytically when the input is known.
    pub p: Option<f64>,
}

impl FlaggedState {
    /// `sqrt(p)|0>|0> + sqrt(1-p)|1>|1>`, the plainest state with nontarget
    /// probability `p`.
    pub fn from_probability(p: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("p = {p} outside [0, 1)")));
        }
        let state = PureState::from_real(&[p.sqrt(), 0.0, 0.0, (1.0 - p).sqrt()])?;
        Ok(FlaggedState {
            state,
            data_qubit: DATA_QUBIT,
            flag_qubit: FLAG_QUBIT,
            p: Some(p),
        })
    }

    /// Nontarget probability read from the amplitudes.
    pub fn nontarget_probability(&self) -> f64 {
        self.state.probability(self.flag_qubit, 0)
    }

    /// `(1 - p) / p` from the amplitudes. Both weights are summed directly,
    /// so the ratio keeps full relative precision when `p` is near 1.
    pub fn odds(&self) -> f64 {
        self.state.probability(self.flag_qubit, 1) / self.nontarget_probability()
    }
}

/// Largest nontarget probability an admissible input can have.
pub fn p_max(n: u32) -> f64 {
    1.0 - 1.0 / (2.0 * (4f64.powi(n as i32) + 1.0))
}

/// Nontarget probability of the flagged state built from a count `s` of an
/// `n`-bit function and the control ratio `2^k`.
pub fn p_analytic(n: u32, s: u64, k: i32) -> f64 {
    let (alpha2, beta2) = control_weights(k);
    let full = 2f64.powi(n as i32);
    let zeros = full - s as f64;
    let s = s as f64;
    (2.0 * alpha2 * zeros * zeros + beta2 * full * full) / (2.0 * (zeros * zeros + s * s))
}

/// `(alpha^2, beta^2)` with `beta / alpha = 2^k`.
fn control_weights(k: i32) -> (f64, f64) {
    let t2 = 4f64.powi(k);
    (1.0 / (1.0 + t2), t2 / (1.0 + t2))
}

fn arity_of(table: &[bool]) -> Result<u32> {
    let len = table.len();
    if len < 2 || !len.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "truth table length {len} is not a power of two >= 2"
        )));
    }
    Ok(len.trailing_zeros())
}

/// `H^n`, oracle into the last qubit, `H^n`, before any measurement.
fn psi_circuit_state(table: &[bool]) -> Result<PureState> {
    let n = arity_of(table)? as usize;
    let mut state = PureState::init(n + 1)?;
    for q in 0..n {
        state.apply_gate(&GateKind::H, &[q])?;
    }
    let inputs: Vec<usize> = (0..n).collect();
    state.apply_oracle(&inputs, &[n], |x| u64::from(table[x as usize]))?;
    for q in 0..n {
        state.apply_gate(&GateKind::H, &[q])?;
    }
    Ok(state)
}

/// Probability that one preparation attempt reads `0^n`, from amplitudes.
pub fn zero_outcome_probability(table: &[bool]) -> Result<f64> {
    let state = psi_circuit_state(table)?;
    let n = state.n_qubits() - 1;
    Ok(state.amplitude(0).norm_sqr() + state.amplitude(1 << n).norm_sqr())
}

/// `(M0^2 + M1^2) / 4^n`, where `M_b` counts inputs with `f(x) = b`.
pub fn zero_outcome_probability_analytic(table: &[bool]) -> Result<f64> {
    let n = arity_of(table)?;
    let m1 = table.iter().filter(|&&b| b).count() as f64;
    let m0 = table.len() as f64 - m1;
    Ok((m0 * m0 + m1 * m1) / 4f64.powi(n as i32))
}

/// Prepares the one-qubit state `((2^n - s)|0> + s|1>) / norm`, retrying
/// the preparation up to `n` times. Returns the state and the attempts used.
pub fn prepare_psi<R: Rng + ?Sized>(table: &[bool], rng: &mut R) -> Result<(PureState, usize)> {
    let n = arity_of(table)? as usize;
    let inputs: Vec<usize> = (0..n).collect();
    for attempt in 1..=n {
        let mut state = psi_circuit_state(table)?;
        let (value, _) = state.measure_register(&inputs, rng)?;
        if value == 0 {
            for _ in 0..n {
                state.discard_qubit(0)?;
            }
            return Ok((state, attempt));
        }
    }
    Err(Error::PreparationFailed { attempts: n })
}

/// Entangles `psi` with a control qubit: `alpha|0>|psi> + beta|1>H|psi>`
/// with `beta / alpha = 2^k`. The control becomes the data qubit and the
/// `psi` qubit the flag.
pub fn make_flagged(psi: &PureState, k: i32, n: u32) -> Result<FlaggedState> {
    if k.unsigned_abs() > n {
        return Err(Error::InvalidArgument(format!(
            "|k| = {} exceeds n = {n}",
            k.abs()
        )));
    }
    if psi.n_qubits() != 1 {
        return Err(Error::InvalidArgument(format!(
            "psi must be one qubit, got {}",
            psi.n_qubits()
        )));
    }
    let mut amps = vec![Complex64::new(0.0, 0.0); 4];
    amps[0] = psi.amplitude(0);
    amps[1 << FLAG_QUBIT] = psi.amplitude(1);
    let mut state = PureState::from_amplitudes(amps)?;
    state.apply_gate(&GateKind::Hk(k), &[DATA_QUBIT])?;
    state.apply_gate(&GateKind::Ch, &[DATA_QUBIT, FLAG_QUBIT])?;
    let mut fs = FlaggedState {
        state,
        data_qubit: DATA_QUBIT,
        flag_qubit: FLAG_QUBIT,
        p: None,
    };
    fs.p = Some(fs.nontarget_probability());
    Ok(fs)
}

/// [`make_flagged`] from a known count, with `p` set analytically.
pub fn make_flagged_for_count(n: u32, s: u64, k: i32) -> Result<FlaggedState> {
    let full = 1u64 << n;
    if s > full {
        return Err(Error::InvalidArgument(format!("s = {s} exceeds 2^{n}")));
    }
    let psi = PureState::from_real(&[(full - s) as f64, s as f64])?;
    let mut fs = make_flagged(&psi, k, n)?;
    fs.p = Some(p_analytic(n, s, k));
    Ok(fs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEvent {
    pub level: usize,
    /// Rewinds already spent at this level.
    pub retries: usize,
    pub outcome: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MitigationOutcome {
    Success,
    /// Retries exhausted; `bit` is the uniformly random answer.
    RandomFallback {
        bit: u8,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MitigationTrace {
    pub events: Vec<TraceEvent>,
    pub outcome: MitigationOutcome,
    /// Nontarget probability after each completed level, when tracked.
    pub level_probabilities: Vec<f64>,
}

impl MitigationTrace {
    pub fn levels_completed(&self) -> usize {
        self.events.iter().filter(|e| e.outcome == 0).count()
    }

    pub fn is_success(&self) -> bool {
        self.outcome == MitigationOutcome::Success
    }

    /// Checks the counter rules for a run with parameter `n`.
    pub fn check(&self, n: usize) -> std::result::Result<(), String> {
        let (levels, budget) = (2 * n + 3, 3 * n);
        let (mut level, mut retries) = (0usize, 0usize);
        for e in &self.events {
            if (e.level, e.retries) != (level, retries) {
                return Err(format!(
                    "event {e:?} out of sequence, expected ({level}, {retries})"
                ));
            }
            if e.outcome == 0 {
                level += 1;
                retries = 0;
            } else {
                retries += 1;
            }
            if level > levels || retries > budget {
                return Err(format!("counter overflow at {e:?}"));
            }
        }
        match self.outcome {
            MitigationOutcome::Success if level != levels => {
                Err(format!("success declared at level {level}"))
            }
            MitigationOutcome::RandomFallback { .. } if retries != budget => {
                Err(format!("fallback with {retries} retries"))
            }
            _ => Ok(()),
        }
    }
}

/// One mitigation level: attaches an ancilla to the nontarget branch and
/// measures it, rewinding on 1, for at most `budget` measurements.
///
/// Returns the outcomes in order. The level succeeded iff the last outcome
/// is 0, in which case the ancilla has been discarded and `fs.p` updated.
/// After a failed level the ancilla is still attached.
pub fn mitigation_round<R: Rng + ?Sized>(
    fs: &mut FlaggedState,
    budget: usize,
    registry: &mut SnapshotRegistry,
    rng: &mut R,
) -> Result<Vec<u8>> {
    let ancilla = fs.state.n_qubits();
    fs.state.append_qubits(1);
    fs.state
        .apply_controlled(fs.flag_qubit, 0, ancilla, &hadamard());
    registry.overwrite(LEVEL_LABEL, &fs.state);
    let mut outcomes = Vec::new();
    loop {
        let (z, _) = fs.state.measure(ancilla, rng)?;
        outcomes.push(z);
        if z == 0 {
            break;
        }
        if outcomes.len() == budget.max(1) {
            return Ok(outcomes);
        }
        fs.state = rewind(&fs.state, registry, LEVEL_LABEL, RewindMode::Strict)?;
    }
    fs.state.discard_qubit(ancilla)?;
    fs.p = fs.p.map(|p| p / (2.0 - p));
    Ok(outcomes)
}

/// Runs `2n + 3` mitigation levels with up to `3n` measurements each.
///
/// On a level that reads 1 on every attempt the run stops with
/// [`MitigationOutcome::RandomFallback`] and the state as it stands.
pub fn mitigate<R: Rng + ?Sized>(
    mut fs: FlaggedState,
    n: usize,
    registry: &mut SnapshotRegistry,
    rng: &mut R,
) -> Result<(FlaggedState, MitigationTrace)> {
    let levels = 2 * n + 3;
    let budget = 3 * n;
    let mut events = Vec::new();
    let mut level_probabilities = Vec::new();

    for level in 0..levels {
        let outcomes = mitigation_round(&mut fs, budget, registry, rng)?;
        events.extend(
            outcomes
                .iter()
                .enumerate()
                .map(|(retries, &outcome)| TraceEvent {
                    level,
                    retries,
                    outcome,
                }),
        );
        if outcomes.last() != Some(&0) {
            let bit = u8::from(rng.random::<bool>());
            let trace = MitigationTrace {
                events,
                outcome: MitigationOutcome::RandomFallback { bit },
                level_probabilities,
            };
            return Ok((fs, trace));
        }
        level_probabilities.push(fs.p.unwrap_or_else(|| fs.nontarget_probability()));
    }

    let trace = MitigationTrace {
        events,
        outcome: MitigationOutcome::Success,
        level_probabilities,
    };
    Ok((fs, trace))
}

/// Measures the flag, rewinding on 0, for at most `n` attempts. On reading
/// 1 returns the data qubit's state.
pub fn extract_target<R: Rng + ?Sized>(
    fs: FlaggedState,
    n: usize,
    registry: &mut SnapshotRegistry,
    rng: &mut R,
) -> Result<PureState> {
    let mut state = fs.state;
    registry.overwrite(EXTRACT_LABEL, &state);
    for attempt in 1..=n.max(1) {
        let (bit, _) = state.measure(fs.flag_qubit, rng)?;
        if bit == 1 {
            let mut q = state.n_qubits();
            while q > 0 {
                q -= 1;
                if q != fs.data_qubit {
                    state.discard_qubit(q)?;
                }
            }
            return Ok(state);
        }
        if attempt < n {
            state = rewind(&state, registry, EXTRACT_LABEL, RewindMode::Strict)?;
        }
    }
    Err(Error::ExtractionFailed { attempts: n.max(1) })
}

/// Probability that [`mitigate`] ends in success from nontarget
/// probability `p`:
///
/// `prod_{i=0}^{2n+2} [1 - (1 - q_i)^{3n}]`,
/// `q_i = (p 2^{-(i+1)} + 1 - p) / (1 - (1 - 2^{-i}) p)`.
pub fn success_probability_exact(p: &BigRational, n: u32) -> BigRational {
    let one = BigRational::one();
    let budget = 3 * n as usize;
    let mut total = one.clone();
    for i in 0..(2 * n + 3) as usize {
        let half_i = BigRational::new(BigInt::one(), BigInt::one() << i);
        let half_i1 = BigRational::new(BigInt::one(), BigInt::one() << (i + 1));
        let num = p * &half_i1 + &one - p;
        let den = &one - (&one - &half_i) * p;
        let q = num / den;
        let miss = num_traits::pow(&one - q, budget);
        total *= &one - miss;
    }
    total
}

pub fn success_probability(p: f64, n: u32) -> f64 {
    match BigRational::from_float(p) {
        Some(p) => success_probability_exact(&p, n)
            .to_f64()
            .unwrap_or(f64::NAN),
        None => f64::NAN,
    }
}

/// Coin rotation `|0> -> sqrt(q)|0> + sqrt(1-q)|1>`.
fn coin(q: f64) -> Matrix2 {
    let (a, b) = (q.sqrt(), (1.0 - q).sqrt());
    [
        [Complex64::new(a, 0.0), Complex64::new(-b, 0.0)],
        [Complex64::new(b, 0.0), Complex64::new(a, 0.0)],
    ]
}

/// Postselection-only mitigation: `m` coins, each entangled with the
/// nontarget branch and postselected onto 0. The nontarget weight shrinks by
/// `q` per coin.
pub fn mitigate_postselect(fs: FlaggedState, q: f64, m: usize) -> Result<FlaggedState> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "retention q = {q} outside (0, 1)"
        )));
    }
    let FlaggedState {
        mut state,
        data_qubit,
        flag_qubit,
        mut p,
    } = fs;
    let rotation = coin(q);
    for _ in 0..m {
        let c = state.n_qubits();
        state.append_qubits(1);
        state.apply_controlled(flag_qubit, 0, c, &rotation);
        let kept = state.probability(c, 0);
        // Relative slack for the rounding of sqrt(q)^2.
        if kept < q * (1.0 - 1e-12) {
            return Err(Error::CoinBelowRetention {
                probability: kept,
                q,
            });
        }
        state.postselect(c, 0, 0.0)?;
        state.discard_qubit(c)?;
        p = p.map(|p| p * q / (p * q + 1.0 - p));
    }
    Ok(FlaggedState {
        state,
        data_qubit,
        flag_qubit,
        p,
    })
}

/// Smallest coin count bringing the target probability to at least 1/2.
pub fn required_coins(p: f64, q: f64) -> usize {
    if p <= 0.5 {
        return 0;
    }
    ((p / (1.0 - p)).log2() / (1.0 / q).log2()).ceil().max(0.0) as usize
}

/// `ceil(log2(p / (1 - p)))` for exact `p`, i.e. the number of doublings
/// needed to bring the odds to at least 1. `None` for `p <= 1/2`.
pub fn levels_needed(p: &BigRational) -> Option<u32> {
    let one = BigRational::one();
    if p >= &one || p.is_negative() {
        return None;
    }
    let ratio = p / (&one - p);
    if ratio <= one {
        return None;
    }
    let mut levels = 0u32;
    let mut power = one;
    while power < ratio {
        power *= BigRational::from_integer(BigInt::from(2));
        levels += 1;
    }
    Some(levels)
}

/// Exact `1 - 1 / (2 (4^n + 1))`.
pub fn p_max_exact(n: u32) -> BigRational {
    let four_n = BigInt::one() << (2 * n as usize);
    BigRational::one() - BigRational::new(BigInt::one(), BigInt::from(2) * (four_n + 1))
}
