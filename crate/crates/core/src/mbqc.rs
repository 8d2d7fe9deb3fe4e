//! Brickwork graph states and measurement-based computation driven by
//! rewinding instead of adaptive corrections.
//!
//! Qubit `(i, j)` (1-based row `i`, column `j`) has index
//! `(j - 1) * rows + (i - 1)`, so columns are contiguous and the output
//! column holds the highest indices. Every qubit outside the last column is
//! measured, column by column.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;

use crate::circuit::GateKind;
use crate::error::{Error, Result};
use crate::statevector::{rewind, Matrix2, PureState, RewindMode, SnapshotRegistry};

/// Default cap on brickwork size.
pub const DEFAULT_MAX_BRICKWORK_QUBITS: usize = 14;

/// Rewinds allowed per fan-out ancilla before giving up.
pub const FANOUT_RETRY_LIMIT: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BrickworkSpec {
    rows: usize,
    cols: usize,
}

impl BrickworkSpec {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 {
            return Err(Error::InvalidArgument(
                "brickwork needs at least one row".into(),
            ));
        }
        if cols % 8 != 5 {
            return Err(Error::InvalidArgument(format!(
                "brickwork column count {cols} is not 5 mod 8"
            )));
        }
        Ok(BrickworkSpec { rows, cols })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn n_qubits(&self) -> usize {
        self.rows * self.cols
    }

    /// Index of 1-based `(i, j)`.
    pub fn index(&self, i: usize, j: usize) -> usize {
        (j - 1) * self.rows + (i - 1)
    }

    pub fn coords(&self, q: usize) -> (usize, usize) {
        (q % self.rows + 1, q / self.rows + 1)
    }

    /// CZ edges as sorted index pairs.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        for i in 1..=self.rows {
            for j in 1..self.cols {
                edges.push((self.index(i, j), self.index(i, j + 1)));
            }
        }
        for i in 1..self.rows {
            let start = if i % 2 == 1 { 3 } else { 7 };
            let mut j = start;
            while j <= self.cols {
                for jj in [j, j + 2] {
                    if jj <= self.cols {
                        edges.push((self.index(i, jj), self.index(i + 1, jj)));
                    }
                }
                j += 8;
            }
        }
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Measured qubits in measurement order.
    pub fn measured(&self) -> Vec<usize> {
        (0..self.rows * (self.cols - 1)).collect()
    }

    /// Output qubits, by row.
    pub fn outputs(&self) -> Vec<usize> {
        (1..=self.rows).map(|i| self.index(i, self.cols)).collect()
    }
}

/// `prod CZ |+>^{rows * cols}`.
pub fn build_brickwork(spec: &BrickworkSpec) -> Result<PureState> {
    let max = crate::budget_from_env().unwrap_or(DEFAULT_MAX_BRICKWORK_QUBITS);
    let mut state = PureState::init_with_max(spec.n_qubits(), max)?;
    for q in 0..spec.n_qubits() {
        state.apply_gate(&GateKind::H, &[q])?;
    }
    for (a, b) in spec.edges() {
        state.apply_gate(&GateKind::Cz, &[a, b])?;
    }
    Ok(state)
}

/// Non-adaptive angles for every measured qubit of a brickwork.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementPattern {
    spec: BrickworkSpec,
    /// Indexed by qubit.
    angles: Vec<f64>,
}

impl MeasurementPattern {
    pub fn uniform(spec: BrickworkSpec, theta: f64) -> Self {
        MeasurementPattern {
            spec,
            angles: vec![theta; spec.rows * (spec.cols - 1)],
        }
    }

    /// All angles zero: every brick acts as the identity on the logical
    /// rows.
    pub fn identity(spec: BrickworkSpec) -> Self {
        Self::uniform(spec, 0.0)
    }

    /// `angles[q]` for each measured qubit `q`.
    pub fn from_angles(spec: BrickworkSpec, angles: Vec<f64>) -> Result<Self> {
        if angles.len() != spec.rows * (spec.cols - 1) {
            return Err(Error::InvalidArgument(format!(
                "{} angles for {} measured qubits",
                angles.len(),
                spec.rows * (spec.cols - 1)
            )));
        }
        if let Some(a) = angles.iter().find(|a| !a.is_finite()) {
            return Err(Error::InvalidArgument(format!("angle {a} is not finite")));
        }
        Ok(MeasurementPattern { spec, angles })
    }

    /// Parses `measure <i> <j> theta <radians>` lines. Every measured qubit
    /// must appear exactly once.
    pub fn parse(spec: BrickworkSpec, text: &str) -> Result<Self> {
        let mut angles: Vec<Option<f64>> = vec![None; spec.rows * (spec.cols - 1)];
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                line: n + 1,
                message,
            };
            let tokens: Vec<&str> = line.split_whitespace().collect();
            let [kw, i, j, theta_kw, theta] = tokens[..] else {
                return Err(err(format!(
                    "expected `measure <i> <j> theta <angle>`, got `{line}`"
                )));
            };
            if kw != "measure" || theta_kw != "theta" {
                return Err(err(format!(
                    "expected `measure <i> <j> theta <angle>`, got `{line}`"
                )));
            }
            let i: usize = i.parse().map_err(|_| err(format!("bad row `{i}`")))?;
            let j: usize = j.parse().map_err(|_| err(format!("bad column `{j}`")))?;
            let theta: f64 = theta
                .parse()
                .map_err(|_| err(format!("bad angle `{theta}`")))?;
            if !theta.is_finite() {
                return Err(err(format!("angle {theta} is not finite")));
            }
            if !(1..=spec.rows).contains(&i) || !(1..spec.cols).contains(&j) {
                return Err(err(format!("({i}, {j}) is not a measured qubit")));
            }
            let slot = &mut angles[spec.index(i, j)];
            if slot.is_some() {
                return Err(err(format!("({i}, {j}) measured twice")));
            }
            *slot = Some(theta);
        }
        let angles = angles
            .into_iter()
            .enumerate()
            .map(|(q, a)| {
                a.ok_or_else(|| {
                    let (i, j) = spec.coords(q);
                    Error::Parse {
                        line: 0,
                        message: format!("no angle for ({i}, {j})"),
                    }
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MeasurementPattern { spec, angles })
    }

    pub fn spec(&self) -> &BrickworkSpec {
        &self.spec
    }

    pub fn angle(&self, q: usize) -> f64 {
        self.angles[q]
    }

    pub fn to_text(&self) -> String {
        self.spec
            .measured()
            .into_iter()
            .map(|q| {
                let (i, j) = self.spec.coords(q);
                format!("measure {i} {j} theta {}\n", self.angles[q])
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct MbqcRun {
    /// State of the output column, one qubit per row.
    pub output: PureState,
    pub all_zero: bool,
    /// Final outcome per measured qubit, in measurement order.
    pub outcomes: Vec<u8>,
    /// Probability of reading 0 on the first attempt, per measured qubit.
    pub zero_probabilities: Vec<f64>,
    pub rewinds: usize,
}

fn h_rz(theta: f64) -> Matrix2 {
    // H * diag(1, e^{-i theta})
    let h = FRAC_1_SQRT_2;
    let ph = Complex64::from_polar(h, -theta);
    let hh = Complex64::new(h, 0.0);
    [[hh, ph], [hh, -ph]]
}

/// Measures every qubit of `pattern`'s set `M` in the `|+_theta>` basis by
/// rotating to Z. An outcome 1 is rewound and re-measured, up to
/// `retry_budget` times per qubit; a qubit that still reads 1 clears
/// `all_zero` and the run continues.
pub fn mbqc_run_rewind<R: Rng + ?Sized>(
    state: PureState,
    pattern: &MeasurementPattern,
    retry_budget: usize,
    rng: &mut R,
) -> Result<MbqcRun> {
    run_with(state, pattern, retry_budget, |p0| {
        u8::from(rng.random::<f64>() >= p0)
    })
}

/// [`mbqc_run_rewind`] with outcomes drawn by `sample(p0)`.
pub fn run_with(
    mut state: PureState,
    pattern: &MeasurementPattern,
    retry_budget: usize,
    mut sample: impl FnMut(f64) -> u8,
) -> Result<MbqcRun> {
    const LABEL: &str = "mbqc";
    let spec = pattern.spec;
    if state.n_qubits() != spec.n_qubits() {
        return Err(Error::InvalidArgument(format!(
            "state has {} qubits, brickwork {}",
            state.n_qubits(),
            spec.n_qubits()
        )));
    }
    let mut registry = SnapshotRegistry::new();
    let measured = spec.measured();
    let mut run = MbqcRun {
        output: state.clone(),
        all_zero: true,
        outcomes: Vec::with_capacity(measured.len()),
        zero_probabilities: Vec::with_capacity(measured.len()),
        rewinds: 0,
    };
    for &q in &measured {
        state.apply_single(q, &h_rz(pattern.angle(q)));
        registry.overwrite(LABEL, &state);
        let mut retries = 0;
        let outcome = loop {
            let p0 = state.probability(q, 0);
            if retries == 0 {
                run.zero_probabilities.push(p0);
            }
            let mut bit = sample(p0);
            if (bit == 0 && p0 <= 0.0) || (bit == 1 && p0 >= 1.0) {
                bit ^= 1;
            }
            state.project(q, bit)?;
            if bit == 0 {
                break 0;
            }
            if retries == retry_budget {
                run.all_zero = false;
                break 1;
            }
            state = rewind(&state, &registry, LABEL, RewindMode::Strict)?;
            retries += 1;
            run.rewinds += 1;
        };
        run.outcomes.push(outcome);
    }
    for &q in measured.iter().rev() {
        state.discard_qubit(q)?;
    }
    run.output = state;
    Ok(run)
}

/// Output-column state when every measured qubit reads 0, computed as a
/// circuit on the logical rows: for each column, the vertical CZs of that
/// column, then `H Rz(-theta)` on every row.
pub fn teleported_output(pattern: &MeasurementPattern) -> Result<PureState> {
    let spec = pattern.spec;
    let mut logical = PureState::init(spec.rows)?;
    for r in 0..spec.rows {
        logical.apply_gate(&GateKind::H, &[r])?;
    }
    let vertical: Vec<(usize, usize)> = spec
        .edges()
        .into_iter()
        .filter(|&(a, b)| spec.coords(a).1 == spec.coords(b).1)
        .collect();
    for j in 1..=spec.cols {
        for &(a, b) in &vertical {
            if spec.coords(a).1 == j {
                logical.apply_gate(&GateKind::Cz, &[spec.coords(a).0 - 1, spec.coords(b).0 - 1])?;
            }
        }
        if j < spec.cols {
            for i in 1..=spec.rows {
                logical.apply_single(i - 1, &h_rz(pattern.angle(spec.index(i, j))));
            }
        }
    }
    Ok(logical)
}

/// Probability that every measured qubit ends on 0 with `budget` rewinds
/// per qubit: `(1 - 2^{-(budget+1)})^{|M|}`.
pub fn all_zero_probability(spec: &BrickworkSpec, budget: usize) -> f64 {
    let per_qubit = 1.0 - 0.5f64.powi(budget as i32 + 1);
    per_qubit.powi((spec.rows * (spec.cols - 1)) as i32)
}

/// Appends `q` ancillas in `|+>`, applies controlled-H from `control` to
/// each, and drives every ancilla to 0 by rewinding. The ancillas are
/// removed from the returned state.
///
/// Each ancilla scales the `control = 0` branch by `1/sqrt(2)` relative to
/// the `control = 1` branch.
pub fn iqp_fanout_amplify<R: Rng + ?Sized>(
    mut state: PureState,
    control: usize,
    q: usize,
    registry: &mut SnapshotRegistry,
    rng: &mut R,
) -> Result<PureState> {
    const LABEL: &str = "fanout";
    if control >= state.n_qubits() {
        return Err(Error::InvalidTargets(format!(
            "control {control} out of range for {} qubits",
            state.n_qubits()
        )));
    }
    let base = state.n_qubits();
    state.append_qubits(q);
    for a in base..base + q {
        state.apply_gate(&GateKind::H, &[a])?;
        state.apply_gate(&GateKind::Ch, &[control, a])?;
    }
    for a in base..base + q {
        registry.overwrite(LABEL, &state);
        let mut rewinds = 0;
        loop {
            let (bit, _) = state.measure(a, rng)?;
            if bit == 0 {
                break;
            }
            if rewinds == FANOUT_RETRY_LIMIT {
                return Err(Error::RewindBudgetExceeded {
                    budget: FANOUT_RETRY_LIMIT,
                });
            }
            state = rewind(&state, registry, LABEL, RewindMode::Strict)?;
            rewinds += 1;
        }
    }
    for a in (base..base + q).rev() {
        state.discard_qubit(a)?;
    }
    Ok(state)
}

/// `|beta| / |alpha|` for the amplitudes of `control = 1` and `control = 0`
/// of a state whose two branches are proportional.
pub fn branch_ratio(state: &PureState, control: usize) -> f64 {
    let (mut zero, mut one) = (0.0, 0.0);
    for (i, a) in state.amplitudes().iter().enumerate() {
        if (i >> control) & 1 == 1 {
            one += a.norm_sqr();
        } else {
            zero += a.norm_sqr();
        }
    }
    (one / zero).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;

    /// Edges written out rule by rule on 1-based coordinates.
    #[allow(clippy::int_plus_one)]
    fn literal_edges(rows: usize, cols: usize) -> Vec<((usize, usize), (usize, usize))> {
        let mut out = Vec::new();
        for i in 1..=rows {
            for j in 1..=cols - 1 {
                out.push(((i, j), (i, j + 1)));
            }
        }
        for i in 1..=rows {
            for j in 1..=cols {
                let rule3 = i % 2 == 1 && j % 8 == 3;
                let rule4 = i % 2 == 0 && j % 8 == 7;
                if (rule3 || rule4) && i + 1 <= rows {
                    out.push(((i, j), (i + 1, j)));
                    if j + 2 <= cols {
                        out.push(((i, j + 2), (i + 1, j + 2)));
                    }
                }
            }
        }
        out
    }

    #[test]
    fn edges_match_literal_rules() {
        for rows in 1..=3 {
            for cols in [5, 13] {
                let spec = BrickworkSpec::new(rows, cols).unwrap();
                let mut want: Vec<(usize, usize)> = literal_edges(rows, cols)
                    .into_iter()
                    .map(|((i, j), (k, l))| (spec.index(i, j), spec.index(k, l)))
                    .map(|(a, b)| (a.min(b), a.max(b)))
                    .collect();
                want.sort_unstable();
                want.dedup();
                assert_eq!(spec.edges(), want, "{rows}x{cols}");
            }
        }
    }

    #[test]
    fn single_row_is_linear_cluster() {
        let spec = BrickworkSpec::new(1, 5).unwrap();
        assert_eq!(spec.edges(), vec![(0, 1), (1, 2), (2, 3), (3, 4)]);
    }

    #[test]
    fn two_rows_have_two_vertical_edges() {
        let spec = BrickworkSpec::new(2, 5).unwrap();
        assert_eq!(spec.edges().len(), 8 + 2);
        assert_eq!(build_brickwork(&spec).unwrap().n_qubits(), 10);
    }

    #[test]
    fn bad_column_count_is_rejected() {
        assert!(BrickworkSpec::new(1, 4).is_err());
        assert!(BrickworkSpec::new(0, 5).is_err());
    }

    #[test]
    fn pattern_file_round_trips() {
        let spec = BrickworkSpec::new(2, 5).unwrap();
        let angles: Vec<f64> = (0..8).map(|q| q as f64 * 0.25).collect();
        let p = MeasurementPattern::from_angles(spec, angles).unwrap();
        assert_eq!(MeasurementPattern::parse(spec, &p.to_text()).unwrap(), p);
    }

    #[test]
    fn pattern_file_errors() {
        let spec = BrickworkSpec::new(1, 5).unwrap();
        let ok = "measure 1 1 theta 0\nmeasure 1 2 theta 0\nmeasure 1 3 theta 0\n";
        assert!(MeasurementPattern::parse(spec, ok).is_err());
        let dup = format!("{ok}measure 1 3 theta 0\n");
        assert!(MeasurementPattern::parse(spec, &dup).is_err());
        let out = format!("{ok}measure 1 5 theta 0\n");
        assert!(MeasurementPattern::parse(spec, &out).is_err());
        let good = format!("{ok}measure 1 4 theta 0.5 # last\n");
        assert!(MeasurementPattern::parse(spec, &good).is_ok());
    }

    #[test]
    fn all_zero_branch_is_teleported_state() {
        for (rows, theta) in [(1, 0.0), (1, 0.7), (2, 0.0), (2, -1.3)] {
            let spec = BrickworkSpec::new(rows, 5).unwrap();
            let pattern = MeasurementPattern::uniform(spec, theta);
            let want = teleported_output(&pattern).unwrap();
            let run = run_with(build_brickwork(&spec).unwrap(), &pattern, 0, |_| 0).unwrap();
            assert!(run.all_zero);
            assert!(run.output.fidelity(&want) > 1.0 - 1e-12);
            for p in run.zero_probabilities {
                assert!((p - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_pattern_returns_plus_states() {
        let spec = BrickworkSpec::new(2, 5).unwrap();
        let out = teleported_output(&MeasurementPattern::identity(spec)).unwrap();
        let mut plus = PureState::init(2).unwrap();
        plus.apply_gate(&GateKind::H, &[0]).unwrap();
        plus.apply_gate(&GateKind::H, &[1]).unwrap();
        assert!(out.fidelity(&plus) > 1.0 - 1e-12);
    }

    #[test]
    fn forced_failure_without_budget_clears_flag() {
        let spec = BrickworkSpec::new(1, 5).unwrap();
        let pattern = MeasurementPattern::identity(spec);
        let mut first = true;
        let run = run_with(build_brickwork(&spec).unwrap(), &pattern, 0, |_| {
            u8::from(std::mem::take(&mut first))
        })
        .unwrap();
        assert!(!run.all_zero);
        assert_eq!(run.outcomes, vec![1, 0, 0, 0]);
        assert_eq!(run.rewinds, 0);
    }

    #[test]
    fn rewinds_recover_from_ones() {
        let spec = BrickworkSpec::new(1, 5).unwrap();
        let pattern = MeasurementPattern::identity(spec);
        let mut calls = 0;
        let run = run_with(build_brickwork(&spec).unwrap(), &pattern, 2, |_| {
            calls += 1;
            u8::from(calls % 3 != 0)
        })
        .unwrap();
        assert!(run.all_zero);
        assert_eq!(run.rewinds, 8);
    }

    #[test]
    fn fanout_without_ancillas_is_identity() {
        let base = PureState::from_real(&[0.6, 0.8]).unwrap();
        let mut registry = SnapshotRegistry::new();
        let out = iqp_fanout_amplify(base.clone(), 0, 0, &mut registry, &mut from_seed(0)).unwrap();
        assert_eq!(out, base);
    }

    #[test]
    fn fanout_scales_zero_branch_by_root_two_per_ancilla() {
        let base = PureState::from_real(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]).unwrap();
        for q in 0..=4 {
            let mut registry = SnapshotRegistry::new();
            let out =
                iqp_fanout_amplify(base.clone(), 0, q, &mut registry, &mut from_seed(q as u64))
                    .unwrap();
            let want = 2f64.powf(q as f64 / 2.0);
            assert!((branch_ratio(&out, 0) - want).abs() < 1e-12 * want);
        }
    }

    #[test]
    fn all_zero_probability_formula() {
        let spec = BrickworkSpec::new(2, 5).unwrap();
        assert!((all_zero_probability(&spec, 3) - (15.0f64 / 16.0).powi(8)).abs() < 1e-15);
    }
}
