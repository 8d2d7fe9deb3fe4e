use std::collections::HashMap;

use super::{PureState, ZERO_PROBABILITY};
use crate::circuit::ClassicalDescription;
use crate::error::{Error, Result};

/// Tolerance of the strict rewind consistency check, per amplitude.
pub const REWIND_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RewindMode {
    /// Refuse unless the post-state is a single-qubit Z projection of the
    /// stored state.
    #[default]
    Strict,
    /// Restore unconditionally.
    Permissive,
}

#[derive(Debug, Clone)]
pub struct SnapshotEntry<S> {
    pub state: S,
    /// `None` when the state was produced by a driver whose oracles have no
    /// gate-level description.
    pub description: Option<ClassicalDescription>,
}

/// Per-run map from snapshot label to a stored state.
#[derive(Debug, Clone)]
pub struct SnapshotRegistry<S = PureState> {
    entries: HashMap<String, SnapshotEntry<S>>,
}

impl<S> Default for SnapshotRegistry<S> {
    fn default() -> Self {
        SnapshotRegistry {
            entries: HashMap::new(),
        }
    }
}

impl<S: Clone> SnapshotRegistry<S> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores an independent copy of `state` under `label`.
    pub fn snapshot(
        &mut self,
        label: &str,
        state: &S,
        description: Option<ClassicalDescription>,
    ) -> Result<()> {
        if self.entries.contains_key(label) {
            return Err(Error::DuplicateSnapshot(label.to_string()));
        }
        self.entries.insert(
            label.to_string(),
            SnapshotEntry {
                state: state.clone(),
                description,
            },
        );
        Ok(())
    }

    /// Replaces the entry under `label`, for drivers that snapshot the same
    /// logical point repeatedly.
    pub fn overwrite(&mut self, label: &str, state: &S) {
        self.entries.insert(
            label.to_string(),
            SnapshotEntry {
                state: state.clone(),
                description: None,
            },
        );
    }

    pub fn get(&self, label: &str) -> Result<&SnapshotEntry<S>> {
        self.entries
            .get(label)
            .ok_or_else(|| Error::UnknownSnapshot(label.to_string()))
    }

    pub fn contains(&self, label: &str) -> bool {
        self.entries.contains_key(label)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl SnapshotRegistry<PureState> {
    /// Checks that every stored description replays to its stored state.
    pub fn verify_descriptions(&self) -> Result<()> {
        for (label, entry) in &self.entries {
            if let Some(d) = &entry.description {
                let replay = super::clone_from_description(d)?;
                if replay.max_abs_diff(&entry.state) > 1e-12 {
                    return Err(Error::RewindInconsistent {
                        label: label.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// True when `post` equals `pre` projected onto a single-qubit Z outcome
/// and renormalized, up to global phase.
pub fn is_single_qubit_projection(pre: &PureState, post: &PureState, tol: f64) -> bool {
    if pre.n_qubits() != post.n_qubits() {
        return false;
    }
    for q in 0..pre.n_qubits() {
        for bit in 0..2u8 {
            let p = pre.probability(q, bit);
            if p <= ZERO_PROBABILITY {
                continue;
            }
            let mut projected = pre.clone();
            projected.project_unchecked(q, bit, p);
            if projected.approx_eq_up_to_phase(post, tol) {
                return true;
            }
        }
    }
    false
}

/// Rewinding operator: returns the stored pre-measurement state.
pub fn rewind(
    post: &PureState,
    registry: &SnapshotRegistry<PureState>,
    label: &str,
    mode: RewindMode,
) -> Result<PureState> {
    let entry = registry.get(label)?;
    if mode == RewindMode::Strict
        && !is_single_qubit_projection(&entry.state, post, REWIND_TOLERANCE)
    {
        return Err(Error::RewindInconsistent {
            label: label.to_string(),
        });
    }
    Ok(entry.state.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::GateKind;
    use crate::rng::from_seed;
    use crate::statevector::clone_from_description;

    fn plus() -> PureState {
        let mut s = PureState::init(1).unwrap();
        s.apply_gate(&GateKind::H, &[0]).unwrap();
        s
    }

    #[test]
    fn snapshot_is_an_independent_copy() {
        let mut reg = SnapshotRegistry::new();
        let mut s = plus();
        reg.snapshot("a", &s, None).unwrap();
        s.measure(0, &mut from_seed(0)).unwrap();
        assert_eq!(reg.get("a").unwrap().state, plus());
        assert_eq!(
            reg.snapshot("a", &s, None).unwrap_err(),
            Error::DuplicateSnapshot("a".into())
        );
        let back = rewind(&s, &reg, "a", RewindMode::Strict).unwrap();
        assert_eq!(back, plus());
    }

    #[test]
    fn rewind_entangled_example() {
        let d = ClassicalDescription::new(2)
            .gate(GateKind::H, &[0])
            .gate(GateKind::H, &[1])
            .gate(GateKind::Cz, &[0, 1]);
        let pre = clone_from_description(&d).unwrap();
        let mut reg = SnapshotRegistry::new();
        reg.snapshot("s", &pre, Some(d)).unwrap();
        reg.verify_descriptions().unwrap();
        let mut post = pre.clone();
        post.project(0, 0).unwrap();
        assert_eq!(rewind(&post, &reg, "s", RewindMode::Strict).unwrap(), pre);
    }

    #[test]
    fn strict_mode_refuses_unrelated_states() {
        let mut reg = SnapshotRegistry::new();
        reg.snapshot("p", &plus(), None).unwrap();
        let one = PureState::basis(1, 1).unwrap();
        assert!(rewind(&one, &reg, "p", RewindMode::Strict).is_ok());

        // |q1=1, q0=0> has zero amplitude in the stored state.
        let mut bell = PureState::init(2).unwrap();
        bell.apply_gate(&GateKind::H, &[0]).unwrap();
        bell.apply_gate(&GateKind::Ch, &[0, 1]).unwrap();
        let mut reg = SnapshotRegistry::new();
        reg.snapshot("b", &bell, None).unwrap();
        let odd = PureState::basis(2, 0b10).unwrap();
        assert_eq!(
            rewind(&odd, &reg, "b", RewindMode::Strict).unwrap_err(),
            Error::RewindInconsistent { label: "b".into() }
        );
        assert!(rewind(&odd, &reg, "b", RewindMode::Permissive).is_ok());
        assert_eq!(
            rewind(&odd, &reg, "missing", RewindMode::Permissive).unwrap_err(),
            Error::UnknownSnapshot("missing".into())
        );
    }
}
