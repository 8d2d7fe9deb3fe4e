//! Random circuit generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::Rng;
use rwsim::circuit::{Condition, Instruction};
use rwsim::{Circuit, GateKind};

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn distinct<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    rand::seq::index::sample(rng, n, k).into_vec()
}

fn clifford_gate<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (GateKind, Vec<usize>) {
    let two = n >= 2;
    match rng.random_range(0..if two { 5 } else { 3 }) {
        0 => (GateKind::X, distinct(n, 1, rng)),
        1 => (GateKind::H, distinct(n, 1, rng)),
        2 => (GateKind::S, distinct(n, 1, rng)),
        3 => (GateKind::Cz, distinct(n, 2, rng)),
        _ => (GateKind::Swap, distinct(n, 2, rng)),
    }
}

fn any_gate<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (GateKind, Vec<usize>) {
    let choices = if n >= 3 {
        9
    } else if n >= 2 {
        8
    } else {
        5
    };
    match rng.random_range(0..choices) {
        0 => (GateKind::X, distinct(n, 1, rng)),
        1 => (GateKind::H, distinct(n, 1, rng)),
        2 => (GateKind::S, distinct(n, 1, rng)),
        3 => (GateKind::Hk(rng.random_range(-3..=3)), distinct(n, 1, rng)),
        4 => (
            GateKind::Rz(rng.random_range(-3.2..3.2)),
            distinct(n, 1, rng),
        ),
        5 => (GateKind::Cz, distinct(n, 2, rng)),
        6 => (GateKind::Ch, distinct(n, 2, rng)),
        7 => (GateKind::Swap, distinct(n, 2, rng)),
        _ => (GateKind::Ccz, distinct(n, 3, rng)),
    }
}

/// Clifford circuit with at most `max_gates` gates, `max_measures`
/// measurements and `max_rewinds` conditional rewinds.
///
/// Rewinds come in retry blocks: snapshot, measure, rewind if 1, measure
/// again if 1. Some gates are conditioned on earlier outcomes.
pub fn random_clifford<R: Rng + ?Sized>(
    max_qubits: usize,
    max_gates: usize,
    max_measures: usize,
    max_rewinds: usize,
    rng: &mut R,
) -> Circuit {
    let n = rng.random_range(1..=max_qubits);
    let mut c = Circuit::new(n);
    let (mut gates, mut measures, mut rewinds) = (0, 0, 0);
    let mut labels: Vec<String> = Vec::new();
    let target_gates = rng.random_range(1..=max_gates);
    while gates < target_gates {
        let roll = rng.random_range(0..10);
        if roll == 0 && measures + 2 <= max_measures && rewinds < max_rewinds {
            let q = rng.random_range(0..n);
            let (snap, first, second) = (
                format!("s{rewinds}"),
                format!("m{measures}"),
                format!("m{}", measures + 1),
            );
            c.snapshot(&snap);
            c.measure(q, &first);
            let cond = Condition::new([(first.clone(), 1u8)]);
            c.when(cond.clone(), Instruction::Rewind { label: snap });
            c.when(
                cond,
                Instruction::Measure {
                    qubit: q,
                    label: second.clone(),
                },
            );
            labels.push(first);
            labels.push(second);
            measures += 2;
            rewinds += 1;
        } else if roll == 1 && measures < max_measures {
            let label = format!("m{measures}");
            c.measure(rng.random_range(0..n), &label);
            labels.push(label);
            measures += 1;
        } else {
            let (kind, targets) = clifford_gate(n, rng);
            if !labels.is_empty() && rng.random_range(0..6) == 0 {
                let label = labels[rng.random_range(0..labels.len())].clone();
                let bit = rng.random_range(0..2u8);
                c.when(
                    Condition::new([(label, bit)]),
                    Instruction::Gate { kind, targets },
                );
            } else {
                c.gate(kind, &targets);
            }
            gates += 1;
        }
    }
    c.meta.rewind_budget = Some(rewinds);
    c
}

/// Circuit over the full gate set with at most `max_postselects`
/// postselections and an accept qubit.
pub fn random_general<R: Rng + ?Sized>(
    max_qubits: usize,
    max_gates: usize,
    max_postselects: usize,
    rng: &mut R,
) -> Circuit {
    let n = rng.random_range(1..=max_qubits);
    let mut c = Circuit::new(n);
    let n_gates = rng.random_range(1..=max_gates);
    let n_post = rng.random_range(0..=max_postselects);
    let mut slots: Vec<usize> = (0..n_post).map(|_| rng.random_range(0..=n_gates)).collect();
    slots.sort_unstable();
    let mut slot = slots.into_iter().peekable();
    for g in 0..=n_gates {
        while slot.peek() == Some(&g) {
            slot.next();
            c.postselect(rng.random_range(0..n), rng.random_range(0..2u8));
        }
        if g < n_gates {
            let (kind, targets) = any_gate(n, rng);
            c.gate(kind, &targets);
        }
    }
    c.accept(rng.random_range(0..n));
    c
}

/// Largest absolute difference between two distributions over the union of
/// their keys.
pub fn max_dist_diff(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    a.keys()
        .chain(b.keys())
        .map(|k| (a.get(k).copied().unwrap_or(0.0) - b.get(k).copied().unwrap_or(0.0)).abs())
        .fold(0.0, f64::max)
}

pub fn to_f64_dist(d: &BTreeMap<String, BigRational>) -> BTreeMap<String, f64> {
    d.iter()
        .map(|(k, v)| (k.clone(), v.to_f64().unwrap_or(f64::NAN)))
        .collect()
}
