//! Amplitude mitigation on a flagged state built from a truth table,
//! followed by extraction of the target qubit.

use rwsim::mitigation::{
    extract_target, make_flagged, mitigate, prepare_psi, success_probability, FlaggedState,
};
use rwsim::rng::from_seed;
use rwsim::statevector::SnapshotRegistry;

fn main() -> rwsim::Result<()> {
    let mut rng = from_seed(17);
    // f on 3 bits with a single one.
    let table = [false, false, false, false, false, true, false, false];
    let n = 3;

    let (psi, attempts) = prepare_psi(&table, &mut rng)?;
    println!("psi prepared in {attempts} attempt(s)");
    let fs = make_flagged(&psi, 0, n)?;
    println!(
        "nontarget p = {:.6}, odds = {:.3e}",
        fs.nontarget_probability(),
        fs.odds()
    );
    println!(
        "exact success probability = {:.9}",
        success_probability(fs.nontarget_probability(), n)
    );

    let mut registry = SnapshotRegistry::new();
    let (fs, trace) = mitigate(fs, n as usize, &mut registry, &mut rng)?;
    println!(
        "{:?} after {} measurements, odds now {:.3e}",
        trace.outcome,
        trace.events.len(),
        fs.odds()
    );
    let target = extract_target(fs, n as usize, &mut registry, &mut rng)?;
    println!("target amplitudes: {:?}", target.amplitudes());

    // The bare two-qubit form.
    let fs = FlaggedState::from_probability(0.99)?;
    let (fs, _) = mitigate(fs, 2, &mut registry, &mut rng)?;
    println!("p = 0.99 -> {:.6}", fs.nontarget_probability());
    Ok(())
}
