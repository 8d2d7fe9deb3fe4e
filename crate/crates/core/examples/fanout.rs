//! Skewing a qubit's branch ratio with CH ancillas driven to 0.

use rwsim::mbqc::{branch_ratio, iqp_fanout_amplify};
use rwsim::rng::from_seed;
use rwsim::statevector::SnapshotRegistry;
use rwsim::{GateKind, PureState};

fn main() -> rwsim::Result<()> {
    let mut rng = from_seed(4);
    let mut registry = SnapshotRegistry::new();
    for q in 0..=6 {
        let mut state = PureState::init(1)?;
        state.apply_gate(&GateKind::H, &[0])?;
        let out = iqp_fanout_amplify(state, 0, q, &mut registry, &mut rng)?;
        println!("q={q}: |beta/alpha| = {:.6}", branch_ratio(&out, 0));
    }
    Ok(())
}
