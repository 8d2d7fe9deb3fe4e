//! Exact outcome distributions of one circuit on all three backends.

use rwsim::engine::RunConfig;
use rwsim::{parse_circuit, pathsum, stabilizer, statevector};

const BELL: &str = "\
qubits 2
gate h 0
gate h 1
gate cz 0 1
gate h 1
measure 0 -> a
measure 1 -> b
accept 1
";

fn main() -> rwsim::Result<()> {
    let circuit = parse_circuit(BELL)?;
    let cfg = RunConfig::default();

    println!(
        "statevector: {:?}",
        statevector::exact_distribution(&circuit, &cfg)?
    );
    let stab = stabilizer::exact_distribution(&circuit, stabilizer::DEFAULT_DEPTH_LIMIT)?;
    for (key, p) in &stab {
        println!("stabilizer:  {key} -> {p}");
    }
    println!(
        "path sum:    {:?}",
        pathsum::outcome_distribution(&circuit, &cfg, pathsum::DEFAULT_PATH_BIT_LIMIT)?
    );
    println!(
        "acceptance:  {}",
        pathsum::acceptance_probability(&circuit, &cfg, pathsum::DEFAULT_PATH_BIT_LIMIT)?
    );
    Ok(())
}
