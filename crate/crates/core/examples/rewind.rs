//! Retry-until-zero with conditional rewinds, sampled and enumerated.

use rwsim::engine::RunConfig;
use rwsim::rng::from_seed;
use rwsim::{parse_circuit, statevector};

fn main() -> rwsim::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/retry_until_zero.qc");
    let circuit = parse_circuit(&std::fs::read_to_string(path).expect("fixture"))?;
    let cfg = RunConfig::default();

    let mut rng = from_seed(5);
    for _ in 0..5 {
        let run = statevector::run(&circuit, &mut rng, &cfg)?;
        println!(
            "record [{}] rewinds {} accept {:?}",
            run.record, run.rewinds_used, run.accept_bit
        );
    }
    for (key, p) in statevector::exact_distribution(&circuit, &cfg)? {
        println!("P({key}) = {p}");
    }
    println!(
        "P(accept) = {}",
        statevector::exact_acceptance(&circuit, &cfg)?
    );
    Ok(())
}
