//! Rewind-driven measurement pattern on a 2x5 brickwork state.

use rwsim::mbqc::{
    all_zero_probability, build_brickwork, mbqc_run_rewind, teleported_output, BrickworkSpec,
    MeasurementPattern,
};
use rwsim::rng::from_seed;

fn main() -> rwsim::Result<()> {
    let spec = BrickworkSpec::new(2, 5)?;
    println!("edges: {:?}", spec.edges());
    let angles = vec![0.3, -0.2, 1.1, 0.0, 0.7, 0.4, -1.0, 0.25];
    let pattern = MeasurementPattern::from_angles(spec, angles)?;
    let graph = build_brickwork(&spec)?;
    let target = teleported_output(&pattern)?;

    let mut rng = from_seed(2);
    let budget = 3;
    let trials = 200;
    let mut zeros = 0;
    for _ in 0..trials {
        let run = mbqc_run_rewind(graph.clone(), &pattern, budget, &mut rng)?;
        if run.all_zero {
            zeros += 1;
            assert!(run.output.fidelity(&target) > 1.0 - 1e-9);
        }
    }
    println!(
        "all-zero runs {zeros}/{trials}, predicted {:.4}",
        all_zero_probability(&spec, budget)
    );
    Ok(())
}
