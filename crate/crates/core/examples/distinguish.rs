//! Telling two circuits apart from their output distributions.

use rwsim::applications::{sd_decide, sd_error_exact, TruthTable};
use rwsim::rng::from_seed;

fn main() -> rwsim::Result<()> {
    let parity = TruthTable::parse("0\n1\n1\n0\n1\n0\n0\n1\n")?;
    let constant = TruthTable::parse("0\n0\n0\n0\n0\n0\n0\n0\n")?;
    for (name, c1) in [("parity vs parity", &parity), ("parity vs zero", &constant)] {
        let e = sd_error_exact(&parity, c1)?;
        let mut rng = from_seed(9);
        let trials = 4000;
        let ones: usize = (0..trials)
            .map(|_| sd_decide(&parity, c1, &mut rng).map(usize::from))
            .sum::<rwsim::Result<usize>>()?;
        println!(
            "{name}: D_TV {}, P(output 1) {} exact, {:.4} sampled",
            e.d_tv,
            e.p_err_prime,
            ones as f64 / trials as f64
        );
    }
    Ok(())
}
