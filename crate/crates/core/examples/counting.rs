//! Deciding whether a Boolean function has fewer than half ones.

use rwsim::applications::{plus_probability_analytic, pp_decide, CountClass, PpConfig, TruthTable};
use rwsim::rng::from_seed;

fn main() -> rwsim::Result<()> {
    let mut rng = from_seed(3);
    let n = 3;
    let cfg = PpConfig::for_arity(n);
    for s in [1u64, 3, 4, 7] {
        let bits: Vec<bool> = (0..1u64 << n).map(|x| x < s).collect();
        let table = TruthTable::from_bits(&bits)?;
        let d = pp_decide(&table, &cfg, &mut rng)?;
        let best = (-(n as i32)..=n as i32)
            .map(|k| plus_probability_analytic(n, s, k))
            .fold(0.0, f64::max);
        println!(
            "s={s}: decided {} (truth {}), best |+> probability {best:.4}, fallbacks {}, failures {}",
            d.class,
            CountClass::of(n, s),
            d.fallbacks,
            d.failures
        );
    }
    Ok(())
}
