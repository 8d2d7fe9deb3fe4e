//! Collision finding with one rewind on a toy family and a small LWE family.

use rwsim::applications::{
    family_delta_exact, CollisionFinder, FunctionFamily, LweFamily, LweParams, ToyTwoRegular,
};
use rwsim::rng::from_seed;

fn rate(family: &dyn FunctionFamily, rewind: bool, trials: usize) -> rwsim::Result<f64> {
    let finder = CollisionFinder::new(family)?;
    let mut rng = from_seed(1);
    let mut hits = 0;
    for _ in 0..trials {
        if let Some((x, y)) = finder.find(&mut rng, rewind)? {
            assert_eq!(family.eval(x), family.eval(y));
            hits += 1;
        }
    }
    Ok(hits as f64 / trials as f64)
}

fn main() -> rwsim::Result<()> {
    let toy = ToyTwoRegular { image_bits: 3 };
    println!("{}: with rewind {:.3}", toy.name(), rate(&toy, true, 500)?);
    let wide = ToyTwoRegular { image_bits: 8 };
    println!(
        "{}: without rewind {:.3}",
        wide.name(),
        rate(&wide, false, 500)?
    );

    let params = LweParams::toy(1, 16, 2, 1)?;
    let lwe = LweFamily::keygen_injective(params, &mut from_seed(1), 1000)?;
    println!(
        "{}: delta {:.3}, with rewind {:.3}",
        lwe.name(),
        family_delta_exact(&lwe)?,
        rate(&lwe, true, 300)?
    );
    Ok(())
}
