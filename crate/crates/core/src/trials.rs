//! Parallel execution of independent seeded trials.

use rayon::prelude::*;

use crate::rng::{stream, SimRng};

/// Runs `f(i, rng_i)` for `i in 0..trials`, where `rng_i = stream(master, i)`.
///
/// Output order is by trial index, so the result does not depend on `jobs`.
pub fn run_trials<T, F>(trials: usize, master: u64, jobs: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut SimRng) -> T + Sync + Send,
{
    let one = |i: usize| {
        let mut rng = stream(master, i as u64);
        f(i, &mut rng)
    };
    if jobs <= 1 {
        return (0..trials).map(one).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| (0..trials).into_par_iter().map(one).collect()),
        Err(_) => (0..trials).map(one).collect(),
    }
}

/// Runs on the global rayon pool.
pub fn par_trials<T, F>(trials: usize, master: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut SimRng) -> T + Sync + Send,
{
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(master, i as u64);
            f(i, &mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn results_independent_of_jobs() {
        let a = run_trials(64, 9, 1, |_, r| r.random::<u64>());
        let b = run_trials(64, 9, 4, |_, r| r.random::<u64>());
        let c = par_trials(64, 9, |_, r| r.random::<u64>());
        assert_eq!(a, b);
        assert_eq!(a, c);
    }
}
