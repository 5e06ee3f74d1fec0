//! Instances shared by the benchmarks.

use tmaris_core::admm::Problem;
use tmaris_core::system::sample_channel;
use tmaris_core::{rng_from_seed, SystemConfig};

/// Default scenario on a `side x side` array with `users` users.
pub fn instance(side: usize, users: usize, seed: u64) -> Problem {
    let mut rng = rng_from_seed(seed);
    let mut cfg = SystemConfig::default_scenario(users, &mut rng);
    cfg.nx = side;
    cfg.nz = side;
    let ch = sample_channel(&cfg, &mut rng).expect("valid default scenario");
    Problem::from_config(&cfg, &ch).expect("channels match the configuration")
}
