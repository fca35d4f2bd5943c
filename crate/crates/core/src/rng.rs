//! Deterministic random sub-streams keyed by `(seed, domain, iteration, unit)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a sub-stream is used for; keeps streams of different steps apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Domain {
    Init = 1,
    Hyper = 2,
    Visit = 3,
    Shared = 4,
    Dof = 5,
    Subject = 6,
    Expansion = 7,
    Impute = 8,
    Simulate = 9,
    Oracle = 10,
}

#[derive(Debug, Clone)]
pub struct StreamFactory {
    base: ChaCha8Rng,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

impl StreamFactory {
    pub fn new(seed: u64) -> Self {
        Self { base: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Independent generator for one unit of work.
    pub fn stream(&self, domain: Domain, iteration: u64, unit: u64) -> ChaCha8Rng {
        let id = splitmix(splitmix(splitmix(domain as u64) ^ iteration) ^ unit);
        let mut rng = self.base.clone();
        rng.set_stream(id);
        rng.set_word_pos(0);
        rng
    }
}
