use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Independent noise streams, one per sensor kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Ins = 1,
    Lidar2d = 2,
    Lidar3d = 3,
    Encoder = 4,
}

/// Counter-based generator for sample `index` of tick `tick`.
///
/// Every (seed, stream, tick, index) gets its own window of the ChaCha
/// keystream, so samplers stay pure and rays can be drawn in any order.
pub fn rng_for(seed: u64, stream: Stream, tick: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng.set_word_pos(((tick as u128) << 64) | ((index as u128) << 16));
    rng
}

/// One `N(0, σ²)` draw; zero σ consumes nothing and returns exactly 0.
pub fn gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let z: f64 = StandardNormal.sample(rng);
    sigma * z
}
