//! Deterministic derivation of independent RNG seeds and streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a path of indices, e.g. `(iteration, phase)`.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(base), |acc, &p| {
        splitmix64(acc ^ splitmix64(p.wrapping_add(GOLDEN)))
    })
}

/// RNG for the `stream`-th independent worker (tree, trajectory, ...) under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed used for the regressor fitted at `iteration` for reference `phase`.
///
/// Plain FQI uses phase 0, so a single-phase tracking run draws exactly the
/// same regressor seeds as the equivalent FQI run.
pub fn regression_seed(base: u64, iteration: usize, phase: usize) -> u64 {
    derive_seed(base, &[iteration as u64, phase as u64])
}
