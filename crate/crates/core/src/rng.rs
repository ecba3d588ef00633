//! Deterministic random substreams.
//!
//! Every random quantity is drawn from a ChaCha8 stream keyed by a 64-bit
//! seed and addressed by a stream number (draw or replicate index), so work
//! can be split across threads in any way without changing the numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains keep the draws of unrelated computations apart.
pub mod domain {
    pub const INFO_DRAW: u64 = 0x494e_464f;
    pub const REPLICATE: u64 = 0x5245_504c;
    pub const FISHER_DRAW: u64 = 0x4649_5348;
    pub const CROSS_COV: u64 = 0x4352_4f53;
    pub const VERIFY: u64 = 0x5645_5249;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with a domain tag and index into a fresh 64-bit seed.
pub fn derive_seed(seed: u64, domain: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(domain)) ^ index)
}

/// Independent generator number `stream` under `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
