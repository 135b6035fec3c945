//! Named random substreams derived from one master seed.
//!
//! Every consumer of randomness in a run (parameter init, masks, environment,
//! exploration, evaluation) draws from its own stream, so switching the
//! sharing mode never shifts the environment's random sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derives a 64-bit seed for the stream `name` under `master`.
pub fn derive_seed(master: u64, name: &str) -> u64 {
    // FNV-1a over the name, then mixed with the master seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(splitmix64(master) ^ h)
}

pub fn substream(master: u64, name: &str) -> Rng {
    Rng::seed_from_u64(derive_seed(master, name))
}

/// Stream `index` of a seeded generator; used for per-agent mask draws.
pub fn indexed_stream(seed: u64, index: u64) -> Rng {
    let mut rng = Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
