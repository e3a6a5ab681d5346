//! Seeded random streams. Every stochastic step in the crate draws from a
//! [`SimRng`] created here, so a run is fully determined by its seeds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn stream(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for a named sub-stream: `splitmix64(seed ^ splitmix64(fnv1a(label)))`.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(seed ^ splitmix64(h))
}

/// Child seed for the `index`-th draw of a sub-stream.
pub fn derive_indexed(seed: u64, index: u64) -> u64 {
    splitmix64(seed.wrapping_add(splitmix64(index)))
}
