//! Seed derivation and the reference random number generator.
//!
//! Every random stream in the pipeline is a `ChaCha8Rng` (rand_chacha 0.9)
//! seeded through `SeedableRng::seed_from_u64`. Independent stages get
//! independent streams by deriving a child seed from the master seed, a
//! purpose tag and an index:
//!
//! ```text
//! h     = FNV-1a-64(tag bytes)
//! child = splitmix64(splitmix64(master ^ h) ^ index)
//! ```
//!
//! `splitmix64` is the standard finalizer (`0x9e3779b97f4a7c15` increment,
//! multipliers `0xbf58476d1ce4e5b9` and `0x94d049bb133111eb`).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Human-readable identification of the generator and seed scheme.
pub const GENERATOR: &str = "ChaCha8Rng (rand_chacha 0.9), splitmix64/FNV-1a derived seeds";

/// Purpose tags used for derived seeds.
pub mod purpose {
    pub const PAYLOAD: &str = "payload";
    pub const PHASE: &str = "phase";
    pub const SHUFFLE: &str = "shuffle";
    pub const INIT: &str = "init";
    pub const CORRUPTION: &str = "corruption";
    pub const NOISE: &str = "noise";
    pub const FLOOR: &str = "floor";
    pub const BATCH: &str = "batch";
    pub const DROPOUT: &str = "dropout";
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Derives a child seed for `tag`/`index` from `master`.
pub fn derive_seed(master: u64, tag: &str, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ fnv1a(tag.as_bytes())) ^ index)
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(master: u64, tag: &str, index: u64) -> Rng {
    rng_from_seed(derive_seed(master, tag, index))
}
