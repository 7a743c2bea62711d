//! Seeded random streams.
//!
//! Every stochastic step draws from its own ChaCha stream keyed by
//! `(seed, purpose, index)`, so results never depend on how many numbers an
//! unrelated step consumed before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Purposes get disjoint halves of the 64-bit stream id space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum Purpose {
    Init = 1,
    Shuffle = 2,
    Dropout = 3,
    PadNoise = 4,
    Split = 5,
    Balance = 6,
    Augment = 7,
    Pairs = 8,
    Fixture = 9,
    GradCheck = 10,
}

pub fn stream(seed: u64, purpose: Purpose, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 48) ^ index);
    rng
}

/// Stable 64-bit FNV-1a hash, for deriving per-item seeds from names.
pub fn key(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}
