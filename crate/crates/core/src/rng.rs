//! Deterministic seed derivation.
//!
//! Every random stream is a ChaCha8 generator whose 64-bit seed is derived
//! from the master seed and a path of labels and indices. Labels are hashed
//! with FNV-1a and each path component is folded in with the SplitMix64
//! finalizer, so a stream depends only on its path and never on the order
//! in which streams are created.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SimRng = ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Hierarchical seed: `SeedPath::new(master).label("outer").index(b).seed()`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedPath(u64);

impl SeedPath {
    pub fn new(master: u64) -> Self {
        Self(splitmix(master))
    }

    pub fn label(self, s: &str) -> Self {
        Self(splitmix(self.0 ^ fnv1a(s)))
    }

    pub fn index(self, i: u64) -> Self {
        Self(splitmix(self.0 ^ splitmix(i.wrapping_add(0x5851_F42D_4C95_7F2D))))
    }

    pub fn seed(self) -> u64 {
        self.0
    }

    pub fn rng(self) -> SimRng {
        SimRng::seed_from_u64(self.0)
    }
}

pub fn standard_normal(rng: &mut SimRng) -> f64 {
    rng.sample(StandardNormal)
}

/// +1 or -1 with probability one half each.
pub fn rademacher(rng: &mut SimRng) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}
