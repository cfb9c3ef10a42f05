//! Seeded random streams with a pinned, platform-independent consumption
//! order.
//!
//! Every stream is a ChaCha8 generator. Standard normals come from the
//! Marsaglia polar method: draw `u, v` uniform on `(-1, 1)` in that order,
//! reject until `0 < s = u² + v² < 1`, then emit `u·√(−2 ln s / s)` followed by
//! the cached `v·√(−2 ln s / s)`.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent sub-seed for a named consumer.
#[inline]
pub fn sub_seed(seed: u64, role: u64) -> u64 {
    mix64(seed ^ role)
}

/// Folds a sequence of identifiers into a seed, order-sensitively.
pub fn hash_seed(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(mix64(base), |acc, &p| mix64(acc ^ mix64(p)))
}

/// Role constants for [`sub_seed`]. New consumers get new constants; existing
/// streams never shift.
pub mod role {
    pub const SIGNAL_U: u64 = 0x5547_4e41_4c5f_5531;
    pub const SIGNAL_V: u64 = 0x5547_4e41_4c5f_5632;
    pub const NOISE: u64 = 0x4e4f_4953_455f_5733;
}

pub struct SeededRng {
    inner: ChaCha8Rng,
    cached_normal: Option<f64>,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng {
            inner: ChaCha8Rng::seed_from_u64(seed),
            cached_normal: None,
        }
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    #[inline]
    pub fn coin(&mut self) -> bool {
        self.inner.next_u64() >> 63 == 1
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.cached_normal.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let factor = (-2.0 * s.ln() / s).sqrt();
                self.cached_normal = Some(v * factor);
                return u * factor;
            }
        }
    }
}
