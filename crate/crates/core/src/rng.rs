//! Keyed, order-independent randomness.
//!
//! Every stochastic operation derives its generator from a 64-bit key that
//! is a hash of the user seed and the identity of the work unit (item id,
//! corruption kind, severity, ...). Generators are ChaCha8 streams, so the
//! bits drawn for a unit depend only on its key and never on thread count or
//! processing order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type KeyedRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Incremental 64-bit hash over a sequence of typed fields.
///
/// Strings are length-prefixed so that `("ab", "c")` and `("a", "bc")`
/// produce different keys.
#[derive(Debug, Clone, Copy)]
pub struct KeyHasher {
    state: u64,
}

impl KeyHasher {
    pub fn new(seed: u64) -> Self {
        Self { state: splitmix(seed) }
    }

    pub fn u64(mut self, v: u64) -> Self {
        self.state = splitmix(self.state ^ v).rotate_left(23) ^ splitmix(v.wrapping_add(self.state));
        self
    }

    pub fn str(mut self, s: &str) -> Self {
        self = self.u64(s.len() as u64);
        for chunk in s.as_bytes().chunks(8) {
            let mut word = [0u8; 8];
            word[..chunk.len()].copy_from_slice(chunk);
            self = self.u64(u64::from_le_bytes(word));
        }
        self
    }

    pub fn finish(self) -> u64 {
        splitmix(self.state)
    }
}

/// `hash64(seed, item_id, kind, severity)`, the per-cell key used when
/// materializing corrupted test sets.
pub fn cell_key(seed: u64, item_id: &str, kind: &str, severity: u8) -> u64 {
    KeyHasher::new(seed).str(item_id).str(kind).u64(u64::from(severity)).finish()
}

/// `hash64(seed, item_id)`, the per-item key for batch augmentation.
pub fn item_key(seed: u64, item_id: &str) -> u64 {
    KeyHasher::new(seed).str(item_id).finish()
}

pub fn rng_from_key(key: u64) -> KeyedRng {
    ChaCha8Rng::seed_from_u64(key)
}
