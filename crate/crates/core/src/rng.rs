//! Named, seeded random substreams. All randomness in the crate flows
//! through here so a single seed reproduces a run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

/// Substream derived from `seed` and a stable name.
pub fn substream(seed: u64, name: &str) -> Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(name.as_bytes());
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// Child seed for indexed sub-runs (trials, retries, centers).
pub fn child_seed(seed: u64, name: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(name.as_bytes());
    h.update(index.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

/// Source of uniform indices. The process draws every choice through
/// this so a run can be replayed against another implementation.
pub trait ChoiceSource {
    fn choose(&mut self, len: usize) -> usize;
}

impl<R: rand::Rng> ChoiceSource for R {
    fn choose(&mut self, len: usize) -> usize {
        self.gen_range(0..len)
    }
}
