//! Counter-based random streams keyed by `(seed, label)`.
//!
//! A stream's key is SHA-256 over a domain tag, the seed (little endian) and
//! the label bytes; the generator is ChaCha20 on that key. Identical
//! `(seed, label)` pairs give identical sequences on every platform.
//!
//! Labels in use: `init`, `data_order`, `model_noise`, `mitigation_noise`,
//! with `/member:<k>` appended for the k-th member of an ensemble.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

const DOMAIN: &[u8] = b"deni-stream-v1";

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    label: String,
    inner: ChaCha20Rng,
}

/// Derive the stream for `(seed, label)`. Panics on an empty label.
pub fn derive_stream(seed: u64, label: &str) -> RngStream {
    assert!(!label.is_empty(), "stream label must be non-empty");
    let mut hasher = Sha256::new();
    hasher.update(DOMAIN);
    hasher.update(seed.to_le_bytes());
    hasher.update(label.as_bytes());
    let key: [u8; 32] = hasher.finalize().into();
    RngStream {
        seed,
        label: label.to_owned(),
        inner: ChaCha20Rng::from_seed(key),
    }
}

impl RngStream {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Number of 32-bit words consumed so far.
    pub fn counter(&self) -> u64 {
        self.inner.get_word_pos() as u64
    }

    /// Independent stream `label/suffix` under the same seed.
    pub fn child(&self, suffix: &str) -> RngStream {
        derive_stream(self.seed, &format!("{}/{}", self.label, suffix))
    }

    /// Stream for ensemble member `k`. Member 0 is the base stream itself so
    /// that a one-member ensemble reproduces a single run.
    pub fn member(seed: u64, label: &str, k: usize) -> RngStream {
        if k == 0 {
            derive_stream(seed, label)
        } else {
            derive_stream(seed, &format!("{label}/member:{k}"))
        }
    }

    /// Uniform draw in `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
