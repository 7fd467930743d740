//! Signed feature hashing of word unigrams and bigrams.
//!
//! Text is lowercased and split into tokens, which are maximal runs of
//! alphanumeric characters. Each unigram `w` and each bigram `w1 w2` (joined
//! by a single space) is hashed with 64-bit FNV-1a over its UTF-8 bytes. The
//! bucket is `hash % dim` and the sign is `-1` when the top bit of the hash is
//! set, `+1` otherwise. Bucket sums are L2-normalized.

use crate::error::{Error, Result};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

fn tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

fn add(v: &mut [f64], key: &str) {
    let h = fnv1a64(key.as_bytes());
    let bucket = (h % v.len() as u64) as usize;
    v[bucket] += if h >> 63 == 1 { -1.0 } else { 1.0 };
}

/// Unit-norm hashed representation of `text`; empty text (or text whose
/// signed counts cancel) maps to the zero vector.
pub fn hash_vectorize(text: &str, dim: usize) -> Result<Vec<f64>> {
    if dim < 2 {
        return Err(Error::config(format!("hash dimension must be >= 2, got {dim}")));
    }
    let toks = tokens(text);
    let mut v = vec![0.0; dim];
    for t in &toks {
        add(&mut v, t);
    }
    for pair in toks.windows(2) {
        add(&mut v, &format!("{} {}", pair[0], pair[1]));
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    Ok(v)
}
