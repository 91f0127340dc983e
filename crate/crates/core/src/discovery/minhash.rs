//! MinHash signatures over normalized column value sets.
//!
//! Each of the `k` hash functions is `h_i(x) = (a_i * x + b_i) mod (2^61 - 1)`
//! applied to a 64-bit base hash of the value. The coefficients come from a
//! ChaCha stream seeded with the caller's seed, so signatures are stable
//! across platforms and releases.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_NUM_PERM: usize = 128;

const MERSENNE_61: u64 = (1 << 61) - 1;

/// Never produced by a real hash (all real values are `< 2^61 - 1`).
pub const EMPTY_SLOT: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ColumnRef {
    pub table_id: String,
    pub column: String,
}

impl ColumnRef {
    pub fn new(table_id: impl Into<String>, column: impl Into<String>) -> Self {
        ColumnRef {
            table_id: table_id.into(),
            column: column.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub minhash: Vec<u64>,
    pub cardinality: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSignature {
    pub owner: ColumnRef,
    pub signature: Signature,
}

impl Signature {
    pub fn len(&self) -> usize {
        self.minhash.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cardinality == 0
    }

    /// Fraction of agreeing slots. Empty sets agree with nothing.
    pub fn jaccard(&self, other: &Signature) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::SignatureMismatch(self.len(), other.len()));
        }
        if self.is_empty() || other.is_empty() {
            return Ok(0.0);
        }
        let agree = self
            .minhash
            .iter()
            .zip(&other.minhash)
            .filter(|(a, b)| a == b)
            .count();
        Ok(agree as f64 / self.len() as f64)
    }
}

/// Estimated containment `|Q ∩ X| / |Q|` of the query set in the candidate.
///
/// The Jaccard estimate `j` is converted through
/// `|Q ∩ X| = j (|Q| + |X|) / (1 + j)` and clamped to `[0, 1]`.
pub fn estimate_containment(query: &Signature, candidate: &Signature) -> Result<f64> {
    if query.is_empty() {
        return Err(Error::EmptyQueryColumn);
    }
    let j = query.jaccard(candidate)?;
    let q = query.cardinality as f64;
    let x = candidate.cardinality as f64;
    let overlap = j * (q + x) / (1.0 + j);
    Ok((overlap / q).clamp(0.0, 1.0))
}

#[derive(Debug, Clone)]
pub struct MinHasher {
    seed: u64,
    a: Vec<u64>,
    b: Vec<u64>,
}

impl MinHasher {
    pub fn new(num_perm: usize, seed: u64) -> Result<Self> {
        if num_perm == 0 {
            return Err(Error::InvalidParameter("signature length must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = (0..num_perm)
            .map(|_| rng.random_range(1..MERSENNE_61))
            .collect();
        let b = (0..num_perm)
            .map(|_| rng.random_range(0..MERSENNE_61))
            .collect();
        Ok(MinHasher { seed, a, b })
    }

    pub fn num_perm(&self) -> usize {
        self.a.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Signature of a set of already-normalized values. Duplicates in the
    /// iterator are harmless for the minima but are counted in the
    /// cardinality, so pass a set.
    pub fn signature<'a, I>(&self, values: I) -> Signature
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut minhash = vec![EMPTY_SLOT; self.num_perm()];
        let mut cardinality = 0;
        for v in values {
            cardinality += 1;
            let x = base_hash(v.as_bytes()) % MERSENNE_61;
            for ((slot, &a), &b) in minhash.iter_mut().zip(&self.a).zip(&self.b) {
                let h = permute(a, b, x);
                if h < *slot {
                    *slot = h;
                }
            }
        }
        Signature {
            minhash,
            cardinality,
        }
    }
}

/// One-shot helper: signature of `values` under `num_perm` seeded hashes.
pub fn minhash_signature<'a, I>(values: I, num_perm: usize, seed: u64) -> Result<Signature>
where
    I: IntoIterator<Item = &'a str>,
{
    Ok(MinHasher::new(num_perm, seed)?.signature(values))
}

#[inline]
fn permute(a: u64, b: u64, x: u64) -> u64 {
    let v = (a as u128 * x as u128 + b as u128) % MERSENNE_61 as u128;
    v as u64
}

/// FNV-1a followed by the splitmix64 finalizer.
pub(crate) fn base_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &byte in bytes {
        h ^= byte as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    mix64(h)
}

#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(range: std::ops::Range<usize>, prefix: &str) -> Vec<String> {
        range.map(|i| format!("{prefix}{i}")).collect()
    }

    fn sig(values: &[String], seed: u64) -> Signature {
        minhash_signature(values.iter().map(String::as_str), 128, seed).unwrap()
    }

    #[test]
    fn identical_sets_identical_signatures() {
        let v = strings(0..40, "v");
        assert_eq!(sig(&v, 7), sig(&v, 7));
        assert_eq!(sig(&v, 7).jaccard(&sig(&v, 7)).unwrap(), 1.0);
    }

    #[test]
    fn zero_length_rejected() {
        assert!(MinHasher::new(0, 1).is_err());
    }

    #[test]
    fn empty_set_collides_with_nothing() {
        let empty = minhash_signature(std::iter::empty(), 16, 3).unwrap();
        assert!(empty.minhash.iter().all(|&s| s == EMPTY_SLOT));
        assert_eq!(empty.jaccard(&empty).unwrap(), 0.0);
        assert!(matches!(
            estimate_containment(&empty, &empty),
            Err(Error::EmptyQueryColumn)
        ));
    }

    #[test]
    fn disjoint_sets_estimate_near_zero() {
        let a = strings(0..100, "a");
        let b = strings(0..100, "b");
        for seed in 0..20 {
            let j = sig(&a, seed).jaccard(&sig(&b, seed)).unwrap();
            assert!(j <= 0.05, "seed {seed}: {j}");
            let c = estimate_containment(&sig(&a, seed), &sig(&b, seed)).unwrap();
            assert!(c <= 0.05, "seed {seed}: {c}");
        }
    }

    #[test]
    fn subset_estimates() {
        let big = strings(0..100, "v");
        let small = big[..50].to_vec();
        for seed in 0..20 {
            let (s, b) = (sig(&small, seed), sig(&big, seed));
            let j = s.jaccard(&b).unwrap();
            assert!((j - 0.5).abs() <= 0.15, "seed {seed}: jaccard {j}");
            let c = estimate_containment(&s, &b).unwrap();
            assert!((c - 1.0).abs() <= 0.15, "seed {seed}: containment {c}");
        }
    }

    #[test]
    fn containment_of_self_is_one() {
        let v = strings(0..30, "x");
        let s = sig(&v, 11);
        assert_eq!(estimate_containment(&s, &s).unwrap(), 1.0);
    }

    #[test]
    fn mismatched_lengths() {
        let a = minhash_signature(["x"], 8, 0).unwrap();
        let b = minhash_signature(["x"], 16, 0).unwrap();
        assert!(matches!(a.jaccard(&b), Err(Error::SignatureMismatch(8, 16))));
    }
}
