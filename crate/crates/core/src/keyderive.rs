//! Deterministic key-material derivation.
//!
//! All symmetric derivation funnels through SHA-2 with an explicit
//! domain-separation tag per role, so a PRF output can never collide with a
//! challenge hash or a chain step. Chains evolve over raw 32-byte seeds;
//! values are reduced to scalars only at the point of algebraic use.

use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256, Sha512};
use zeroize::Zeroize;

use crate::group::{GroupId, Scalar};
use crate::metrics;

/// Length of every seed and chain value.
pub const SEED_LEN: usize = 32;

const TAG_PRF_NONCE: &[u8] = b"lrsha.v1.prf.nonce";
const TAG_PRF_MASK: &[u8] = b"lrsha.v1.prf.mask";
const TAG_HASH_TO_SCALAR: &[u8] = b"lrsha.v1.hash2scalar";
const TAG_KEY_CHAIN: &[u8] = b"lrsha.v1.keychain";

#[derive(Debug, thiserror::Error, Clone, Copy, PartialEq, Eq)]
pub enum KeyDeriveError {
    #[error("stride {stride} invalid for a chain of {max_epoch} epochs")]
    InvalidStride { stride: u64, max_epoch: u64 },
    #[error("epoch {epoch} outside [1, {max_epoch}]")]
    EpochOutOfRange { epoch: u64, max_epoch: u64 },
}

/// A 32-byte secret seed. Zeroized on drop.
#[derive(Clone, PartialEq, Eq)]
pub struct Seed([u8; SEED_LEN]);

impl Seed {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut bytes = [0u8; SEED_LEN];
        rng.fill_bytes(&mut bytes);
        Seed(bytes)
    }

    pub fn from_bytes(bytes: [u8; SEED_LEN]) -> Self {
        Seed(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; SEED_LEN] {
        &self.0
    }
}

impl Drop for Seed {
    fn drop(&mut self) {
        self.0.zeroize();
    }
}

impl std::fmt::Debug for Seed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Seed(<redacted>)")
    }
}

pub(crate) fn tagged_sha512(tag: &[u8], parts: &[&[u8]]) -> [u8; 64] {
    let mut h = Sha512::new();
    h.update([tag.len() as u8]);
    h.update(tag);
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

pub(crate) fn tagged_sha256(tag: &[u8], parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update([tag.len() as u8]);
    h.update(tag);
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

/// PRF in the nonce-seed role: a scalar per (key, counter) pair.
pub fn prf(group: GroupId, key: &[u8; 32], counter: u64) -> Scalar {
    metrics::bump(|c| c.prf += 1);
    let wide = tagged_sha512(TAG_PRF_NONCE, &[key, &counter.to_le_bytes()]);
    group.scalar_reduce_wide(&wide)
}

/// PRF in the message-mask role: the raw 32-byte one-time mask x_j. Kept at
/// full width since it is only ever hashed, never used algebraically.
pub fn prf_mask(key: &[u8; 32], counter: u64) -> [u8; 32] {
    metrics::bump(|c| c.prf += 1);
    let wide = tagged_sha512(TAG_PRF_MASK, &[key, &counter.to_le_bytes()]);
    let mut out = [0u8; 32];
    out.copy_from_slice(&wide[..32]);
    out
}

/// Hash an arbitrary byte string to a scalar via a 512-bit digest reduced
/// mod q.
pub fn hash_to_scalar(group: GroupId, msg: &[u8]) -> Scalar {
    metrics::bump(|c| c.hash_to_scalar += 1);
    let wide = tagged_sha512(TAG_HASH_TO_SCALAR, &[msg]);
    group.scalar_reduce_wide(&wide)
}

/// One step of the key chain.
pub fn chain_step(seed: &Seed) -> Seed {
    metrics::bump(|c| c.chain_step += 1);
    Seed(tagged_sha256(TAG_KEY_CHAIN, &[seed.as_bytes()]))
}

/// k-fold iterated chain step; `hash_chain(s, 0)` is `s` itself.
pub fn hash_chain(seed: &Seed, k: u64) -> Seed {
    let mut cur = seed.clone();
    for _ in 0..k {
        cur = chain_step(&cur);
    }
    cur
}

/// Reduce a chain value to a scalar for algebraic use.
pub fn seed_to_scalar(group: GroupId, seed: &Seed) -> Scalar {
    metrics::bump(|c| c.seed_reduce += 1);
    group.scalar_reduce(seed.as_bytes())
}

/// Precomputed chain anchors with interleaved indices: anchor i holds the
/// chain value at epoch `1 + i*stride`, so any epoch is reachable in at most
/// `stride - 1` hash steps. Stride trades storage for lookup cost.
#[derive(Clone)]
pub struct ChainTable {
    stride: u64,
    max_epoch: u64,
    anchors: Vec<Seed>,
}

/// Build a table over epochs `1..=max_epoch`.
pub fn build_chain_table(seed: &Seed, max_epoch: u64, stride: u64) -> Result<ChainTable, KeyDeriveError> {
    if max_epoch < 1 || stride < 1 || stride > max_epoch {
        return Err(KeyDeriveError::InvalidStride { stride, max_epoch });
    }
    let mut anchors = Vec::with_capacity(max_epoch.div_ceil(stride) as usize);
    let mut cur = seed.clone();
    anchors.push(cur.clone());
    for epoch in 2..=max_epoch {
        cur = chain_step(&cur);
        if (epoch - 1) % stride == 0 {
            anchors.push(cur.clone());
        }
    }
    Ok(ChainTable { stride, max_epoch, anchors })
}

impl ChainTable {
    pub fn stride(&self) -> u64 {
        self.stride
    }

    pub fn max_epoch(&self) -> u64 {
        self.max_epoch
    }

    pub fn anchor_count(&self) -> usize {
        self.anchors.len()
    }

    /// Anchor epochs in ascending order.
    pub fn anchor_epochs(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.anchors.len() as u64).map(|i| 1 + i * self.stride)
    }

    /// Chain value at `epoch`, equal to `hash_chain(seed, epoch - 1)`.
    pub fn lookup(&self, epoch: u64) -> Result<Seed, KeyDeriveError> {
        if epoch < 1 || epoch > self.max_epoch {
            return Err(KeyDeriveError::EpochOutOfRange { epoch, max_epoch: self.max_epoch });
        }
        let idx = ((epoch - 1) / self.stride) as usize;
        let steps = (epoch - 1) % self.stride;
        Ok(hash_chain(&self.anchors[idx], steps))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn seed(byte: u8) -> Seed {
        Seed::from_bytes([byte; 32])
    }

    #[test]
    fn prf_is_deterministic_and_counter_sensitive() {
        let g = GroupId::Ristretto255;
        let k = [7u8; 32];
        assert_eq!(prf(g, &k, 1), prf(g, &k, 1));
        assert_ne!(prf(g, &k, 1), prf(g, &k, 2));
        assert_eq!(prf_mask(&k, 3), prf_mask(&k, 3));
        assert_ne!(prf_mask(&k, 3), prf_mask(&k, 4));
    }

    #[test]
    fn prf_differs_across_keys() {
        let g = GroupId::Ristretto255;
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..1000 {
            let mut k1 = [0u8; 32];
            let mut k2 = [0u8; 32];
            rng.fill_bytes(&mut k1);
            rng.fill_bytes(&mut k2);
            if k1 == k2 {
                continue;
            }
            assert_ne!(prf(g, &k1, 5), prf(g, &k2, 5));
        }
    }

    #[test]
    fn prf_and_hash_to_scalar_are_domain_separated() {
        let g = GroupId::Ristretto255;
        let mut rng = StdRng::seed_from_u64(12);
        for _ in 0..1000 {
            let mut k = [0u8; 32];
            rng.fill_bytes(&mut k);
            let j = rng.next_u64();
            let mut input = Vec::new();
            input.extend_from_slice(&k);
            input.extend_from_slice(&j.to_le_bytes());
            assert_ne!(prf(g, &k, j), hash_to_scalar(g, &input));
            assert_ne!(prf_mask(&k, j), prf(g, &k, j).encode());
        }
    }

    #[test]
    fn hash_to_scalar_is_stable_and_in_range() {
        let g = GroupId::Toy23;
        let a = hash_to_scalar(g, b"");
        assert_eq!(a, hash_to_scalar(g, b""));
        let mut rng = StdRng::seed_from_u64(13);
        let mut buf = [0u8; 40];
        for _ in 0..100_000 {
            rng.fill_bytes(&mut buf);
            let s = hash_to_scalar(g, &buf);
            let enc = s.encode();
            assert!(u64::from(enc[0]) < crate::group::TOY_Q);
            assert!(enc[1..].iter().all(|&b| b == 0));
        }
    }

    #[test]
    fn toy_reduction_hits_every_residue() {
        let g = GroupId::Toy23;
        let mut hits = [0u64; 11];
        for i in 0..10_000u32 {
            let s = hash_to_scalar(g, &i.to_le_bytes());
            hits[s.encode()[0] as usize] += 1;
        }
        assert!(hits.iter().all(|&h| h > 0), "degenerate reduction: {hits:?}");
    }

    #[test]
    fn hash_chain_basics() {
        let s = seed(1);
        assert_eq!(hash_chain(&s, 0), s);
        assert_eq!(hash_chain(&s, 3), chain_step(&chain_step(&chain_step(&s))));
        // composition law
        assert_eq!(hash_chain(&s, 5), hash_chain(&hash_chain(&s, 2), 3));
    }

    #[test]
    fn chain_table_bounds() {
        let s = seed(2);
        assert!(matches!(
            build_chain_table(&s, 16, 0),
            Err(KeyDeriveError::InvalidStride { .. })
        ));
        assert!(matches!(
            build_chain_table(&s, 16, 17),
            Err(KeyDeriveError::InvalidStride { .. })
        ));

        let t = build_chain_table(&s, 16, 4).unwrap();
        assert_eq!(t.anchor_count(), 4);
        assert_eq!(t.anchor_epochs().collect::<Vec<_>>(), vec![1, 5, 9, 13]);
        assert!(matches!(t.lookup(0), Err(KeyDeriveError::EpochOutOfRange { .. })));
        assert!(matches!(t.lookup(17), Err(KeyDeriveError::EpochOutOfRange { .. })));
    }

    fn lookup_cost(t: &ChainTable, epoch: u64) -> u64 {
        let before = metrics::snapshot();
        let _ = t.lookup(epoch).unwrap();
        (metrics::snapshot() - before).chain_step
    }

    #[test]
    fn chain_table_lookup_cost_and_value() {
        let s = seed(3);
        let t = build_chain_table(&s, 16, 4).unwrap();

        let expected_9 = hash_chain(&s, 8);
        let expected_7 = hash_chain(&s, 6);

        // anchor epochs cost zero hashes; epoch 7 sits two steps past anchor 5
        assert_eq!(lookup_cost(&t, 9), 0);
        assert_eq!(lookup_cost(&t, 7), 2);
        assert_eq!(t.lookup(9).unwrap(), expected_9);
        assert_eq!(t.lookup(7).unwrap(), expected_7);
    }

    #[test]
    fn chain_table_degenerate_strides() {
        let s = seed(4);
        let full = build_chain_table(&s, 8, 1).unwrap();
        assert_eq!(full.anchor_count(), 8);
        assert_eq!(lookup_cost(&full, 8), 0);

        let single = build_chain_table(&s, 8, 8).unwrap();
        assert_eq!(single.anchor_count(), 1);
        let expected = hash_chain(&s, 7);
        assert_eq!(lookup_cost(&single, 8), 7);
        assert_eq!(single.lookup(8).unwrap(), expected);
    }

    #[test]
    fn chain_table_matches_direct_chain_for_all_epochs() {
        let s = seed(5);
        for stride in [1u64, 2, 4, 8, 16, 32, 64] {
            let t = build_chain_table(&s, 64, stride).unwrap();
            for epoch in 1..=64 {
                assert_eq!(t.lookup(epoch).unwrap(), hash_chain(&s, epoch - 1));
            }
        }
    }
}
