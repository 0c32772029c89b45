//! Commitment certification.
//!
//! Commitment servers sign everything they serve so a verifier can attribute
//! a bad commitment to the server that produced it. Two certificate schemes:
//!
//! - Plain: a Schnorr signature (challenge e, response s) under a long-lived
//!   certification key. Used by `lrsha`.
//! - Forward-secure: per-epoch Schnorr keys whose secrets come from a one-way
//!   seed chain, with all J epoch public keys committed in a Merkle tree.
//!   The verifier holds only the root; each certificate carries the epoch
//!   key and its authentication path. Advancing the state destroys earlier
//!   epoch secrets. Used by `flrsha`.
//!
//! Certificates are deterministic (derandomized nonces), so re-issuing one
//! for the same epoch and message is byte-identical — servers rely on this
//! to serve repeat requests from cache or cold equivalently.

use rand::{CryptoRng, RngCore};
use zeroize::Zeroize;

use crate::group::{exp, GroupElement, GroupId, Scalar};
use crate::keyderive::{chain_step, hash_chain, seed_to_scalar, tagged_sha256, Seed};
use crate::merkle::{verify_path, Digest32, MerkleTree};

const TAG_CERT_NONCE: &[u8] = b"lrsha.v1.cert.nonce";
const TAG_CERT_CHALLENGE: &[u8] = b"lrsha.v1.cert.challenge";
const TAG_FS_LEAF: &[u8] = b"lrsha.v1.fs.leaf";

#[derive(Debug, thiserror::Error, Clone, Copy, PartialEq, Eq)]
pub enum CertError {
    #[error("epoch {requested} expired; state already at {current}")]
    EpochExpired { requested: u64, current: u64 },
    #[error("epoch {epoch} outside [1, {max_epochs}]")]
    EpochOutOfRange { epoch: u64, max_epochs: u64 },
    #[error("certificate scheme tag does not match")]
    WrongScheme,
    #[error("certificate epoch does not match")]
    EpochMismatch,
    #[error("malformed certificate: {0}")]
    Malformed(&'static str),
    #[error("merkle path does not authenticate the epoch key")]
    PathInvalid,
    #[error("schnorr equation check failed")]
    BadSignature,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CertScheme {
    Plain,
    ForwardSecure,
}

impl CertScheme {
    fn code(self) -> u8 {
        match self {
            CertScheme::Plain => 1,
            CertScheme::ForwardSecure => 2,
        }
    }

    fn from_code(code: u8) -> Result<Self, CertError> {
        match code {
            1 => Ok(CertScheme::Plain),
            2 => Ok(CertScheme::ForwardSecure),
            _ => Err(CertError::Malformed("scheme tag")),
        }
    }
}

/// Long-lived certification keypair for the plain scheme.
#[derive(Clone)]
pub struct CertKeypair {
    secret: Scalar,
    public: GroupElement,
}

impl CertKeypair {
    pub fn public(&self) -> &GroupElement {
        &self.public
    }

    /// Canonical secret bytes, for sealed persistence only.
    pub fn secret_bytes(&self) -> [u8; 32] {
        self.secret.encode()
    }

    pub fn from_secret_bytes(group: GroupId, bytes: &[u8; 32]) -> Result<Self, CertError> {
        let secret = group
            .scalar_from_bytes(bytes)
            .map_err(|_| CertError::Malformed("secret scalar"))?;
        let public = exp(&group.generator(), &secret);
        Ok(CertKeypair { secret, public })
    }
}

/// A certificate over a server commitment.
///
/// Byte layout: tag(1) || epoch(8 LE, zero for plain) || e(32) || s(32) ||
/// path-length(2 LE) || path nodes(32 each). For the forward-secure scheme
/// the first path node is the encoded epoch public key — (e, s) alone cannot
/// authenticate it — followed by the Merkle sibling path bottom-up.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate {
    pub scheme: CertScheme,
    pub epoch: u64,
    pub challenge: Scalar,
    pub response: Scalar,
    pub epoch_key: Option<GroupElement>,
    pub path: Vec<Digest32>,
}

impl Certificate {
    /// Merkle sibling path (forward-secure certificates only).
    pub fn merkle_path(&self) -> &[Digest32] {
        &self.path
    }

    pub fn encode(&self) -> Vec<u8> {
        let node_count = usize::from(self.epoch_key.is_some()) + self.path.len();
        let mut out = Vec::with_capacity(1 + 8 + 32 + 32 + 2 + 32 * node_count);
        out.push(self.scheme.code());
        out.extend_from_slice(&self.epoch.to_le_bytes());
        out.extend_from_slice(&self.challenge.encode());
        out.extend_from_slice(&self.response.encode());
        out.extend_from_slice(&(node_count as u16).to_le_bytes());
        if let Some(pk) = &self.epoch_key {
            out.extend_from_slice(&pk.encode());
        }
        for node in &self.path {
            out.extend_from_slice(node);
        }
        out
    }

    pub fn decode(group: GroupId, bytes: &[u8]) -> Result<Self, CertError> {
        if bytes.len() < 75 {
            return Err(CertError::Malformed("truncated"));
        }
        let scheme = CertScheme::from_code(bytes[0])?;
        let epoch = u64::from_le_bytes(bytes[1..9].try_into().unwrap());
        let challenge = group
            .scalar_from_bytes(bytes[9..41].try_into().unwrap())
            .map_err(|_| CertError::Malformed("challenge scalar"))?;
        let response = group
            .scalar_from_bytes(bytes[41..73].try_into().unwrap())
            .map_err(|_| CertError::Malformed("response scalar"))?;
        let node_count = usize::from(u16::from_le_bytes(bytes[73..75].try_into().unwrap()));
        let rest = &bytes[75..];
        if rest.len() != node_count * 32 {
            return Err(CertError::Malformed("path length"));
        }
        let (epoch_key, path_nodes) = match scheme {
            CertScheme::Plain => {
                if epoch != 0 || node_count != 0 {
                    return Err(CertError::Malformed("plain certificate shape"));
                }
                (None, rest)
            }
            CertScheme::ForwardSecure => {
                if node_count == 0 {
                    return Err(CertError::Malformed("missing epoch key"));
                }
                let pk = group
                    .element_from_bytes(rest[..32].try_into().unwrap())
                    .map_err(|_| CertError::Malformed("epoch key"))?;
                (Some(pk), &rest[32..])
            }
        };
        let path = path_nodes
            .chunks_exact(32)
            .map(|c| {
                let mut node = [0u8; 32];
                node.copy_from_slice(c);
                node
            })
            .collect();
        Ok(Certificate { scheme, epoch, challenge, response, epoch_key, path })
    }
}

fn challenge(
    group: GroupId,
    commitment: &GroupElement,
    public: &GroupElement,
    epoch: u64,
    msg: &[u8],
) -> Scalar {
    let wide = crate::keyderive::tagged_sha512(
        TAG_CERT_CHALLENGE,
        &[&commitment.encode(), &public.encode(), &epoch.to_le_bytes(), msg],
    );
    group.scalar_reduce_wide(&wide)
}

fn schnorr_sign(
    group: GroupId,
    secret: &Scalar,
    public: &GroupElement,
    epoch: u64,
    msg: &[u8],
) -> (Scalar, Scalar) {
    // Derandomized nonce keyed on the epoch secret and message.
    let wide = crate::keyderive::tagged_sha512(
        TAG_CERT_NONCE,
        &[&secret.encode(), &epoch.to_le_bytes(), msg],
    );
    let nonce = group.scalar_reduce_wide(&wide);
    let commitment = exp(&group.generator(), &nonce);
    let e = challenge(group, &commitment, public, epoch, msg);
    let s = nonce.mulsub(&e, secret);
    (e, s)
}

fn schnorr_check(
    group: GroupId,
    public: &GroupElement,
    epoch: u64,
    msg: &[u8],
    e: &Scalar,
    s: &Scalar,
) -> Result<(), CertError> {
    let recovered = exp(&group.generator(), s).mul(&exp(public, e));
    if challenge(group, &recovered, public, epoch, msg) == *e {
        Ok(())
    } else {
        Err(CertError::BadSignature)
    }
}

/// Fresh certification keypair.
pub fn sgn_keygen<R: RngCore + CryptoRng>(group: GroupId, rng: &mut R) -> CertKeypair {
    let secret = group.random_scalar(rng);
    let public = exp(&group.generator(), &secret);
    CertKeypair { secret, public }
}

pub fn sgn_sign(kp: &CertKeypair, msg: &[u8]) -> Certificate {
    let group = kp.secret.group();
    let (challenge, response) = schnorr_sign(group, &kp.secret, &kp.public, 0, msg);
    Certificate {
        scheme: CertScheme::Plain,
        epoch: 0,
        challenge,
        response,
        epoch_key: None,
        path: Vec::new(),
    }
}

pub fn sgn_check(pk: &GroupElement, msg: &[u8], cert: &Certificate) -> Result<(), CertError> {
    if cert.scheme != CertScheme::Plain {
        return Err(CertError::WrongScheme);
    }
    schnorr_check(pk.group(), pk, 0, msg, &cert.challenge, &cert.response)
}

pub fn sgn_verify(pk: &GroupElement, msg: &[u8], cert: &Certificate) -> bool {
    sgn_check(pk, msg, cert).is_ok()
}

/// Signer-side state of the forward-secure certification scheme.
///
/// `current` is the chain value for `epoch`; nothing earlier is derivable
/// from it. Epoch advancement is single-writer; the Merkle tree is public
/// material and safe to read concurrently.
pub struct FsCertState {
    group: GroupId,
    current: Seed,
    epoch: u64,
    max_epochs: u64,
    tree: MerkleTree,
}

impl FsCertState {
    pub fn group(&self) -> GroupId {
        self.group
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn max_epochs(&self) -> u64 {
        self.max_epochs
    }

    pub fn root(&self) -> Digest32 {
        self.tree.root()
    }

    pub fn tree(&self) -> &MerkleTree {
        &self.tree
    }

    /// The chain value for the current epoch. At epoch 1 this is the initial
    /// seed the whole state can be rebuilt from; sealed persistence only.
    pub fn chain_seed(&self) -> &Seed {
        &self.current
    }

    /// Serialize for sealed persistence: group(1) || epoch(8) || max(8) ||
    /// current seed(32) || leaf count(8) || leaves. Contains the current
    /// chain value and public material only — no earlier epoch secrets.
    pub fn to_bytes(&self) -> Vec<u8> {
        let leaves = self.tree.leaves();
        let mut out = Vec::with_capacity(57 + 32 * leaves.len());
        out.push(self.group.code());
        out.extend_from_slice(&self.epoch.to_le_bytes());
        out.extend_from_slice(&self.max_epochs.to_le_bytes());
        out.extend_from_slice(self.current.as_bytes());
        out.extend_from_slice(&(leaves.len() as u64).to_le_bytes());
        for leaf in leaves {
            out.extend_from_slice(leaf);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CertError> {
        if bytes.len() < 57 {
            return Err(CertError::Malformed("fs state truncated"));
        }
        let group = GroupId::from_code(bytes[0]).map_err(|_| CertError::Malformed("group id"))?;
        let epoch = u64::from_le_bytes(bytes[1..9].try_into().unwrap());
        let max_epochs = u64::from_le_bytes(bytes[9..17].try_into().unwrap());
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&bytes[17..49]);
        let leaf_count = u64::from_le_bytes(bytes[49..57].try_into().unwrap()) as usize;
        let rest = &bytes[57..];
        if rest.len() != leaf_count * 32 || leaf_count == 0 {
            return Err(CertError::Malformed("fs state leaves"));
        }
        let leaves = rest
            .chunks_exact(32)
            .map(|c| {
                let mut leaf = [0u8; 32];
                leaf.copy_from_slice(c);
                leaf
            })
            .collect();
        let current = Seed::from_bytes(seed);
        seed.zeroize();
        Ok(FsCertState { group, current, epoch, max_epochs, tree: MerkleTree::from_leaves(leaves) })
    }
}

fn fs_leaf(epoch: u64, pk: &GroupElement) -> Digest32 {
    tagged_sha256(TAG_FS_LEAF, &[&epoch.to_le_bytes(), &pk.encode()])
}

fn fs_epoch_keypair(group: GroupId, chain_value: &Seed) -> (Scalar, GroupElement) {
    let secret = seed_to_scalar(group, chain_value);
    let public = exp(&group.generator(), &secret);
    (secret, public)
}

/// Generate a forward-secure certification key for `max_epochs` epochs.
/// The verifier-side key is the single Merkle root.
pub fn fsgn_keygen<R: RngCore + CryptoRng>(
    group: GroupId,
    max_epochs: u64,
    rng: &mut R,
) -> (FsCertState, Digest32) {
    fsgn_keygen_from_seed(group, max_epochs, Seed::generate(rng))
}

/// Deterministically rebuild the epoch-1 state from a stored chain seed.
/// Provisioned servers use this to reconstruct their tree from the sealed
/// blob; the root always matches the one the ceremony published.
pub fn fsgn_keygen_from_seed(group: GroupId, max_epochs: u64, initial: Seed) -> (FsCertState, Digest32) {
    assert!(max_epochs >= 1, "need at least one epoch");
    let mut leaves = Vec::with_capacity(max_epochs as usize);
    let mut cur = initial.clone();
    for epoch in 1..=max_epochs {
        let (_, pk) = fs_epoch_keypair(group, &cur);
        leaves.push(fs_leaf(epoch, &pk));
        if epoch < max_epochs {
            cur = chain_step(&cur);
        }
    }
    let tree = MerkleTree::from_leaves(leaves);
    let root = tree.root();
    (FsCertState { group, current: initial, epoch: 1, max_epochs, tree }, root)
}

/// Issue a certificate for `epoch`, advancing the state to it. Epochs below
/// the current state are gone for good and yield `EpochExpired`; re-signing
/// at exactly the current epoch is allowed and deterministic.
pub fn fsgn_sign(state: &mut FsCertState, epoch: u64, msg: &[u8]) -> Result<Certificate, CertError> {
    if epoch < 1 || epoch > state.max_epochs {
        return Err(CertError::EpochOutOfRange { epoch, max_epochs: state.max_epochs });
    }
    if epoch < state.epoch {
        return Err(CertError::EpochExpired { requested: epoch, current: state.epoch });
    }
    if epoch > state.epoch {
        state.current = hash_chain(&state.current, epoch - state.epoch);
        state.epoch = epoch;
    }
    let (secret, public) = fs_epoch_keypair(state.group, &state.current);
    let (challenge, response) = schnorr_sign(state.group, &secret, &public, epoch, msg);
    Ok(Certificate {
        scheme: CertScheme::ForwardSecure,
        epoch,
        challenge,
        response,
        epoch_key: Some(public),
        path: state.tree.path((epoch - 1) as usize),
    })
}

pub fn fsgn_check(
    root: &Digest32,
    epoch: u64,
    msg: &[u8],
    cert: &Certificate,
) -> Result<(), CertError> {
    if cert.scheme != CertScheme::ForwardSecure {
        return Err(CertError::WrongScheme);
    }
    if cert.epoch != epoch || epoch < 1 {
        return Err(CertError::EpochMismatch);
    }
    let pk = cert.epoch_key.as_ref().ok_or(CertError::Malformed("missing epoch key"))?;
    let leaf = fs_leaf(epoch, pk);
    if !verify_path(root, epoch - 1, &leaf, &cert.path) {
        return Err(CertError::PathInvalid);
    }
    schnorr_check(pk.group(), pk, epoch, msg, &cert.challenge, &cert.response)
}

pub fn fsgn_verify(root: &Digest32, epoch: u64, msg: &[u8], cert: &Certificate) -> bool {
    fsgn_check(root, epoch, msg, cert).is_ok()
}
