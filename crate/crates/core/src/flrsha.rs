//! The `flrsha` scheme: the forward-secure variant.
//!
//! Signer and servers share per-server seed pairs (y_1^l, r_1^l) that both
//! sides evolve with a one-way hash chain. At epoch j a server derives a
//! one-time public key Y_j^l and commitment R_j^l from its chain values and
//! certifies the pair with a forward-secure certificate. The signer sums the
//! same chain values as scalars, signs exactly as in `lrsha` but under the
//! epoch key, and then advances its chains, destroying the old values. A
//! verifier therefore needs only the L certificate roots: every per-epoch
//! public key arrives from the servers, certified.

use rand::{CryptoRng, RngCore};

use crate::cert::{fsgn_check, fsgn_keygen, fsgn_sign, Certificate, FsCertState};
use crate::group::{elem_product, exp, scalar_sum, GroupElement, GroupId, Scalar};
use crate::keyderive::{
    build_chain_table, chain_step, hash_chain, prf_mask, seed_to_scalar, ChainTable, Seed,
};
use crate::merkle::Digest32;
use crate::params::SchemeParams;
use crate::sig::Signature;
use crate::SchemeError;

const COMMIT_DOMAIN: &[u8] = b"flrsha.v1.commit";

/// Signer secret: the current epoch's chain values for every server, and
/// nothing earlier.
pub struct FlrshaSignerKey {
    group: GroupId,
    y_chain: Vec<Seed>,
    r_chain: Vec<Seed>,
    epoch: u64,
    max_epochs: u64,
}

impl FlrshaSignerKey {
    pub fn group(&self) -> GroupId {
        self.group
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn max_epochs(&self) -> u64 {
        self.max_epochs
    }

    pub fn servers(&self) -> u16 {
        self.y_chain.len() as u16
    }

    pub fn remaining(&self) -> u64 {
        (self.max_epochs + 1).saturating_sub(self.epoch)
    }

    /// Current chain values, exposed for keygen-time consistency checks.
    pub fn chain_values(&self) -> (&[Seed], &[Seed]) {
        (&self.y_chain, &self.r_chain)
    }

    /// y seeds(32L) || r seeds(32L) || epoch(8 LE) || max_epochs(8 LE).
    pub fn payload_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 * self.y_chain.len() + 16);
        for seed in self.y_chain.iter().chain(&self.r_chain) {
            out.extend_from_slice(seed.as_bytes());
        }
        out.extend_from_slice(&self.epoch.to_le_bytes());
        out.extend_from_slice(&self.max_epochs.to_le_bytes());
        out
    }

    pub fn from_payload(group: GroupId, bytes: &[u8]) -> Result<Self, SchemeError> {
        if bytes.len() < 80 || (bytes.len() - 16) % 64 != 0 {
            return Err(SchemeError::Malformed("signer key payload length"));
        }
        let servers = (bytes.len() - 16) / 64;
        let read_seed = |i: usize| {
            let mut seed = [0u8; 32];
            seed.copy_from_slice(&bytes[32 * i..32 * (i + 1)]);
            Seed::from_bytes(seed)
        };
        let y_chain: Vec<Seed> = (0..servers).map(read_seed).collect();
        let r_chain: Vec<Seed> = (servers..2 * servers).map(read_seed).collect();
        let tail = &bytes[bytes.len() - 16..];
        let epoch = u64::from_le_bytes(tail[..8].try_into().unwrap());
        let max_epochs = u64::from_le_bytes(tail[8..].try_into().unwrap());
        if epoch < 1 || epoch > max_epochs + 1 || max_epochs < 1 {
            return Err(SchemeError::Malformed("signer key state"));
        }
        Ok(FlrshaSignerKey { group, y_chain, r_chain, epoch, max_epochs })
    }
}

/// Verifier key: parameters plus one certification root per server. Holds no
/// scalar secrets and, unlike `lrsha`, no aggregate public key — per-epoch
/// keys come from the servers.
#[derive(Clone)]
pub struct FlrshaVerifierKey {
    pub params: SchemeParams,
    pub roots: Vec<Digest32>,
}

/// Sealed server material: the epoch-1 seeds, the forward-secure
/// certification state, and optional chain tables bounding derivation cost.
pub struct FlrshaServerSecret {
    pub index: u16,
    pub fs_state: FsCertState,
    pub y_seed: Seed,
    pub r_seed: Seed,
    pub max_epochs: u64,
    chain_tables: Option<(ChainTable, ChainTable)>,
}

impl FlrshaServerSecret {
    pub fn new(
        index: u16,
        fs_state: FsCertState,
        y_seed: Seed,
        r_seed: Seed,
        max_epochs: u64,
    ) -> Self {
        FlrshaServerSecret { index, fs_state, y_seed, r_seed, max_epochs, chain_tables: None }
    }

    /// Precompute interleaved chain anchors so epoch derivation costs at most
    /// `stride - 1` hashes per chain instead of O(epoch).
    pub fn build_chain_tables(&mut self, stride: u64) -> Result<(), crate::keyderive::KeyDeriveError> {
        let y = build_chain_table(&self.y_seed, self.max_epochs, stride)?;
        let r = build_chain_table(&self.r_seed, self.max_epochs, stride)?;
        self.chain_tables = Some((y, r));
        Ok(())
    }

    pub fn has_chain_tables(&self) -> bool {
        self.chain_tables.is_some()
    }

    fn chain_values_at(&self, epoch: u64) -> (Seed, Seed) {
        match &self.chain_tables {
            Some((y, r)) => (y.lookup(epoch).unwrap(), r.lookup(epoch).unwrap()),
            None => (hash_chain(&self.y_seed, epoch - 1), hash_chain(&self.r_seed, epoch - 1)),
        }
    }
}

/// One server's certified answer for one epoch: the one-time public key, the
/// commitment, and a forward-secure certificate over the pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlrshaCommitmentBundle {
    pub server: u16,
    pub epoch: u64,
    pub epoch_key: GroupElement,
    pub commitment: GroupElement,
    pub certificate: Certificate,
}

impl FlrshaCommitmentBundle {
    /// server(2 LE) || epoch(8 LE) || Y(32) || R(32) || certificate.
    pub fn encode(&self) -> Vec<u8> {
        let cert = self.certificate.encode();
        let mut out = Vec::with_capacity(74 + cert.len());
        out.extend_from_slice(&self.server.to_le_bytes());
        out.extend_from_slice(&self.epoch.to_le_bytes());
        out.extend_from_slice(&self.epoch_key.encode());
        out.extend_from_slice(&self.commitment.encode());
        out.extend_from_slice(&cert);
        out
    }

    pub fn decode(group: GroupId, bytes: &[u8]) -> Result<Self, SchemeError> {
        if bytes.len() < 74 {
            return Err(SchemeError::Malformed("bundle truncated"));
        }
        let server = u16::from_le_bytes(bytes[..2].try_into().unwrap());
        let epoch = u64::from_le_bytes(bytes[2..10].try_into().unwrap());
        let epoch_key = group.element_from_bytes(bytes[10..42].try_into().unwrap())?;
        let commitment = group.element_from_bytes(bytes[42..74].try_into().unwrap())?;
        let certificate = Certificate::decode(group, &bytes[74..])?;
        Ok(FlrshaCommitmentBundle { server, epoch, epoch_key, commitment, certificate })
    }
}

/// The certified message: domain, server index, epoch, then Y and R exactly
/// as encoded in the bundle.
fn commit_binding(server: u16, epoch: u64, epoch_key: &GroupElement, commitment: &GroupElement) -> Vec<u8> {
    let mut msg = Vec::with_capacity(COMMIT_DOMAIN.len() + 2 + 8 + 64);
    msg.extend_from_slice(COMMIT_DOMAIN);
    msg.extend_from_slice(&server.to_le_bytes());
    msg.extend_from_slice(&epoch.to_le_bytes());
    msg.extend_from_slice(&epoch_key.encode());
    msg.extend_from_slice(&commitment.encode());
    msg
}

/// Generate the epoch-1 signer key, the verifier key (roots only), and one
/// sealed secret per server. Signer and server l share (y_1^l, r_1^l).
pub fn keygen<R: RngCore + CryptoRng>(
    params: &SchemeParams,
    rng: &mut R,
) -> (FlrshaSignerKey, FlrshaVerifierKey, Vec<FlrshaServerSecret>) {
    let group = params.group;
    let mut y_chain = Vec::with_capacity(params.servers as usize);
    let mut r_chain = Vec::with_capacity(params.servers as usize);
    let mut roots = Vec::with_capacity(params.servers as usize);
    let mut secrets = Vec::with_capacity(params.servers as usize);

    for index in 1..=params.servers {
        let (fs_state, root) = fsgn_keygen(group, params.max_epochs, rng);
        let y_seed = Seed::generate(rng);
        let r_seed = Seed::generate(rng);
        y_chain.push(y_seed.clone());
        r_chain.push(r_seed.clone());
        roots.push(root);
        secrets.push(FlrshaServerSecret::new(index, fs_state, y_seed, r_seed, params.max_epochs));
    }

    let signer =
        FlrshaSignerKey { group, y_chain, r_chain, epoch: 1, max_epochs: params.max_epochs };
    let verifier = FlrshaVerifierKey { params: *params, roots };
    (signer, verifier, secrets)
}

fn advance_chains(key: &mut FlrshaSignerKey) {
    for seed in key.y_chain.iter_mut().chain(key.r_chain.iter_mut()) {
        *seed = chain_step(seed);
    }
    key.epoch += 1;
}

/// Advance the signer one epoch, destroying the previous chain values.
/// Standalone updates stop at the last epoch; only `sign` may consume it.
pub fn update(key: &mut FlrshaSignerKey) -> Result<(), SchemeError> {
    if key.epoch >= key.max_epochs {
        return Err(SchemeError::StateExhausted { max_epochs: key.max_epochs });
    }
    advance_chains(key);
    Ok(())
}

/// The current epoch's signing material: aggregated key and nonce scalars
/// plus the one-time mask. The offline precompute path stores these.
pub fn epoch_materials(key: &FlrshaSignerKey) -> Result<(Scalar, Scalar, [u8; 32]), SchemeError> {
    if key.epoch > key.max_epochs {
        return Err(SchemeError::StateExhausted { max_epochs: key.max_epochs });
    }
    let group = key.group;
    let y_parts: Vec<Scalar> = key.y_chain.iter().map(|s| seed_to_scalar(group, s)).collect();
    let r_parts: Vec<Scalar> = key.r_chain.iter().map(|s| seed_to_scalar(group, s)).collect();
    let y_sum = scalar_sum(&y_parts).expect("at least one server");
    let r_sum = scalar_sum(&r_parts).expect("at least one server");
    let mask = prf_mask(&y_sum.encode(), key.epoch);
    Ok((y_sum, r_sum, mask))
}

/// Sign and advance: the epoch key evolves as part of every signature, so a
/// later break-in cannot reach this epoch again. No group exponentiations.
pub fn sign(key: &mut FlrshaSignerKey, msg: &[u8]) -> Result<Signature, SchemeError> {
    let (y_sum, r_sum, mask) = epoch_materials(key)?;
    sign_with_materials(key, msg, y_sum, r_sum, mask)
}

/// Sign using precomputed materials for the current epoch. State still
/// advances exactly as in `sign`, and the bytes match it exactly.
pub fn sign_with_materials(
    key: &mut FlrshaSignerKey,
    msg: &[u8],
    y_sum: Scalar,
    r_sum: Scalar,
    mask: [u8; 32],
) -> Result<Signature, SchemeError> {
    if key.epoch > key.max_epochs {
        return Err(SchemeError::StateExhausted { max_epochs: key.max_epochs });
    }
    let e = challenge_hash(key.group, msg, &mask);
    let s = r_sum.mulsub(&e, &y_sum);
    let epoch = key.epoch;
    advance_chains(key);
    Ok(Signature { s, mask, epoch })
}

fn challenge_hash(group: GroupId, msg: &[u8], mask: &[u8; 32]) -> Scalar {
    let mut buf = Vec::with_capacity(msg.len() + 32);
    buf.extend_from_slice(msg);
    buf.extend_from_slice(mask);
    crate::keyderive::hash_to_scalar(group, &buf)
}

/// Server side: derive the one-time key pair for `epoch` and certify it.
/// The live path signs certificates in epoch order; serving an epoch below
/// the certification state yields `EpochExpired`.
pub fn server_commit(
    secret: &mut FlrshaServerSecret,
    epoch: u64,
) -> Result<FlrshaCommitmentBundle, SchemeError> {
    if epoch < 1 || epoch > secret.max_epochs {
        return Err(SchemeError::EpochOutOfRange { epoch, max_epochs: secret.max_epochs });
    }
    let group = secret.fs_state.group();
    let (y_value, r_value) = secret.chain_values_at(epoch);
    let epoch_key = exp(&group.generator(), &seed_to_scalar(group, &y_value));
    let commitment = exp(&group.generator(), &seed_to_scalar(group, &r_value));
    let binding = commit_binding(secret.index, epoch, &epoch_key, &commitment);
    let certificate = fsgn_sign(&mut secret.fs_state, epoch, &binding)?;
    Ok(FlrshaCommitmentBundle { server: secret.index, epoch, epoch_key, commitment, certificate })
}

/// Check one bundle's forward-secure certificate against its server's root.
pub fn check_bundle(vk: &FlrshaVerifierKey, bundle: &FlrshaCommitmentBundle) -> Result<(), SchemeError> {
    if bundle.server < 1 || bundle.server > vk.params.servers {
        return Err(SchemeError::MissingServer { server: bundle.server });
    }
    let binding =
        commit_binding(bundle.server, bundle.epoch, &bundle.epoch_key, &bundle.commitment);
    fsgn_check(&vk.roots[(bundle.server - 1) as usize], bundle.epoch, &binding, &bundle.certificate)
        .map_err(|_| SchemeError::CertFailure { server: bundle.server })
}

/// Verify every certificate and aggregate both products (Y_agg, R_agg).
pub fn aggregate(
    bundles: &[FlrshaCommitmentBundle],
    vk: &FlrshaVerifierKey,
) -> Result<(GroupElement, GroupElement), SchemeError> {
    let servers = vk.params.servers as usize;
    if bundles.len() > servers {
        return Err(SchemeError::Malformed("more bundles than servers"));
    }
    let mut slots: Vec<Option<&FlrshaCommitmentBundle>> = vec![None; servers];
    for b in bundles {
        if b.server >= 1 && (b.server as usize) <= servers {
            let slot = &mut slots[(b.server - 1) as usize];
            if slot.is_none() {
                *slot = Some(b);
            }
        }
    }
    if let Some(gap) = slots.iter().position(|s| s.is_none()) {
        return Err(SchemeError::MissingServer { server: gap as u16 + 1 });
    }

    let epoch = slots[0].unwrap().epoch;
    for bundle in slots.iter().map(|s| s.unwrap()) {
        if bundle.epoch != epoch {
            return Err(SchemeError::EpochMismatch { expected: epoch, found: bundle.epoch });
        }
        check_bundle(vk, bundle)?;
    }

    let keys: Vec<GroupElement> = slots.iter().map(|s| s.unwrap().epoch_key).collect();
    let commitments: Vec<GroupElement> = slots.iter().map(|s| s.unwrap().commitment).collect();
    Ok((elem_product(&keys)?, elem_product(&commitments)?))
}

/// Online verification against the aggregates for `sig.epoch`.
pub fn check(
    vk: &FlrshaVerifierKey,
    msg: &[u8],
    sig: &Signature,
    y_agg: &GroupElement,
    r_agg: &GroupElement,
) -> Result<(), SchemeError> {
    if sig.epoch < 1 || sig.epoch > vk.params.max_epochs {
        return Err(SchemeError::EpochOutOfRange {
            epoch: sig.epoch,
            max_epochs: vk.params.max_epochs,
        });
    }
    let e = challenge_hash(vk.params.group, msg, &sig.mask);
    if crate::group::verify_eq(r_agg, &sig.s, y_agg, &e) {
        Ok(())
    } else {
        Err(SchemeError::BadSignatureEq)
    }
}

pub fn verify(
    vk: &FlrshaVerifierKey,
    msg: &[u8],
    sig: &Signature,
    y_agg: &GroupElement,
    r_agg: &GroupElement,
) -> bool {
    check(vk, msg, sig, y_agg, r_agg).is_ok()
}
