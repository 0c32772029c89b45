//! Cross-cutting scheme contracts: unforgeability smoke, chain agreement
//! between signer and servers, and epoch monotonicity.

use lrsha_core::group::{exp, GroupId};
use lrsha_core::{flrsha, lrsha, SchemeParams, SchemeTag, Signature};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

#[test]
fn perturbed_signatures_are_rejected_10k() {
    let g = GroupId::Ristretto255;
    let params = SchemeParams::new(SchemeTag::Lrsha, g, 8, 2).unwrap();
    let mut rng = StdRng::seed_from_u64(200);
    let (mut signer, pk, secrets) = lrsha::keygen(&params, &mut rng);

    let msg = b"smoke target message";
    let sig = lrsha::sign(&mut signer, msg).unwrap();

    // A verifier resolves aggregates by the signature's own epoch, so the
    // harness must too — that lookup is what binds j.
    let aggregates: Vec<_> = (1..=8u64)
        .map(|epoch| {
            let bundles: Vec<_> =
                secrets.iter().map(|s| lrsha::server_commit(s, epoch).unwrap()).collect();
            lrsha::aggregate(&bundles, &pk).unwrap()
        })
        .collect();
    assert!(lrsha::verify(&pk, msg, &sig, &aggregates[0]));

    let baseline = sig.encode();
    let mut accepted = 0u32;
    for _ in 0..10_000 {
        let mut forged = baseline;
        // perturb a random field: s bytes, x bytes, or j bytes
        let pos = rng.gen_range(0..forged.len());
        let bit = 1u8 << rng.gen_range(0..8);
        forged[pos] ^= bit;
        let ok = Signature::decode(g, &forged)
            .map(|s| {
                aggregates
                    .get((s.epoch as usize).wrapping_sub(1))
                    .is_some_and(|r_agg| lrsha::verify(&pk, msg, &s, r_agg))
            })
            .unwrap_or(false);
        if ok {
            accepted += 1;
        }
    }
    assert_eq!(accepted, 0, "forged signatures accepted");
}

#[test]
fn signer_and_server_chains_agree_for_64_epochs() {
    // L = 1 makes the aggregate equal the single server's values, so chain
    // agreement is observable from the outside: the signer's scalar must be
    // the discrete log of the server's per-epoch key, every epoch.
    let g = GroupId::Toy23;
    let params = SchemeParams::new(SchemeTag::Flrsha, g, 64, 1).unwrap();
    let mut rng = StdRng::seed_from_u64(201);
    let (mut signer, _, mut secrets) = flrsha::keygen(&params, &mut rng);

    for epoch in 1..=64u64 {
        let (y_sum, r_sum, _) = flrsha::epoch_materials(&signer).unwrap();
        let bundle = flrsha::server_commit(&mut secrets[0], epoch).unwrap();
        assert_eq!(exp(&g.generator(), &y_sum), bundle.epoch_key, "epoch {epoch}");
        assert_eq!(exp(&g.generator(), &r_sum), bundle.commitment, "epoch {epoch}");
        if epoch < 64 {
            flrsha::update(&mut signer).unwrap();
        }
    }
}

#[test]
fn signer_epoch_never_decreases_across_restore() {
    let g = GroupId::Ristretto255;
    let params = SchemeParams::new(SchemeTag::Lrsha, g, 32, 2).unwrap();
    let mut rng = StdRng::seed_from_u64(202);
    let (mut signer, _, _) = lrsha::keygen(&params, &mut rng);

    let mut last = 0u64;
    for round in 0..10 {
        let sig = lrsha::sign(&mut signer, b"m").unwrap();
        assert!(sig.epoch > last);
        last = sig.epoch;
        if round % 3 == 2 {
            let payload = signer.payload_bytes();
            signer = lrsha::LrshaSignerKey::from_payload(g, &payload).unwrap();
        }
    }
}

#[test]
fn flrsha_signatures_bind_masks_to_epochs() {
    let g = GroupId::Ristretto255;
    let params = SchemeParams::new(SchemeTag::Flrsha, g, 8, 3).unwrap();
    let mut rng = StdRng::seed_from_u64(203);
    let (mut signer, _, _) = flrsha::keygen(&params, &mut rng);

    let mut masks = std::collections::HashSet::new();
    for _ in 0..8 {
        let sig = flrsha::sign(&mut signer, b"same message every time").unwrap();
        assert!(masks.insert(sig.mask), "mask reused across epochs");
    }
}

#[test]
fn large_nominal_config_keygen_completes() {
    // Nominal deployment shape: J = 2^20, L = 3. The toy backend keeps the
    // exponentiations cheap; the point is that key material, certification
    // trees and chain tables at this scale build and stay consistent.
    let g = GroupId::Toy23;
    let params = SchemeParams::new(SchemeTag::Flrsha, g, 1 << 20, 3).unwrap();
    let mut rng = StdRng::seed_from_u64(204);
    let (signer, vk, mut secrets) = flrsha::keygen(&params, &mut rng);

    assert_eq!(signer.servers(), 3);
    assert_eq!(vk.roots.len(), 3);
    // verifier key carries digests only
    assert_eq!(std::mem::size_of_val(&vk.params), std::mem::size_of::<SchemeParams>());

    for secret in &mut secrets {
        secret.build_chain_tables(1024).unwrap();
    }
    let bundle = flrsha::server_commit(&mut secrets[0], 524_288).unwrap();
    let mut rest: Vec<_> = secrets[1..]
        .iter_mut()
        .map(|s| flrsha::server_commit(s, 524_288).unwrap())
        .collect();
    let mut bundles = vec![bundle];
    bundles.append(&mut rest);
    assert!(flrsha::aggregate(&bundles, &vk).is_ok());
}
