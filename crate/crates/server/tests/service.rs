//! Behavior tests for the commitment service: provisioning, batch serving,
//! cache equivalence, restart determinism, and keystore hermeticity.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use lrsha_core::descriptor::{DeploymentDescriptor, ServerEntry};
use lrsha_core::group::GroupId;
use lrsha_core::wire::{WireOp, WireRequest};
use lrsha_core::{flrsha, lrsha, SchemeParams, SchemeTag};
use lrsha_server::keystore::{BlobMaterial, KeystoreBackend, KeystoreError, ServerSecretBlob};
use lrsha_server::service::{CommitmentService, ServeError, ServerConfig};

struct LrshaFixture {
    params: SchemeParams,
    signer: lrsha::LrshaSignerKey,
    public: lrsha::LrshaPublicKey,
    blobs: Vec<(ServerSecretBlob, [u8; 32], [u8; 32])>, // blob + (seed, cert secret) copies for scans
}

fn lrsha_fixture(seed: u64, servers: u16, max_epochs: u64) -> LrshaFixture {
    let params =
        SchemeParams::new(SchemeTag::Lrsha, GroupId::Ristretto255, max_epochs, servers).unwrap();
    let mut rng = StdRng::seed_from_u64(seed);
    let (signer, public, secrets) = lrsha::keygen(&params, &mut rng);
    let blobs = secrets
        .iter()
        .map(|s| {
            let seed_copy = *s.seed.as_bytes();
            let cert_copy = s.cert.secret_bytes();
            (
                ServerSecretBlob {
                    scheme: SchemeTag::Lrsha,
                    group: params.group,
                    index: s.index,
                    max_epochs,
                    material: BlobMaterial::Lrsha {
                        cert_secret: s.cert.secret_bytes(),
                        seed: s.seed.clone(),
                    },
                },
                seed_copy,
                cert_copy,
            )
        })
        .collect();
    LrshaFixture { params, signer, public, blobs }
}

fn service_for(blob: ServerSecretBlob, scheme: SchemeTag) -> CommitmentService {
    let service = CommitmentService::new(ServerConfig::new(scheme, blob.index));
    service.provision(blob).unwrap();
    service
}

#[test]
fn provision_is_one_shot_and_scheme_checked() {
    let fx = lrsha_fixture(1, 1, 8);
    let (blob, ..) = &fx.blobs[0];
    let service = CommitmentService::new(ServerConfig::new(SchemeTag::Lrsha, 1));
    assert!(matches!(service.serve_commitment(1), Err(ServeError::NotProvisioned)));

    let reload = ServerSecretBlob::from_parts_roundtrip(blob);
    service.provision(reload).unwrap();
    let again = ServerSecretBlob::from_parts_roundtrip(blob);
    assert!(matches!(service.provision(again), Err(KeystoreError::AlreadyProvisioned)));

    // lrsha blob into a flrsha-configured server
    let wrong = CommitmentService::new(ServerConfig::new(SchemeTag::Flrsha, 1));
    let blob2 = ServerSecretBlob::from_parts_roundtrip(blob);
    assert!(matches!(wrong.provision(blob2), Err(KeystoreError::MalformedSecret(_))));
}

/// Rebuild a blob from its payload bytes, standing in for a file round trip.
trait BlobClone {
    fn from_parts_roundtrip(&self) -> ServerSecretBlob;
}
impl BlobClone for ServerSecretBlob {
    fn from_parts_roundtrip(&self) -> ServerSecretBlob {
        let header = lrsha_server::FileHeader {
            magic: lrsha_server::MAGIC_SERVER_SECRET,
            backend: KeystoreBackend::Sealed,
            scheme: self.scheme,
            group: self.group,
            aux: self.index,
        };
        ServerSecretBlob::from_parts(&header, &self.payload_bytes()).unwrap()
    }
}

#[test]
fn serving_is_deterministic_and_verifies() {
    let fx = lrsha_fixture(2, 3, 16);
    let services: Vec<_> = fx
        .blobs
        .iter()
        .map(|(b, ..)| service_for(b.from_parts_roundtrip(), SchemeTag::Lrsha))
        .collect();

    for epoch in [1u64, 7, 16] {
        let first: Vec<_> =
            services.iter().map(|s| s.serve_commitment(epoch).unwrap()).collect();
        let second: Vec<_> =
            services.iter().map(|s| s.serve_commitment(epoch).unwrap()).collect();
        assert_eq!(first, second, "byte-identical repeated serves");

        let bundles: Vec<_> = first
            .iter()
            .map(|b| lrsha::CommitmentBundle::decode(fx.params.group, b).unwrap())
            .collect();
        assert!(lrsha::aggregate(&bundles, &fx.public).is_ok());
    }

    assert!(matches!(
        services[0].serve_commitment(0),
        Err(ServeError::EpochOutOfRange { epoch: 0, .. })
    ));
    assert!(matches!(
        services[0].serve_commitment(17),
        Err(ServeError::EpochOutOfRange { epoch: 17, .. })
    ));
}

#[test]
fn batch_matches_single_and_respects_limits() {
    let fx = lrsha_fixture(3, 1, 64);
    let (blob, ..) = &fx.blobs[0];
    let mut config = ServerConfig::new(SchemeTag::Lrsha, 1);
    config.max_batch = 64;
    let service = CommitmentService::new(config);
    service.provision(blob.from_parts_roundtrip()).unwrap();

    let single = service.serve_commitment(5).unwrap();
    assert_eq!(service.serve_batch(5, 5).unwrap(), vec![single]);

    let all = service.serve_batch(1, 64).unwrap();
    assert_eq!(all.len(), 64);
    for (i, raw) in all.iter().enumerate() {
        let bundle = lrsha::CommitmentBundle::decode(fx.params.group, raw).unwrap();
        assert_eq!(bundle.epoch, i as u64 + 1);
        assert!(lrsha::aggregate(&[bundle], &fx.public).is_ok());
    }

    assert!(matches!(
        service.serve_batch(1, 66),
        Err(ServeError::RangeTooLarge { requested: 66, max_batch: 64 })
    ));
    assert!(matches!(service.serve_batch(9, 3), Err(ServeError::BadRequest(_))));
}

#[test]
fn precompute_hits_cache_with_identical_bytes() {
    let fx = lrsha_fixture(4, 1, 128);
    let (blob, ..) = &fx.blobs[0];
    let cold_service = service_for(blob.from_parts_roundtrip(), SchemeTag::Lrsha);
    let warm_service = service_for(blob.from_parts_roundtrip(), SchemeTag::Lrsha);

    let stats = warm_service.precompute(1, 100).unwrap();
    assert_eq!(stats.bundles, 100);
    assert!(stats.bytes <= stats.budget);

    let before = warm_service.cache_stats();
    let warm = warm_service.serve_commitment(50).unwrap();
    let after = warm_service.cache_stats();
    assert_eq!(after.hits, before.hits + 1, "cache hit recorded");
    assert_eq!(warm, cold_service.serve_commitment(50).unwrap(), "cache equals cold path");

    // a thousand random epochs, cached and cold agree byte for byte
    let mut rng = StdRng::seed_from_u64(99);
    for _ in 0..1000 {
        let epoch = rng.gen_range(1..=100u64);
        assert_eq!(
            warm_service.serve_commitment(epoch).unwrap(),
            cold_service.serve_commitment(epoch).unwrap()
        );
    }
}

#[test]
fn precompute_budget_is_enforced() {
    let fx = lrsha_fixture(5, 1, 8);
    let (blob, ..) = &fx.blobs[0];
    let mut config = ServerConfig::new(SchemeTag::Lrsha, 1);
    config.cache_budget = 10; // smaller than any bundle
    let service = CommitmentService::new(config);
    service.provision(blob.from_parts_roundtrip()).unwrap();
    assert!(matches!(service.precompute(1, 1), Err(ServeError::BudgetExceeded { .. })));
    assert_eq!(service.cache_stats().bundles, 0);
}

#[test]
fn restart_reserves_identical_bundles() {
    let dir = tempfile::tempdir().unwrap();
    let fx = lrsha_fixture(6, 1, 32);
    let (blob, ..) = &fx.blobs[0];
    let keystore_path = dir.path().join("server-1.keystore");
    let cache_path = dir.path().join("server-1.cache");
    blob.write(&keystore_path, KeystoreBackend::Sealed, None).unwrap();

    let first = service_for(ServerSecretBlob::read(&keystore_path, None).unwrap(), SchemeTag::Lrsha);
    first.precompute(1, 32).unwrap();
    first.save_cache(&cache_path).unwrap();
    let served: Vec<_> = (1..=32).map(|j| first.serve_commitment(j).unwrap()).collect();
    drop(first);

    let second =
        service_for(ServerSecretBlob::read(&keystore_path, None).unwrap(), SchemeTag::Lrsha);
    second.load_cache(&cache_path).unwrap();
    for (i, bundle) in served.iter().enumerate() {
        assert_eq!(&second.serve_commitment(i as u64 + 1).unwrap(), bundle);
    }
}

#[test]
fn flrsha_live_path_and_cache_cover_out_of_order_fetches() {
    let params = SchemeParams::new(SchemeTag::Flrsha, GroupId::Ristretto255, 16, 1).unwrap();
    let mut rng = StdRng::seed_from_u64(7);
    let (_, vk, secrets) = flrsha::keygen(&params, &mut rng);
    let blob = ServerSecretBlob {
        scheme: SchemeTag::Flrsha,
        group: params.group,
        index: 1,
        max_epochs: 16,
        material: BlobMaterial::Flrsha {
            cert_seed: secrets[0].fs_state.chain_seed().clone(),
            y_seed: secrets[0].y_seed.clone(),
            r_seed: secrets[0].r_seed.clone(),
        },
    };

    // live path: epochs must be served in order
    let live = service_for(blob.from_parts_roundtrip(), SchemeTag::Flrsha);
    let b9 = live.serve_commitment(9).unwrap();
    let decoded = flrsha::FlrshaCommitmentBundle::decode(params.group, &b9).unwrap();
    assert!(flrsha::aggregate(&[decoded], &vk).is_ok(), "rebuilt root must match ceremony root");
    assert!(matches!(
        live.serve_commitment(3),
        Err(ServeError::EpochExpired { requested: 3, current: 9 })
    ));

    // batch path: precompute makes the whole range randomly accessible
    let cached = service_for(blob.from_parts_roundtrip(), SchemeTag::Flrsha);
    cached.precompute(1, 16).unwrap();
    for epoch in [9u64, 3, 16, 1] {
        let raw = cached.serve_commitment(epoch).unwrap();
        let bundle = flrsha::FlrshaCommitmentBundle::decode(params.group, &raw).unwrap();
        assert_eq!(bundle.epoch, epoch);
        assert!(flrsha::aggregate(&[bundle], &vk).is_ok());
    }
}

#[test]
fn tampered_seed_still_certifies_but_fails_aggregate_verification() {
    // A server whose commitment seed was corrupted before provisioning still
    // produces well-certified bundles; detection happens at the signature
    // equation, not the certificate check.
    let fx = lrsha_fixture(8, 2, 8);
    let (good_blob_1, ..) = &fx.blobs[0];
    let (good_blob_2, ..) = &fx.blobs[1];

    let mut payload = good_blob_2.payload_bytes();
    payload[45] ^= 0xFF; // inside the PRF seed
    let header = lrsha_server::FileHeader {
        magic: lrsha_server::MAGIC_SERVER_SECRET,
        backend: KeystoreBackend::Sealed,
        scheme: SchemeTag::Lrsha,
        group: fx.params.group,
        aux: 2,
    };
    let bad_blob = ServerSecretBlob::from_parts(&header, &payload).unwrap();

    let s1 = service_for(good_blob_1.from_parts_roundtrip(), SchemeTag::Lrsha);
    let s2 = service_for(bad_blob, SchemeTag::Lrsha);

    let mut signer = fx.signer;
    let sig = lrsha::sign(&mut signer, b"postcard").unwrap();
    let bundles: Vec<_> = [s1.serve_commitment(1).unwrap(), s2.serve_commitment(1).unwrap()]
        .iter()
        .map(|b| lrsha::CommitmentBundle::decode(fx.params.group, b).unwrap())
        .collect();

    // certificates are fine: the server signed what it derived
    let r_agg = lrsha::aggregate(&bundles, &fx.public).expect("certificates verify");
    // but the aggregate no longer matches the signer's nonce sum
    assert!(!lrsha::verify(&fx.public, b"postcard", &sig, &r_agg));
}

#[test]
fn keystore_hermeticity_no_secret_bytes_in_any_output() {
    let dir = tempfile::tempdir().unwrap();
    let fx = lrsha_fixture(9, 2, 32);

    for (blob, seed_copy, cert_copy) in &fx.blobs {
        let service = service_for(blob.from_parts_roundtrip(), SchemeTag::Lrsha);
        service.precompute(1, 32).unwrap();
        let cache_path = dir.path().join(format!("cache-{}", blob.index));
        service.save_cache(&cache_path).unwrap();

        let mut outputs: Vec<Vec<u8>> = Vec::new();
        for epoch in 1..=32 {
            outputs.push(service.serve_commitment(epoch).unwrap());
        }
        outputs.push(serde_json::to_vec(&service.status()).unwrap());
        outputs.push(std::fs::read(&cache_path).unwrap());
        let req = WireRequest { v: 1, scheme: SchemeTag::Lrsha, server: blob.index, op: WireOp::Status };
        outputs.push(serde_json::to_vec(&service.handle(&req)).unwrap());

        for (i, out) in outputs.iter().enumerate() {
            assert!(
                !out.windows(32).any(|w| w == seed_copy),
                "seed bytes leaked into output {i}"
            );
            assert!(
                !out.windows(32).any(|w| w == cert_copy),
                "cert secret bytes leaked into output {i}"
            );
        }
    }
}

#[test]
fn wire_handle_validates_identity_and_reports_faults() {
    let fx = lrsha_fixture(10, 1, 8);
    let (blob, ..) = &fx.blobs[0];
    let service = service_for(blob.from_parts_roundtrip(), SchemeTag::Lrsha);

    let ok = service.handle(&WireRequest::get(SchemeTag::Lrsha, 1, 3));
    assert!(ok.bundles.is_some());

    let wrong_scheme = service.handle(&WireRequest::get(SchemeTag::Flrsha, 1, 3));
    assert_eq!(wrong_scheme.error.unwrap().code, "BadRequest");
    let wrong_server = service.handle(&WireRequest::get(SchemeTag::Lrsha, 9, 3));
    assert_eq!(wrong_server.error.unwrap().code, "BadRequest");
    let out_of_range = service.handle(&WireRequest::get(SchemeTag::Lrsha, 1, 0));
    assert_eq!(out_of_range.error.unwrap().code, "EpochOutOfRange");
    let too_big = service.handle(&WireRequest::batch(SchemeTag::Lrsha, 1, 1, 4096));
    assert_eq!(too_big.error.unwrap().code, "RangeTooLarge");

    let status = service.handle(&WireRequest::status(SchemeTag::Lrsha, 1));
    let body = status.status.unwrap();
    assert!(body.ready);
    assert_eq!(body.max_epochs, 8);
}

#[test]
fn descriptor_for_fixture_validates() {
    // glue check: a descriptor assembled from this fixture passes validation
    let fx = lrsha_fixture(11, 2, 8);
    let descriptor = DeploymentDescriptor {
        v: 1,
        scheme: SchemeTag::Lrsha,
        group: fx.params.group,
        max_epochs: 8,
        servers: (1..=2)
            .map(|i| ServerEntry { index: i, endpoint: format!("http://127.0.0.1:91{i:02}") })
            .collect(),
        signer_key: Some(hex::encode(fx.public.y_public.encode())),
        cert_keys: Some(fx.public.cert_keys.iter().map(|k| hex::encode(k.encode())).collect()),
        fs_roots: None,
    };
    descriptor.validate().unwrap();
    assert_eq!(descriptor.params(), fx.params);
}
