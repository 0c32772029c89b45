//! Microbenchmarks: median op timings for both schemes against a baseline
//! Schnorr signer over the same group backend. Ratios, not absolute times,
//! are the meaningful output — absolute numbers are machine-specific.

use std::time::Instant;

use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::Serialize;

use lrsha_core::cert::{sgn_keygen, sgn_sign, sgn_verify};
use lrsha_core::group::GroupId;
use lrsha_core::{flrsha, lrsha, metrics, SchemeParams, SchemeTag};

#[derive(Debug, Serialize)]
pub struct BenchReport {
    pub environment: EnvironmentInfo,
    pub iterations: u64,
    pub baseline: BaselineBench,
    pub lrsha: SchemeBench,
    pub flrsha: SchemeBench,
    pub ratios: Ratios,
}

#[derive(Debug, Serialize)]
pub struct EnvironmentInfo {
    pub os: String,
    pub arch: String,
    pub cpu_model: Option<String>,
    pub logical_cpus: usize,
    pub debug_build: bool,
}

#[derive(Debug, Serialize)]
pub struct BaselineBench {
    pub name: String,
    pub sign_us: f64,
    pub verify_us: f64,
    pub sign_exp_calls: u64,
    pub signature_bytes: usize,
}

#[derive(Debug, Serialize)]
pub struct SchemeBench {
    pub scheme: SchemeTag,
    pub sign_us: f64,
    pub verify_online_us: f64,
    pub server_commit_us: f64,
    pub aggregate_us: f64,
    pub sign_exp_calls: u64,
    pub verify_online_exp_calls: u64,
    pub sizes: Sizes,
}

#[derive(Debug, Serialize)]
pub struct Sizes {
    pub signature: usize,
    pub signer_key_payload: usize,
    pub server_bundle: usize,
    pub verifier_public_material: usize,
}

#[derive(Debug, Serialize)]
pub struct Ratios {
    /// baseline sign time / lrsha sign time (higher is better for lrsha)
    pub lrsha_sign_speedup: f64,
    pub flrsha_sign_speedup: f64,
}

fn median_us(mut samples: Vec<u64>) -> f64 {
    samples.sort_unstable();
    let mid = samples.len() / 2;
    let nanos = if samples.len() % 2 == 0 {
        (samples[mid - 1] + samples[mid]) as f64 / 2.0
    } else {
        samples[mid] as f64
    };
    nanos / 1_000.0
}

fn time<T>(iterations: u64, mut op: impl FnMut(u64) -> T) -> f64 {
    let mut samples = Vec::with_capacity(iterations as usize);
    for i in 0..iterations {
        let start = Instant::now();
        std::hint::black_box(op(i));
        samples.push(start.elapsed().as_nanos() as u64);
    }
    median_us(samples)
}

fn environment() -> EnvironmentInfo {
    let cpu_model = std::fs::read_to_string("/proc/cpuinfo").ok().and_then(|text| {
        text.lines().find(|l| l.starts_with("model name")).map(|l| {
            l.split(':').nth(1).unwrap_or("").trim().to_string()
        })
    });
    EnvironmentInfo {
        os: std::env::consts::OS.to_string(),
        arch: std::env::consts::ARCH.to_string(),
        cpu_model,
        logical_cpus: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        debug_build: cfg!(debug_assertions),
    }
}

/// Run the full benchmark suite. `iterations` should be at least 1000 for
/// stable medians.
pub fn run(iterations: u64) -> BenchReport {
    let group = GroupId::Ristretto255;
    let servers = 3u16;
    let max_epochs = iterations + 16;
    let mut rng = StdRng::seed_from_u64(0xBEAC);

    // baseline: plain Schnorr under the same backend
    let baseline_kp = sgn_keygen(group, &mut rng);
    let messages: Vec<[u8; 32]> = (0..iterations)
        .map(|i| {
            let mut m = [0u8; 32];
            m[..8].copy_from_slice(&i.to_le_bytes());
            m
        })
        .collect();
    let baseline_sign_us = time(iterations, |i| sgn_sign(&baseline_kp, &messages[i as usize]));
    let baseline_cert = sgn_sign(&baseline_kp, &messages[0]);
    let baseline_verify_us =
        time(iterations, |_| sgn_verify(baseline_kp.public(), &messages[0], &baseline_cert));
    let before = metrics::snapshot();
    let _ = sgn_sign(&baseline_kp, &messages[0]);
    let baseline_sign_exp = (metrics::snapshot() - before).exp;

    let lrsha = bench_lrsha(group, servers, max_epochs, iterations, &messages, &mut rng);
    let flrsha = bench_flrsha(group, servers, max_epochs, iterations, &messages, &mut rng);

    let ratios = Ratios {
        lrsha_sign_speedup: baseline_sign_us / lrsha.sign_us.max(f64::EPSILON),
        flrsha_sign_speedup: baseline_sign_us / flrsha.sign_us.max(f64::EPSILON),
    };

    BenchReport {
        environment: environment(),
        iterations,
        baseline: BaselineBench {
            name: "schnorr".into(),
            sign_us: baseline_sign_us,
            verify_us: baseline_verify_us,
            sign_exp_calls: baseline_sign_exp,
            signature_bytes: baseline_cert.encode().len(),
        },
        lrsha,
        flrsha,
        ratios,
    }
}

fn bench_lrsha(
    group: GroupId,
    servers: u16,
    max_epochs: u64,
    iterations: u64,
    messages: &[[u8; 32]],
    rng: &mut StdRng,
) -> SchemeBench {
    let params = SchemeParams::new(SchemeTag::Lrsha, group, max_epochs, servers).unwrap();
    let (mut signer, pk, secrets) = lrsha::keygen(&params, rng);

    // the verify target consumes epoch 1; the sign benchmark continues from 2
    let msg = b"verify target";
    let sig = lrsha::sign(&mut signer, msg).unwrap();
    let bundles: Vec<_> = secrets.iter().map(|s| lrsha::server_commit(s, 1).unwrap()).collect();
    let r_agg = lrsha::aggregate(&bundles, &pk).unwrap();
    assert!(lrsha::verify(&pk, msg, &sig, &r_agg));

    let sign_us = time(iterations, |i| lrsha::sign(&mut signer, &messages[i as usize]).unwrap());

    let server_commit_us =
        time(iterations, |i| lrsha::server_commit(&secrets[0], i + 2).unwrap());

    let aggregate_us = time(iterations, |_| lrsha::aggregate(&bundles, &pk).unwrap());
    let verify_online_us = time(iterations, |_| lrsha::verify(&pk, msg, &sig, &r_agg));

    let before = metrics::snapshot();
    let _ = lrsha::sign(&mut signer, b"exp probe");
    let sign_exp_calls = (metrics::snapshot() - before).exp;
    let before = metrics::snapshot();
    let _ = lrsha::verify(&pk, msg, &sig, &r_agg);
    let verify_online_exp_calls = (metrics::snapshot() - before).exp;

    SchemeBench {
        scheme: SchemeTag::Lrsha,
        sign_us,
        verify_online_us,
        server_commit_us,
        aggregate_us,
        sign_exp_calls,
        verify_online_exp_calls,
        sizes: Sizes {
            signature: sig.encode().len(),
            signer_key_payload: signer.payload_bytes().len(),
            server_bundle: bundles[0].encode().len(),
            verifier_public_material: 32 + pk.cert_keys.len() * 32,
        },
    }
}

fn bench_flrsha(
    group: GroupId,
    servers: u16,
    max_epochs: u64,
    iterations: u64,
    messages: &[[u8; 32]],
    rng: &mut StdRng,
) -> SchemeBench {
    let params = SchemeParams::new(SchemeTag::Flrsha, group, max_epochs, servers).unwrap();
    let (mut signer, vk, mut secrets) = flrsha::keygen(&params, rng);
    for secret in secrets.iter_mut() {
        secret.build_chain_tables((max_epochs as f64).sqrt().ceil() as u64).unwrap();
    }

    let msg = b"verify target";
    let first_sig = flrsha::sign(&mut signer, msg).unwrap();
    let bundles: Vec<_> =
        secrets.iter_mut().map(|s| flrsha::server_commit(s, 1).unwrap()).collect();
    let (y_agg, r_agg) = flrsha::aggregate(&bundles, &vk).unwrap();
    assert!(flrsha::verify(&vk, msg, &first_sig, &y_agg, &r_agg));

    let sign_us = time(iterations, |i| flrsha::sign(&mut signer, &messages[i as usize]).unwrap());

    let server_commit_us =
        time(iterations, |i| flrsha::server_commit(&mut secrets[0], i + 2).unwrap());

    let aggregate_us = time(iterations, |_| flrsha::aggregate(&bundles, &vk).unwrap());
    let verify_online_us =
        time(iterations, |_| flrsha::verify(&vk, msg, &first_sig, &y_agg, &r_agg));

    let before = metrics::snapshot();
    let _ = flrsha::sign(&mut signer, b"exp probe");
    let sign_exp_calls = (metrics::snapshot() - before).exp;
    let before = metrics::snapshot();
    let _ = flrsha::verify(&vk, msg, &first_sig, &y_agg, &r_agg);
    let verify_online_exp_calls = (metrics::snapshot() - before).exp;

    SchemeBench {
        scheme: SchemeTag::Flrsha,
        sign_us,
        verify_online_us,
        server_commit_us,
        aggregate_us,
        sign_exp_calls,
        verify_online_exp_calls,
        sizes: Sizes {
            signature: first_sig.encode().len(),
            signer_key_payload: signer.payload_bytes().len(),
            server_bundle: bundles[0].encode().len(),
            verifier_public_material: vk.roots.len() * 32,
        },
    }
}

impl BenchReport {
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "benchmark environment: {} {} ({} cpus{}{})\n",
            self.environment.os,
            self.environment.arch,
            self.environment.logical_cpus,
            self.environment.cpu_model.as_deref().map(|m| format!(", {m}")).unwrap_or_default(),
            if self.environment.debug_build { ", debug build" } else { "" },
        ));
        out.push_str(&format!("iterations per op: {}\n\n", self.iterations));
        out.push_str("| op | median us | exp calls |\n|---|---|---|\n");
        out.push_str(&format!(
            "| {} sign | {:.2} | {} |\n",
            self.baseline.name, self.baseline.sign_us, self.baseline.sign_exp_calls
        ));
        out.push_str(&format!("| {} verify | {:.2} | |\n", self.baseline.name, self.baseline.verify_us));
        for s in [&self.lrsha, &self.flrsha] {
            out.push_str(&format!(
                "| {} sign | {:.2} | {} |\n",
                s.scheme, s.sign_us, s.sign_exp_calls
            ));
            out.push_str(&format!(
                "| {} verify-online | {:.2} | {} |\n",
                s.scheme, s.verify_online_us, s.verify_online_exp_calls
            ));
            out.push_str(&format!("| {} server-commit | {:.2} | |\n", s.scheme, s.server_commit_us));
            out.push_str(&format!("| {} aggregate | {:.2} | |\n", s.scheme, s.aggregate_us));
        }
        out.push_str(&format!(
            "\nsign speedup vs {}: lrsha {:.1}x, flrsha {:.1}x\n",
            self.baseline.name, self.ratios.lrsha_sign_speedup, self.ratios.flrsha_sign_speedup
        ));
        out.push_str(&format!(
            "sizes: signature {}B, lrsha key payload {}B, flrsha key payload {}B\n",
            self.lrsha.sizes.signature,
            self.lrsha.sizes.signer_key_payload,
            self.flrsha.sizes.signer_key_payload
        ));
        out
    }
}
