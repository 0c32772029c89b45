//! `lrsha`: operator tooling for the signature schemes and their
//! commitment-server deployments.

use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use lrsha_cli::{bench, ceremony, demo, signing, verify};
use lrsha_core::group::GroupId;
use lrsha_core::params::DEFAULT_MAX_EPOCHS;
use lrsha_core::SchemeTag;

#[derive(Parser)]
#[command(name = "lrsha", about = "signature schemes with server-constructed commitments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate all key material and the deployment descriptor.
    Ceremony {
        #[arg(long)]
        scheme: String,
        /// Group backend: ristretto255 (default) or toy23 (testing only).
        #[arg(long, default_value = "ristretto255")]
        backend: String,
        /// Number of commitment servers L.
        #[arg(long, default_value_t = 3)]
        servers: u16,
        /// Signing capability J.
        #[arg(long, default_value_t = DEFAULT_MAX_EPOCHS)]
        max_epochs: u64,
        /// Output directory (must be empty or absent).
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated server endpoints, one per server.
        #[arg(long, value_delimiter = ',')]
        endpoints: Option<Vec<String>>,
        /// Deterministic key generation seed (demos and tests).
        #[arg(long)]
        seed: Option<u64>,
        /// Encrypt key material at rest with a generated key file.
        #[arg(long, default_value_t = false)]
        encrypt: bool,
    },

    /// Sign a message, advancing and persisting the signer state.
    Sign {
        #[arg(long)]
        key: PathBuf,
        /// Message file; `-` or absent reads stdin.
        #[arg(long)]
        message: Option<PathBuf>,
        /// Signature output file (72 bytes); hex goes to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Use a precompute store for the online phase.
        #[arg(long)]
        precomputed: Option<PathBuf>,
        #[arg(long, default_value = "text")]
        format: String,
    },

    /// Derive a precompute store for the next `count` epochs.
    Precompute {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        count: u64,
        #[arg(long)]
        out: PathBuf,
    },

    /// Verify a signature against a deployment. Exit 0 accept, 1 reject,
    /// 2 infrastructure error.
    Verify {
        #[arg(long)]
        descriptor: PathBuf,
        #[arg(long)]
        message: Option<PathBuf>,
        #[arg(long)]
        signature: PathBuf,
        /// Prefetch aggregates for `lo:hi` before verifying.
        #[arg(long, value_parser = parse_range)]
        prefetch: Option<(u64, u64)>,
        /// Reject non-increasing epochs, persisting the floor in this file.
        #[arg(long, requires = "epoch_state", default_value_t = false)]
        require_increasing_epoch: bool,
        #[arg(long)]
        epoch_state: Option<PathBuf>,
    },

    /// Probe every server at sampled epochs and report per-server results.
    Audit {
        #[arg(long)]
        descriptor: PathBuf,
        /// Comma-separated epochs to sample.
        #[arg(long, value_delimiter = ',')]
        epochs: Option<Vec<u64>>,
        /// Sample every epoch in `lo:hi`.
        #[arg(long, value_parser = parse_range)]
        range: Option<(u64, u64)>,
        #[arg(long, default_value = "text")]
        format: String,
    },

    /// Run the full local demo: ceremony, real servers, signing,
    /// verification, and the tamper-detection phase.
    Demo {
        #[arg(long)]
        scheme: String,
        #[arg(long, default_value_t = 3)]
        servers: u16,
        #[arg(long, default_value_t = 32)]
        max_epochs: u64,
        #[arg(long, default_value_t = 8)]
        messages: u64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Path to the comc-server binary (default: next to this binary).
        #[arg(long)]
        server_bin: Option<PathBuf>,
    },

    /// Benchmark both schemes against a baseline Schnorr signer.
    Bench {
        #[arg(long, default_value_t = 2000)]
        iterations: u64,
        #[arg(long, default_value = "text")]
        format: String,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_range(s: &str) -> Result<(u64, u64), String> {
    let (lo, hi) = s.split_once(':').ok_or("expected lo:hi")?;
    let lo: u64 = lo.parse().map_err(|e| format!("bad lo: {e}"))?;
    let hi: u64 = hi.parse().map_err(|e| format!("bad hi: {e}"))?;
    if lo < 1 || lo > hi {
        return Err(format!("bad range {lo}:{hi}"));
    }
    Ok((lo, hi))
}

fn read_message(path: &Option<PathBuf>) -> Result<Vec<u8>> {
    match path {
        Some(p) if p.as_os_str() != "-" => {
            std::fs::read(p).with_context(|| format!("reading message {}", p.display()))
        }
        _ => {
            let mut buf = Vec::new();
            std::io::stdin().read_to_end(&mut buf).context("reading message from stdin")?;
            Ok(buf)
        }
    }
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(verify::EXIT_INFRA)
        }
    }
}

fn dispatch() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Ceremony {
            scheme,
            backend,
            servers,
            max_epochs,
            out,
            endpoints,
            seed,
            encrypt,
        } => {
            let args = ceremony::CeremonyArgs {
                scheme: parse_scheme(&scheme)?,
                group: parse_group(&backend)?,
                servers,
                max_epochs,
                out_dir: out,
                endpoints,
                seed,
                encrypt,
            };
            let output = ceremony::run(&args)?;
            println!("descriptor: {}", output.descriptor_path.display());
            println!("signer key: {}", output.signer_key_path.display());
            for path in &output.server_blob_paths {
                println!("server blob: {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Sign { key, message, out, precomputed, format } => {
            let args = signing::SignArgs {
                key_path: key,
                message: read_message(&message)?,
                signature_out: out.clone(),
                store_path: precomputed,
            };
            let result = signing::sign_once(&args)?;
            let encoded = result.signature.encode();
            match format.as_str() {
                "json" => println!(
                    "{}",
                    serde_json::json!({
                        "epoch": result.epoch,
                        "signature": hex::encode(encoded),
                        "precomputed": result.used_store,
                    })
                ),
                _ => {
                    if out.is_none() {
                        println!("{}", hex::encode(encoded));
                    } else {
                        println!("signed epoch={} precomputed={}", result.epoch, result.used_store);
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Precompute { key, count, out } => {
            let store = signing::precompute(&key, count, &out)?;
            let entry_bytes = store.payload_bytes().len();
            println!(
                "precomputed {} epochs ({} payload bytes) into {}",
                store.entries.len(),
                entry_bytes,
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }

        Command::Verify {
            descriptor,
            message,
            signature,
            prefetch,
            require_increasing_epoch,
            epoch_state,
        } => {
            let args = verify::VerifyArgs {
                descriptor_path: descriptor,
                message: read_message(&message)?,
                signature_path: signature,
                prefetch,
                epoch_state: if require_increasing_epoch { epoch_state } else { None },
            };
            let report = run_async(verify::verify(&args))?;
            println!("{}", report.line);
            Ok(ExitCode::from(report.exit))
        }

        Command::Audit { descriptor, epochs, range, format } => {
            let epochs = match (epochs, range) {
                (Some(list), None) => list,
                (None, Some((lo, hi))) => (lo..=hi).collect(),
                (None, None) => bail!("pass --epochs or --range"),
                (Some(_), Some(_)) => bail!("pass either --epochs or --range, not both"),
            };
            let args = verify::AuditArgs {
                descriptor_path: descriptor,
                epochs,
                json: format == "json",
            };
            let (text, exit) = run_async(verify::audit(&args))?;
            print!("{text}");
            Ok(ExitCode::from(exit))
        }

        Command::Demo { scheme, servers, max_epochs, messages, seed, server_bin } => {
            let args = demo::DemoArgs {
                scheme: parse_scheme(&scheme)?,
                servers,
                max_epochs,
                messages,
                seed,
                server_bin,
            };
            match run_async(demo::run(&args)) {
                Ok(()) => Ok(ExitCode::SUCCESS),
                Err(e) => {
                    println!("demo: result=fail {e:#}");
                    Ok(ExitCode::from(1))
                }
            }
        }

        Command::Bench { iterations, format, out } => {
            if iterations < 1000 {
                bail!("need at least 1000 iterations for stable medians");
            }
            let report = bench::run(iterations);
            let json = serde_json::to_string_pretty(&report)?;
            match format.as_str() {
                "json" => println!("{json}"),
                _ => print!("{}", report.to_markdown()),
            }
            if let Some(path) = out {
                std::fs::write(&path, format!("{json}\n"))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn parse_scheme(s: &str) -> Result<SchemeTag> {
    SchemeTag::from_str(s).map_err(|_| anyhow::anyhow!("unknown scheme {s:?} (lrsha | flrsha)"))
}

fn parse_group(s: &str) -> Result<GroupId> {
    GroupId::from_str(s).map_err(|_| anyhow::anyhow!("unknown backend {s:?} (ristretto255 | toy23)"))
}

fn run_async<T>(fut: impl std::future::Future<Output = T>) -> T {
    tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .expect("tokio runtime")
        .block_on(fut)
}
