//! Commitment-construction server daemon.
//!
//! Loads a sealed server secret, optionally precomputes a bundle range, and
//! serves the JSON wire protocol over HTTP. All flags can be overridden with
//! `LRSHA_`-prefixed environment variables.

use std::path::PathBuf;
use std::sync::Arc;

use clap::Parser;
use tracing::{info, warn};

use lrsha_core::SchemeTag;
use lrsha_server::service::{CommitmentService, ServerConfig};
use lrsha_server::{read_key_file, ServerSecretBlob};

#[derive(Parser, Debug)]
#[command(name = "comc-server", about = "commitment-construction server")]
struct Args {
    /// Scheme this server participates in (lrsha | flrsha).
    #[arg(long, env = "LRSHA_SCHEME")]
    scheme: String,

    /// 1-based index of this server among the L servers.
    #[arg(long, env = "LRSHA_INDEX")]
    index: u16,

    /// Listen address; port 0 picks a free port.
    #[arg(long, env = "LRSHA_LISTEN", default_value = "127.0.0.1:0")]
    listen: String,

    /// Sealed keystore blob written by the ceremony.
    #[arg(long, env = "LRSHA_KEYSTORE")]
    keystore: PathBuf,

    /// Key file for the encrypted keystore backend.
    #[arg(long, env = "LRSHA_KEYSTORE_KEY")]
    keystore_key: Option<PathBuf>,

    /// Precompute bundles for `lo:hi` at startup.
    #[arg(long, env = "LRSHA_PRECOMPUTE", value_parser = parse_range)]
    precompute: Option<(u64, u64)>,

    /// Largest allowed batch request.
    #[arg(long, env = "LRSHA_MAX_BATCH", default_value_t = 1024)]
    max_batch: u64,

    /// Cache file path; defaults to `<keystore>.cache`.
    #[arg(long, env = "LRSHA_CACHE")]
    cache: Option<PathBuf>,

    /// Cache storage budget in bytes.
    #[arg(long, env = "LRSHA_CACHE_BUDGET", default_value_t = 64 << 20)]
    cache_budget: u64,

    /// Chain-table stride (flrsha); default is about sqrt(J).
    #[arg(long, env = "LRSHA_CHAIN_STRIDE")]
    chain_stride: Option<u64>,

    /// Write the bound address here once listening.
    #[arg(long, env = "LRSHA_PORT_FILE")]
    port_file: Option<PathBuf>,

    /// Fault injection: corrupt every served bundle. For detection drills.
    #[arg(long, hide = true, default_value_t = false)]
    inject_tamper: bool,
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

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();

    let args = Args::parse();
    let scheme = SchemeTag::from_str(&args.scheme)
        .map_err(|_| anyhow::anyhow!("unknown scheme {:?}", args.scheme))?;

    let mut config = ServerConfig::new(scheme, args.index);
    config.max_batch = args.max_batch;
    config.cache_budget = args.cache_budget;
    config.chain_stride = args.chain_stride;
    config.inject_tamper = args.inject_tamper;
    if config.inject_tamper {
        warn!("fault injection enabled: all served bundles will be corrupted");
    }

    let key = match &args.keystore_key {
        Some(path) => Some(read_key_file(path)?),
        None => None,
    };
    let blob = ServerSecretBlob::read(&args.keystore, key.as_ref())?;
    let service = Arc::new(CommitmentService::new(config));
    service.provision(blob)?;
    info!(index = args.index, %scheme, "provisioned from {}", args.keystore.display());

    let cache_path = args.cache.unwrap_or_else(|| {
        let mut p = args.keystore.clone().into_os_string();
        p.push(".cache");
        PathBuf::from(p)
    });
    if cache_path.exists() {
        match service.load_cache(&cache_path) {
            Ok(()) => info!("loaded cache from {}", cache_path.display()),
            Err(e) => warn!("ignoring cache file {}: {e}", cache_path.display()),
        }
    }
    if let Some((lo, hi)) = args.precompute {
        let stats = service.precompute(lo, hi)?;
        service.save_cache(&cache_path)?;
        info!(lo, hi, bundles = stats.bundles, bytes = stats.bytes, "precomputed bundle cache");
    }

    let listener = tokio::net::TcpListener::bind(&args.listen).await?;
    let addr = listener.local_addr()?;
    info!(%addr, "listening");
    if let Some(port_file) = &args.port_file {
        std::fs::write(port_file, addr.to_string())?;
    }

    lrsha_server::http::serve(listener, service).await?;
    Ok(())
}
