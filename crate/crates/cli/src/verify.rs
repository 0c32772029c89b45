//! Verifier-side commands: verify one signature, audit the server fleet.
//!
//! Exit-code contract: 0 accept, 1 reject, 2 infrastructure error. One
//! machine-readable reason line goes to stdout either way.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use lrsha_client::{HttpSource, RejectReason, VerifierClient, VerifyOutcome};
use lrsha_core::descriptor::DeploymentDescriptor;

pub const EXIT_ACCEPT: u8 = 0;
pub const EXIT_REJECT: u8 = 1;
pub const EXIT_INFRA: u8 = 2;

pub struct VerifyArgs {
    pub descriptor_path: PathBuf,
    pub message: Vec<u8>,
    pub signature_path: PathBuf,
    pub prefetch: Option<(u64, u64)>,
    /// Enable the strictly-increasing-epoch policy, persisted in this file.
    pub epoch_state: Option<PathBuf>,
}

pub struct VerifyReport {
    pub line: String,
    pub exit: u8,
}

pub fn load_descriptor(path: &Path) -> Result<DeploymentDescriptor> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading descriptor {}", path.display()))?;
    DeploymentDescriptor::parse(&text).context("parsing descriptor")
}

fn read_epoch_state(path: &Path) -> Result<u64> {
    if !path.exists() {
        return Ok(0);
    }
    let text = std::fs::read_to_string(path)?;
    text.trim().parse::<u64>().with_context(|| format!("corrupt epoch state {}", path.display()))
}

pub async fn verify(args: &VerifyArgs) -> Result<VerifyReport> {
    let descriptor = load_descriptor(&args.descriptor_path)?;
    let signature = std::fs::read(&args.signature_path)
        .with_context(|| format!("reading signature {}", args.signature_path.display()))?;

    let mut client = VerifierClient::new(descriptor, Box::new(HttpSource::new()))
        .context("building verifier client")?;
    if let Some(state_path) = &args.epoch_state {
        client = client.with_replay_protection(read_epoch_state(state_path)?);
    }

    if let Some((lo, hi)) = args.prefetch {
        let stats = client
            .prefetch(lo, hi)
            .await
            .map_err(|f| anyhow::anyhow!("prefetch failed: {f}"))?;
        if let Some(fault) = stats.faults.first() {
            return Ok(VerifyReport { line: format!("error {fault}"), exit: EXIT_INFRA });
        }
    }

    let outcome = client.verify_message(&args.message, &signature).await;
    let report = match outcome {
        VerifyOutcome::Accept { epoch } => {
            if let Some(state_path) = &args.epoch_state {
                std::fs::write(state_path, format!("{epoch}\n"))?;
            }
            VerifyReport { line: format!("accept epoch={epoch}"), exit: EXIT_ACCEPT }
        }
        VerifyOutcome::Reject(reason) => {
            let exit = match &reason {
                RejectReason::Fault(lrsha_client::ClientFault::ServerUnreachable { .. }) => {
                    EXIT_INFRA
                }
                _ => EXIT_REJECT,
            };
            VerifyReport { line: format!("reject {reason}"), exit }
        }
    };
    Ok(report)
}

pub struct AuditArgs {
    pub descriptor_path: PathBuf,
    pub epochs: Vec<u64>,
    pub json: bool,
}

pub async fn audit(args: &AuditArgs) -> Result<(String, u8)> {
    let descriptor = load_descriptor(&args.descriptor_path)?;
    let client = VerifierClient::new(descriptor, Box::new(HttpSource::new()))
        .context("building verifier client")?;
    let report = client.audit_servers(&args.epochs).await;

    let any_failures = report.servers.iter().any(|s| s.failed > 0);
    let text = if args.json {
        serde_json::to_string_pretty(&report)?
    } else {
        let mut out = String::new();
        out.push_str(&format!("audited epochs: {:?}\n", report.epochs));
        for server in &report.servers {
            match &server.first_failure {
                Some(note) => out.push_str(&format!(
                    "server {}: {} passed, {} failed, first failure at epoch {} ({})\n",
                    server.server, server.passed, server.failed, note.epoch, note.reason
                )),
                None => out.push_str(&format!(
                    "server {}: {} passed, {} failed\n",
                    server.server, server.passed, server.failed
                )),
            }
        }
        out
    };
    Ok((text, if any_failures { EXIT_REJECT } else { EXIT_ACCEPT }))
}
