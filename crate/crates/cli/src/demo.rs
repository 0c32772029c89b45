//! End-to-end local demo: run the ceremony, spawn L real server processes,
//! prefetch and verify over the wire, then corrupt one server and show the
//! verifier naming it.
//!
//! Transcript lines on stdout are deterministic for a fixed `--seed`: no
//! ports, paths or timings are printed there.

use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};

use lrsha_client::{ClientFault, HttpSource, VerifierClient};
use lrsha_core::descriptor::DeploymentDescriptor;
use lrsha_core::{SchemeTag, SIGNATURE_LEN};

use crate::ceremony::{self, CeremonyArgs};
use crate::signing::{sign_once, SignArgs};

pub struct DemoArgs {
    pub scheme: SchemeTag,
    pub servers: u16,
    pub max_epochs: u64,
    pub messages: u64,
    pub seed: u64,
    /// Explicit path to the comc-server binary; default looks next to the
    /// current executable.
    pub server_bin: Option<PathBuf>,
}

struct ChildGuard(Vec<Child>);

impl ChildGuard {
    fn kill_one(&mut self, index: usize) {
        if let Some(child) = self.0.get_mut(index) {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

impl Drop for ChildGuard {
    fn drop(&mut self) {
        for child in &mut self.0 {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

fn server_binary(explicit: &Option<PathBuf>) -> Result<PathBuf> {
    if let Some(path) = explicit {
        return Ok(path.clone());
    }
    let me = std::env::current_exe().context("locating current executable")?;
    let dir = me.parent().context("executable has no parent directory")?;
    for candidate in [dir.join("comc-server"), dir.join("../comc-server")] {
        if candidate.exists() {
            return Ok(candidate);
        }
    }
    bail!("comc-server binary not found next to {}; build the workspace first", me.display())
}

fn spawn_server(
    bin: &Path,
    scheme: SchemeTag,
    index: u16,
    keystore: &Path,
    port_file: &Path,
    max_epochs: u64,
    tamper: bool,
) -> Result<Child> {
    let mut cmd = Command::new(bin);
    cmd.arg("--scheme")
        .arg(scheme.as_str())
        .arg("--index")
        .arg(index.to_string())
        .arg("--listen")
        .arg("127.0.0.1:0")
        .arg("--keystore")
        .arg(keystore)
        .arg("--precompute")
        .arg(format!("1:{max_epochs}"))
        .arg("--port-file")
        .arg(port_file)
        .stdout(Stdio::null())
        .stderr(Stdio::null());
    if tamper {
        cmd.arg("--inject-tamper");
    }
    cmd.spawn().with_context(|| format!("spawning {}", bin.display()))
}

fn await_port_file(path: &Path, deadline: Duration) -> Result<String> {
    let start = Instant::now();
    loop {
        if let Ok(addr) = std::fs::read_to_string(path) {
            let addr = addr.trim().to_string();
            if !addr.is_empty() {
                return Ok(addr);
            }
        }
        if start.elapsed() > deadline {
            bail!("server did not come up within {deadline:?} ({} missing)", path.display());
        }
        std::thread::sleep(Duration::from_millis(25));
    }
}

fn patched_descriptor(base: &DeploymentDescriptor, addrs: &[String]) -> DeploymentDescriptor {
    let mut d = base.clone();
    for (entry, addr) in d.servers.iter_mut().zip(addrs) {
        entry.endpoint = format!("http://{addr}");
    }
    d
}

pub async fn run(args: &DemoArgs) -> Result<()> {
    let scheme = args.scheme;
    let stage = |name: &str, detail: String| {
        println!("demo: stage={name} {detail}");
    };

    let dir = tempfile::tempdir().context("creating demo directory")?;
    let out = ceremony::run(&CeremonyArgs {
        scheme,
        group: lrsha_core::GroupId::Ristretto255,
        servers: args.servers,
        max_epochs: args.max_epochs,
        out_dir: dir.path().join("deploy"),
        endpoints: None,
        seed: Some(args.seed),
        encrypt: false,
    })
    .context("stage=ceremony")?;
    stage(
        "ceremony",
        format!(
            "scheme={scheme} servers={} max_epochs={} files={} ok",
            args.servers,
            args.max_epochs,
            2 + args.servers as usize
        ),
    );

    let bin = server_binary(&args.server_bin)?;
    let mut children = ChildGuard(Vec::new());
    let mut port_files = Vec::new();
    for index in 1..=args.servers {
        let port_file = dir.path().join(format!("port-{index}"));
        let child = spawn_server(
            &bin,
            scheme,
            index,
            &out.server_blob_paths[(index - 1) as usize],
            &port_file,
            args.max_epochs,
            false,
        )?;
        children.0.push(child);
        port_files.push(port_file);
    }
    let addrs: Result<Vec<String>> =
        port_files.iter().map(|p| await_port_file(p, Duration::from_secs(30))).collect();
    let addrs = addrs.context("stage=spawn")?;
    stage("spawn", format!("servers={} ok", args.servers));

    let descriptor = patched_descriptor(&out.descriptor, &addrs);
    let client = VerifierClient::new(descriptor.clone(), Box::new(HttpSource::new()))
        .context("stage=prefetch")?;
    let stats = client
        .prefetch(1, args.max_epochs)
        .await
        .map_err(|f| anyhow::anyhow!("stage=prefetch: {f}"))?;
    if !stats.faults.is_empty() {
        bail!("stage=prefetch: unexpected faults {:?}", stats.faults);
    }
    stage("prefetch", format!("epochs=1..{} cached={} ok", args.max_epochs, stats.epochs_cached));

    let mut accepted = 0u64;
    for i in 0..args.messages {
        let message = format!("demo message {i}").into_bytes();
        let signed = sign_once(&SignArgs {
            key_path: out.signer_key_path.clone(),
            message: message.clone(),
            signature_out: None,
            store_path: None,
        })
        .context("stage=sign")?;
        let encoded = signed.signature.encode();
        assert_eq!(encoded.len(), SIGNATURE_LEN);
        let outcome = client.verify_message(&message, &encoded).await;
        if !outcome.is_accept() {
            bail!("stage=verify: message {i} rejected: {outcome:?}");
        }
        accepted += 1;
    }
    stage("sign-verify", format!("messages={} accepted={accepted} ok", args.messages));

    // tamper phase: restart server 2 (index 1) with fault injection
    let tamper_index: u16 = if args.servers >= 2 { 2 } else { 1 };
    children.kill_one((tamper_index - 1) as usize);
    let port_file = dir.path().join(format!("port-{tamper_index}-tampered"));
    let child = spawn_server(
        &bin,
        scheme,
        tamper_index,
        &out.server_blob_paths[(tamper_index - 1) as usize],
        &port_file,
        args.max_epochs,
        true,
    )?;
    children.0.push(child);
    let tampered_addr = await_port_file(&port_file, Duration::from_secs(30)).context("stage=tamper")?;

    let mut tampered_addrs = addrs.clone();
    tampered_addrs[(tamper_index - 1) as usize] = tampered_addr;
    let tampered_descriptor = patched_descriptor(&out.descriptor, &tampered_addrs);
    let fresh_client = VerifierClient::new(tampered_descriptor, Box::new(HttpSource::new()))
        .context("stage=tamper")?;
    let stats = fresh_client
        .prefetch(1, args.max_epochs)
        .await
        .map_err(|f| anyhow::anyhow!("stage=tamper: {f}"))?;
    if stats.faults.is_empty() {
        bail!("stage=tamper: tampered server went undetected");
    }
    for fault in &stats.faults {
        match fault {
            ClientFault::CertFailure { server, .. } if *server == tamper_index => {}
            other => bail!("stage=tamper: misattributed fault {other}"),
        }
    }
    stage("tamper", format!("server={tamper_index} detected=CertFailure{{{tamper_index}}} ok"));

    println!("demo: result=ok scheme={scheme}");
    Ok(())
}
