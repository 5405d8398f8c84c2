// SPDX-License-Identifier: Apache-2.0

//! The `diap` command line.
//!
//! Exit codes: 0 on success, 1 when a check fails, 2 for usage or input
//! parse errors. Output is `key=value` lines, or one canonical JSON object
//! with `--json`.
//!
//! Agent state files hold the signing seed unencrypted. Keep them private.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use clap::{Args, Parser, Subcommand, ValueEnum};
use diap_core::proof::check_proof;
use diap_core::{
    canonical, generate_proof, Cid, IpnsName, KeyPair, PeerId, Proof, PublicInputs, Witness,
};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::auth::{authenticate, mutual_authenticate_report, AuthFailure, Direction, Verifier};
use crate::bus::{BroadcastBus, InProcessBus, TcpBus, TcpBusHub};
use crate::context::Context;
use crate::identity::{generate_keypair, AgentIdentity};
use crate::pubsub::PubsubAuthenticator;
use crate::rpc::{rpc_serve, EchoHandler, RpcClient};
use crate::store::ContentStore;
use crate::transport::{connect_via_identity, listen_as, AddressBook, TcpTransport, TransportError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

const STATE_SUFFIX: &str = ".agent.json";

#[derive(Parser, Debug)]
#[command(name = "diap", version, about = "DIAP agent identity and messaging tool")]
pub struct Cli {
    /// Shared content store directory
    #[arg(long, global = true, env = "DIAP_STORE", default_value = "diap-store")]
    pub store: PathBuf,
    /// Print one canonical JSON object instead of key=value lines
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Agent state files
    #[command(subcommand)]
    Agent(AgentCmd),
    /// Identity lookups
    #[command(subcommand)]
    Identity(IdentityCmd),
    /// Mutual authentication
    #[command(subcommand)]
    Auth(AuthCmd),
    /// Authenticated broadcast
    #[command(subcommand)]
    Pubsub(PubsubCmd),
    /// Direct-channel RPC
    #[command(subcommand)]
    Direct(DirectCmd),
    /// Generate a proof from public inputs and a witness
    Prove(ProveArgs),
    /// Check a proof against expected public inputs
    Verify(VerifyArgs),
}

#[derive(Subcommand, Debug)]
pub enum AgentCmd {
    /// Create and register a new agent, writing <name>.agent.json
    New {
        name: String,
        #[arg(long)]
        force: bool,
    },
}

#[derive(Subcommand, Debug)]
pub enum IdentityCmd {
    /// Print the document for a cid, an ipns: name, or an agent state file
    Resolve { target: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Side {
    A,
    B,
}

#[derive(Subcommand, Debug)]
pub enum AuthCmd {
    Demo {
        a: String,
        b: String,
        /// Flip one byte of this agent's stored document (on a scratch copy)
        #[arg(long, value_enum)]
        tamper: Option<Side>,
        /// Re-present a captured proof with its already-consumed challenge
        #[arg(long)]
        replay: bool,
    },
}

#[derive(Subcommand, Debug)]
pub enum PubsubCmd {
    Demo {
        #[arg(required = true, num_args = 2..)]
        agents: Vec<String>,
        #[arg(long, default_value = "diap-demo")]
        topic: String,
        /// Number of envelopes to mutate before delivery
        #[arg(long, default_value_t = 0)]
        tamper: usize,
        /// Deliver every envelope twice
        #[arg(long)]
        duplicate: bool,
        /// Use the loopback TCP bus instead of the in-process bus
        #[arg(long)]
        tcp: bool,
    },
}

#[derive(Subcommand, Debug)]
pub enum DirectCmd {
    Demo(DirectArgs),
}

#[derive(Args, Debug)]
pub struct DirectArgs {
    /// Dialing agent
    pub a: String,
    /// Listening agent
    pub b: String,
    /// Request timeout in seconds
    #[arg(long, default_value_t = 30)]
    pub timeout: u64,
    #[arg(long, default_value_t = 32)]
    pub payload_size: usize,
    /// Only run b's listener, serving one connection
    #[arg(long, conflicts_with = "dial")]
    pub listen: bool,
    /// Only run a's dialer against an already listening b
    #[arg(long)]
    pub dial: bool,
}

#[derive(Args, Debug)]
pub struct ProveArgs {
    #[arg(long)]
    pub public: PathBuf,
    #[arg(long)]
    pub witness: PathBuf,
    /// Write the proof here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long)]
    pub proof: PathBuf,
    #[arg(long)]
    pub public: PathBuf,
}

/// On-disk agent state.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentStateFile {
    pub seed: String,
    pub did: String,
    pub cid: String,
    pub ipns_name: String,
    pub peer_id: String,
}

impl AgentStateFile {
    pub fn from_identity(id: &AgentIdentity) -> Self {
        AgentStateFile {
            seed: B64.encode(id.keypair().seed()),
            did: id.did().to_string(),
            cid: id.cid().to_text(),
            ipns_name: id.ipns_name().to_string(),
            peer_id: B64.encode(id.peer_id().as_bytes()),
        }
    }

    /// Rebuilds the identity, checking it against `store`.
    pub fn load_identity(&self, store: &ContentStore) -> Result<AgentIdentity, Failure> {
        let seed = B64.decode(&self.seed).map_err(|_| Failure::usage("bad seed encoding"))?;
        let keypair = KeyPair::from_seed_slice(&seed).map_err(|_| Failure::usage("bad seed"))?;
        let peer = B64
            .decode(&self.peer_id)
            .ok()
            .and_then(|b| PeerId::new(b).ok())
            .ok_or_else(|| Failure::usage("bad peer id"))?;
        let cid = Cid::parse(&self.cid).map_err(|_| Failure::usage("bad cid"))?;
        if keypair.did().as_str() != self.did {
            return Err(Failure::usage("did does not match seed"));
        }
        AgentIdentity::load(keypair, peer, cid, store)
            .map_err(|e| Failure::fail("identity-load", e.to_string()))
    }
}

/// A command outcome that is not success.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub reason: String,
    pub detail: Option<String>,
}

impl Failure {
    fn usage(detail: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            reason: "usage".into(),
            detail: Some(detail.into()),
        }
    }

    fn fail(reason: impl Into<String>, detail: impl Into<String>) -> Self {
        Failure {
            code: EXIT_FAIL,
            reason: reason.into(),
            detail: Some(detail.into()),
        }
    }

    fn reason(reason: impl Into<String>) -> Self {
        Failure {
            code: EXIT_FAIL,
            reason: reason.into(),
            detail: None,
        }
    }
}

#[derive(Default)]
struct Report(Map<String, Value>);

impl Report {
    fn set(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.0.insert(key.into(), value.into());
        self
    }

    fn render(&self, json: bool, out: &mut dyn Write) {
        if json {
            let _ = writeln!(out, "{}", canonical::to_string(&self.0).expect("report serializes"));
            return;
        }
        for (k, v) in &self.0 {
            match v {
                Value::String(s) => {
                    let _ = writeln!(out, "{k}={s}");
                }
                other => {
                    let _ = writeln!(out, "{k}={other}");
                }
            }
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = if code == 0 {
                write!(out, "{}", e.render())
            } else {
                write!(err, "{}", e.render())
            };
            return code;
        }
    };
    let json = cli.json;
    let mut report = Report::default();
    let result = dispatch(cli, &mut report, out, err);
    match result {
        Ok(code) => {
            report.render(json, out);
            code
        }
        Err(f) => {
            report.set("ok", false).set("reason", f.reason.clone());
            if let Some(d) = &f.detail {
                report.set("detail", d.clone());
            }
            report.render(json, out);
            f.code
        }
    }
}

fn dispatch(
    cli: Cli,
    report: &mut Report,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Failure> {
    match cli.command {
        Command::Agent(AgentCmd::New { name, force }) => agent_new(&cli.store, &name, force, report, err),
        Command::Identity(IdentityCmd::Resolve { target }) => identity_resolve(&cli.store, &target, report),
        Command::Auth(AuthCmd::Demo { a, b, tamper, replay }) => {
            auth_demo(&cli.store, &a, &b, tamper, replay, report)
        }
        Command::Pubsub(PubsubCmd::Demo {
            agents,
            topic,
            tamper,
            duplicate,
            tcp,
        }) => runtime()?.block_on(pubsub_demo(&cli.store, &agents, &topic, tamper, duplicate, tcp, report)),
        Command::Direct(DirectCmd::Demo(args)) => runtime()?.block_on(direct_demo(&cli.store, &args, report)),
        Command::Prove(args) => prove(&args, cli.json, report, out),
        Command::Verify(args) => verify(&args, report),
    }
}

fn runtime() -> Result<tokio::runtime::Runtime, Failure> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::fail("runtime", e.to_string()))
}

fn open_store(dir: &Path) -> Result<ContentStore, Failure> {
    ContentStore::open_dir(dir).map_err(|e| Failure::fail("store-error", e.to_string()))
}

pub fn state_path(name: &str) -> PathBuf {
    if name.ends_with(STATE_SUFFIX) {
        PathBuf::from(name)
    } else {
        PathBuf::from(format!("{name}{STATE_SUFFIX}"))
    }
}

fn read_state(name: &str) -> Result<AgentStateFile, Failure> {
    let path = state_path(name);
    let bytes = fs::read(&path)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn load_agent(name: &str, store: &ContentStore) -> Result<AgentIdentity, Failure> {
    read_state(name)?.load_identity(store)
}

fn agent_new(
    store_dir: &Path,
    name: &str,
    force: bool,
    report: &mut Report,
    err: &mut dyn Write,
) -> Result<i32, Failure> {
    let path = state_path(name);
    if path.exists() && !force {
        return Err(Failure::fail(
            "exists",
            format!("{} exists; pass --force to overwrite", path.display()),
        ));
    }
    let store = open_store(store_dir)?;
    let keypair = generate_keypair().map_err(|e| Failure::fail("randomness-unavailable", e.0))?;
    let mut peer = [0u8; 32];
    rand::rngs::OsRng.fill_bytes(&mut peer);
    let peer = PeerId::new(peer.to_vec()).expect("nonempty");
    let identity = AgentIdentity::register(keypair, peer, &store)
        .map_err(|e| Failure::fail("register", e.to_string()))?;
    let state = AgentStateFile::from_identity(&identity);
    let mut bytes = serde_json::to_vec_pretty(&state).expect("state serializes");
    bytes.push(b'\n');
    fs::write(&path, bytes).map_err(|e| Failure::fail("io", e.to_string()))?;
    let _ = writeln!(
        err,
        "warning: {} holds an unencrypted signing seed",
        path.display()
    );
    report
        .set("ok", true)
        .set("state_file", path.display().to_string())
        .set("did", state.did)
        .set("cid", state.cid)
        .set("ipns_name", state.ipns_name);
    Ok(EXIT_OK)
}

fn identity_resolve(store_dir: &Path, target: &str, report: &mut Report) -> Result<i32, Failure> {
    let store = open_store(store_dir)?;
    let cid = if target.starts_with(diap_core::ipns::IPNS_PREFIX) {
        let name = IpnsName::parse(target).map_err(|e| Failure::usage(e.to_string()))?;
        store
            .ipns_resolve(&name)
            .map_err(|e| Failure::fail(store_reason(&e), e.to_string()))?
    } else if target.ends_with(STATE_SUFFIX) {
        Cid::parse(&read_state(target)?.cid).map_err(|e| Failure::usage(e.to_string()))?
    } else {
        Cid::parse(target).map_err(|e| Failure::usage(e.to_string()))?
    };
    let ctx = Context::new(store);
    let doc = ctx
        .resolve_document(&cid)
        .map_err(|e| Failure::reason(AuthFailure::from(e).code()))?;
    let doc_json: Value = serde_json::from_slice(&doc.to_canonical_bytes()).expect("document json");
    report
        .set("ok", true)
        .set("cid", cid.to_text())
        .set("did", doc.id.to_string())
        .set("document", doc_json);
    Ok(EXIT_OK)
}

fn store_reason(e: &crate::store::StoreError) -> &'static str {
    use crate::store::StoreError::*;
    match e {
        NotFound => "not-found",
        IntegrityViolation(_) => "integrity-violation",
        StaleSequence { .. } => "stale-sequence",
        InvalidSignature | RecordSignatureInvalid => "record-signature-invalid",
        MalformedRecord(_) => "malformed-record",
        Io(_) => "store-error",
    }
}

fn auth_demo(
    store_dir: &Path,
    a: &str,
    b: &str,
    tamper: Option<Side>,
    replay: bool,
    report: &mut Report,
) -> Result<i32, Failure> {
    let disk = open_store(store_dir)?;
    let alice = load_agent(a, &disk)?;
    let bob = load_agent(b, &disk)?;
    report
        .set("a", alice.did().to_string())
        .set("b", bob.did().to_string());

    let store = match tamper {
        None => disk,
        Some(side) => {
            let scratch = ContentStore::in_memory();
            for id in [&alice, &bob] {
                disk.copy_raw_block(&id.cid(), &scratch)
                    .map_err(|e| Failure::fail(store_reason(&e), e.to_string()))?;
            }
            let victim = if side == Side::A { &alice } else { &bob };
            scratch
                .corrupt_block(&victim.cid(), 7)
                .map_err(|e| Failure::fail(store_reason(&e), e.to_string()))?;
            scratch
        }
    };
    let ctx = Context::new(store);

    let outcome = if replay {
        replay_attempt(&alice, &bob, &ctx)
    } else {
        mutual_authenticate_report(&alice, &bob, &ctx).map_err(|f| {
            let stage = match f.direction {
                Direction::AVerifiesB => "a-verifies-b",
                Direction::BVerifiesA => "b-verifies-a",
            };
            (stage, f.reason)
        })
    };
    match outcome {
        Ok(()) => {
            report.set("mutual_trust", true);
            Ok(EXIT_OK)
        }
        Err((stage, reason)) => {
            report
                .set("mutual_trust", false)
                .set("stage", stage)
                .set("reason", reason.code());
            Ok(EXIT_FAIL)
        }
    }
}

/// `a` verifies `b` honestly, then `b`'s captured proof is presented again
/// with the same challenge.
fn replay_attempt(
    alice: &AgentIdentity,
    bob: &AgentIdentity,
    ctx: &Context,
) -> Result<(), (&'static str, AuthFailure)> {
    let verifier = Verifier::new(ctx.clone());
    let challenge = verifier
        .issue_challenge()
        .map_err(|e| ("a-verifies-b", e))?;
    let proof = bob
        .prove_ownership(&challenge.nonce, ctx.backend.as_ref())
        .map_err(|v| ("a-verifies-b", v.into()))?;
    verifier
        .check_ownership(&bob.cid(), &proof, &challenge)
        .map_err(|e| ("a-verifies-b", e))?;
    authenticate(&Verifier::new(ctx.clone()), alice).map_err(|e| ("b-verifies-a", e))?;
    let fresh = Verifier::new(ctx.clone());
    fresh
        .check_ownership(&bob.cid(), &proof, &challenge)
        .map_err(|e| ("replay", e))
}

#[allow(clippy::too_many_arguments)]
async fn pubsub_demo(
    store_dir: &Path,
    agents: &[String],
    topic: &str,
    tamper: usize,
    duplicate: bool,
    tcp: bool,
    report: &mut Report,
) -> Result<i32, Failure> {
    if tamper > agents.len() {
        return Err(Failure::usage("--tamper exceeds the number of agents"));
    }
    let store = open_store(store_dir)?;
    let identities = agents
        .iter()
        .map(|a| load_agent(a, &store))
        .collect::<Result<Vec<_>, _>>()?;
    let ctx = Context::new(store);
    let copies = if duplicate { 2 } else { 1 };

    let (_hub, bus): (Option<TcpBusHub>, Arc<dyn BroadcastBus>) = if tcp {
        let hub = TcpBusHub::bind("127.0.0.1:0".parse().expect("addr"))
            .await
            .map_err(|e| Failure::fail("bus", e.to_string()))?;
        let addr = hub.local_addr();
        (Some(hub), Arc::new(TcpBus::new(addr)))
    } else {
        (None, Arc::new(InProcessBus::with_duplication(copies)))
    };
    let auth = PubsubAuthenticator::new(ctx, bus);
    let mut subs = Vec::new();
    for _ in &identities {
        subs.push(
            auth.subscribe_verified(topic)
                .await
                .map_err(|e| Failure::fail("bus", e.to_string()))?,
        );
    }

    for (i, id) in identities.iter().enumerate() {
        let challenge = auth
            .issue_challenge()
            .map_err(|e| Failure::reason(e.code()))?;
        let content = format!("hello from {} #{i}", id.did()).into_bytes();
        let mut msg = auth
            .seal(id, topic, content, &challenge)
            .map_err(|e| Failure::reason(e.code()))?;
        if i < tamper {
            msg.content.extend_from_slice(b" (altered)");
        }
        let bytes = msg.to_json();
        let sends = if tcp { copies } else { 1 };
        for _ in 0..sends {
            auth.publish_raw(topic, bytes.clone())
                .await
                .map_err(|e| Failure::fail("bus", e.to_string()))?;
        }
    }

    let deliveries = identities.len() * copies;
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    for sub in subs.iter_mut() {
        for _ in 0..deliveries {
            match tokio::time::timeout(Duration::from_secs(10), sub.next_outcome()).await {
                Ok(Some(_)) => {}
                _ => return Err(Failure::reason("delivery-timeout")),
            }
        }
        accepted.push(sub.accepted());
        rejected.push(sub.rejected());
    }
    let expected = (identities.len() - tamper) as u64;
    let consistent = accepted.iter().all(|&n| n == expected);
    report
        .set("topic", topic)
        .set("publishes", identities.len())
        .set("tampered", tamper)
        .set("deliveries_per_subscriber", deliveries)
        .set("subscribers", subs.len())
        .set("accepted", accepted[0])
        .set("rejected", rejected[0])
        .set("ok", consistent);
    Ok(if consistent { EXIT_OK } else { EXIT_FAIL })
}

async fn direct_demo(store_dir: &Path, args: &DirectArgs, report: &mut Report) -> Result<i32, Failure> {
    let store = open_store(store_dir)?;
    let alice = load_agent(&args.a, &store)?;
    let bob = load_agent(&args.b, &store)?;
    let book = AddressBook::dir(store_dir.join("peers")).map_err(|e| Failure::fail("io", e.to_string()))?;
    let transport = Arc::new(TcpTransport::new(book.clone()));
    let ctx = Context::new(store);

    let listener_task = if args.dial {
        None
    } else {
        let mut listener = listen_as(transport.as_ref(), &bob)
            .await
            .map_err(|e| Failure::fail("listen", e.to_string()))?;
        let peer = bob.peer_id().clone();
        let book = book.clone();
        Some(tokio::spawn(async move {
            let served = match listener.accept().await {
                Ok(ch) => rpc_serve(ch, Arc::new(EchoHandler))
                    .await
                    .map_err(|e| e.to_string()),
                Err(e) => Err(e.to_string()),
            };
            let _ = book.remove(&peer);
            served
        }))
    };

    if args.listen {
        report.set("listening", bob.did().to_string());
        let served = listener_task.expect("listener started").await;
        return match served {
            Ok(Ok(())) => {
                report.set("ok", true);
                Ok(EXIT_OK)
            }
            Ok(Err(e)) => Err(Failure::fail("serve", e)),
            Err(e) => Err(Failure::fail("serve", e.to_string())),
        };
    }

    let remote_doc = ctx
        .resolve_document(&bob.cid())
        .map_err(|e| Failure::reason(AuthFailure::from(e).code()))?;
    let channel = connect_via_identity(transport.as_ref(), &remote_doc, &bob)
        .await
        .map_err(|e| match e {
            TransportError::AddressResolution(_) | TransportError::PeerUnreachable(_) => {
                Failure::fail("peer-unreachable", e.to_string())
            }
            other => Failure::fail("connect", other.to_string()),
        })?;
    let client = RpcClient::new(channel);
    let mut payload = vec![0u8; args.payload_size];
    rand::rngs::OsRng.fill_bytes(&mut payload);
    let started = Instant::now();
    let reply = client
        .call("ping", payload.clone(), Duration::from_secs(args.timeout))
        .await;
    let latency = started.elapsed();
    client.close().await;
    if let Some(task) = listener_task {
        let _ = task.await;
    }
    let reply = reply.map_err(|e| Failure::fail("rpc", e.to_string()))?;
    let matched = reply == payload;
    report
        .set("from", alice.did().to_string())
        .set("to", bob.did().to_string())
        .set("payload_bytes", payload.len())
        .set("echo_match", matched)
        .set("latency_us", latency.as_micros() as u64)
        .set("ok", matched);
    Ok(if matched { EXIT_OK } else { EXIT_FAIL })
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| Failure {
        code: EXIT_USAGE,
        reason: "parse-error".into(),
        detail: Some(format!("{}: {e}", path.display())),
    })
}

fn prove(args: &ProveArgs, json: bool, report: &mut Report, out: &mut dyn Write) -> Result<i32, Failure> {
    let public: PublicInputs = read_json(&args.public)?;
    let witness: Witness = read_json(&args.witness)?;
    let proof = generate_proof(&public, &witness, &diap_core::EmbeddedBackend)
        .map_err(|v| Failure::reason(v.to_string()))?;
    let bytes = canonical::to_vec(&proof).expect("proof serializes");
    match &args.out {
        Some(path) => {
            fs::write(path, &bytes).map_err(|e| Failure::fail("io", e.to_string()))?;
            report
                .set("ok", true)
                .set("binding_proof", proof.binding_proof.to_decimal())
                .set("out", path.display().to_string());
        }
        None if json => {
            let v: Value = serde_json::from_slice(&bytes).expect("proof json");
            report.set("ok", true).set("proof", v);
        }
        None => {
            let _ = out.write_all(&bytes);
            let _ = writeln!(out);
        }
    }
    Ok(EXIT_OK)
}

fn verify(args: &VerifyArgs, report: &mut Report) -> Result<i32, Failure> {
    let proof: Proof = read_json(&args.proof)?;
    let public: PublicInputs = read_json(&args.public)?;
    match check_proof(&proof, &public, &diap_core::EmbeddedBackend) {
        Ok(()) => {
            report.set("valid", true);
            Ok(EXIT_OK)
        }
        Err(r) => {
            report.set("valid", false).set("reason", r.to_string());
            Ok(EXIT_FAIL)
        }
    }
}
