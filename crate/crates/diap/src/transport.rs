// SPDX-License-Identifier: Apache-2.0

//! Direct-channel transports and the discovery-to-connection handoff.
//!
//! A transport maps a [`PeerId`] to something it can dial. A peer id that
//! has never been registered is an address-resolution failure; a
//! registered peer that is not accepting is unreachable.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use diap_core::{decrypt_peer_id, verify_endpoint_signature, DidDocument, PeerId};
use thiserror::Error;
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::mpsc;

use crate::identity::AgentIdentity;
use crate::rpc::DirectChannel;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("address resolution failed for peer {0}")]
    AddressResolution(String),
    #[error("peer {0} unreachable")]
    PeerUnreachable(String),
    #[error("service endpoint signature invalid")]
    EndpointSignatureInvalid,
    #[error("peer id not recoverable from document: {0}")]
    EndpointUndecryptable(diap_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

#[async_trait]
pub trait Listener: Send {
    async fn accept(&mut self) -> Result<DirectChannel, TransportError>;
}

#[async_trait]
pub trait Transport: Send + Sync {
    async fn listen(&self, peer: &PeerId) -> Result<Box<dyn Listener>, TransportError>;
    async fn connect(&self, peer: &PeerId) -> Result<DirectChannel, TransportError>;
}

const MEMORY_BUFFER: usize = 1 << 16;

type Inbox = mpsc::UnboundedSender<tokio::io::DuplexStream>;

/// In-process transport over `tokio::io::duplex` pipes.
#[derive(Default)]
pub struct MemoryTransport {
    peers: Mutex<HashMap<PeerId, Option<Inbox>>>,
}

impl MemoryTransport {
    pub fn new() -> Self {
        Self::default()
    }

    /// Makes `peer` resolvable without it listening.
    pub fn register(&self, peer: &PeerId) {
        self.peers.lock().unwrap().entry(peer.clone()).or_insert(None);
    }
}

struct MemoryListener(mpsc::UnboundedReceiver<tokio::io::DuplexStream>);

#[async_trait]
impl Listener for MemoryListener {
    async fn accept(&mut self) -> Result<DirectChannel, TransportError> {
        match self.0.recv().await {
            Some(s) => Ok(Box::new(s)),
            None => Err(TransportError::Io(io::ErrorKind::BrokenPipe.into())),
        }
    }
}

#[async_trait]
impl Transport for MemoryTransport {
    async fn listen(&self, peer: &PeerId) -> Result<Box<dyn Listener>, TransportError> {
        let (tx, rx) = mpsc::unbounded_channel();
        self.peers.lock().unwrap().insert(peer.clone(), Some(tx));
        Ok(Box::new(MemoryListener(rx)))
    }

    async fn connect(&self, peer: &PeerId) -> Result<DirectChannel, TransportError> {
        let mut peers = self.peers.lock().unwrap();
        let slot = peers
            .get_mut(peer)
            .ok_or_else(|| TransportError::AddressResolution(peer.to_hex()))?;
        let (near, far) = tokio::io::duplex(MEMORY_BUFFER);
        match slot {
            Some(inbox) if inbox.send(far).is_ok() => Ok(Box::new(near)),
            _ => {
                *slot = None;
                Err(TransportError::PeerUnreachable(peer.to_hex()))
            }
        }
    }
}

/// PeerId to socket address mapping, in memory or as one file per peer
/// (`<dir>/<hex peer id>` holding the address text).
#[derive(Clone)]
pub enum AddressBook {
    Memory(Arc<Mutex<HashMap<PeerId, SocketAddr>>>),
    Dir(PathBuf),
}

impl AddressBook {
    pub fn in_memory() -> Self {
        AddressBook::Memory(Arc::default())
    }

    pub fn dir(path: impl Into<PathBuf>) -> io::Result<Self> {
        let path = path.into();
        fs::create_dir_all(&path)?;
        Ok(AddressBook::Dir(path))
    }

    pub fn insert(&self, peer: &PeerId, addr: SocketAddr) -> io::Result<()> {
        match self {
            AddressBook::Memory(m) => {
                m.lock().unwrap().insert(peer.clone(), addr);
                Ok(())
            }
            AddressBook::Dir(d) => fs::write(d.join(peer.to_hex()), addr.to_string()),
        }
    }

    pub fn remove(&self, peer: &PeerId) -> io::Result<()> {
        match self {
            AddressBook::Memory(m) => {
                m.lock().unwrap().remove(peer);
                Ok(())
            }
            AddressBook::Dir(d) => match fs::remove_file(d.join(peer.to_hex())) {
                Err(e) if e.kind() != io::ErrorKind::NotFound => Err(e),
                _ => Ok(()),
            },
        }
    }

    pub fn lookup(&self, peer: &PeerId) -> Option<SocketAddr> {
        match self {
            AddressBook::Memory(m) => m.lock().unwrap().get(peer).copied(),
            AddressBook::Dir(d) => fs::read_to_string(d.join(peer.to_hex()))
                .ok()
                .and_then(|s| s.trim().parse().ok()),
        }
    }
}

/// Loopback TCP. Listening binds an ephemeral port on 127.0.0.1 and
/// records it in the address book.
pub struct TcpTransport {
    book: AddressBook,
}

impl TcpTransport {
    pub fn new(book: AddressBook) -> Self {
        TcpTransport { book }
    }

    pub fn address_book(&self) -> &AddressBook {
        &self.book
    }
}

struct TcpListenerWrap(TcpListener);

#[async_trait]
impl Listener for TcpListenerWrap {
    async fn accept(&mut self) -> Result<DirectChannel, TransportError> {
        let (s, _) = self.0.accept().await?;
        s.set_nodelay(true)?;
        Ok(Box::new(s))
    }
}

#[async_trait]
impl Transport for TcpTransport {
    async fn listen(&self, peer: &PeerId) -> Result<Box<dyn Listener>, TransportError> {
        let l = TcpListener::bind(("127.0.0.1", 0)).await?;
        self.book.insert(peer, l.local_addr()?)?;
        Ok(Box::new(TcpListenerWrap(l)))
    }

    async fn connect(&self, peer: &PeerId) -> Result<DirectChannel, TransportError> {
        let addr = self
            .book
            .lookup(peer)
            .ok_or_else(|| TransportError::AddressResolution(peer.to_hex()))?;
        let s = TcpStream::connect(addr)
            .await
            .map_err(|_| TransportError::PeerUnreachable(peer.to_hex()))?;
        s.set_nodelay(true)?;
        Ok(Box::new(s))
    }
}

/// The party able to read a document's encrypted endpoint: its owner.
pub trait EndpointOwner {
    fn reveal_peer_id(&self, document: &DidDocument) -> Result<PeerId, diap_core::Error>;
}

impl EndpointOwner for AgentIdentity {
    fn reveal_peer_id(&self, document: &DidDocument) -> Result<PeerId, diap_core::Error> {
        decrypt_peer_id(self.keypair(), &document.service_endpoint)
    }
}

/// Starts listening as `identity` on its own peer id.
pub async fn listen_as(
    transport: &dyn Transport,
    identity: &AgentIdentity,
) -> Result<Box<dyn Listener>, TransportError> {
    transport.listen(identity.peer_id()).await
}

/// Checks the endpoint signature on `remote_doc`, has its owner recover the
/// peer id, and dials it.
pub async fn connect_via_identity(
    transport: &dyn Transport,
    remote_doc: &DidDocument,
    owner: &dyn EndpointOwner,
) -> Result<DirectChannel, TransportError> {
    if !verify_endpoint_signature(remote_doc.public_key.as_bytes(), &remote_doc.service_endpoint) {
        return Err(TransportError::EndpointSignatureInvalid);
    }
    let peer = owner
        .reveal_peer_id(remote_doc)
        .map_err(TransportError::EndpointUndecryptable)?;
    transport.connect(&peer).await
}
