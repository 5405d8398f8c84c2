// SPDX-License-Identifier: Apache-2.0

//! DIAP agent SDK.
//!
//! Builds on [`diap_core`] with everything that needs an operating
//! system: a content store with a signed name registry, the challenge
//! table, a DID document cache, ownership verification and mutual
//! authentication, an authenticated broadcast layer, length-prefixed RPC
//! over direct streams, and the `diap` command line.
//!
//! ```
//! use diap::{mutual_authenticate, AgentIdentity, Context};
//!
//! let ctx = Context::in_memory();
//! let alice = AgentIdentity::create(&ctx.store).unwrap();
//! let bob = AgentIdentity::create(&ctx.store).unwrap();
//! assert!(mutual_authenticate(&alice, &bob, &ctx));
//! ```

pub mod auth;
pub mod bus;
pub mod cache;
pub mod cli;
pub mod clock;
pub mod context;
pub mod frame;
pub mod identity;
pub mod nonce;
pub mod pubsub;
pub mod rpc;
pub mod store;
pub mod transport;

pub use diap_core;

pub use crate::auth::{
    authenticate, mutual_authenticate, mutual_authenticate_report, AuthFailure, AuthSession,
    Prover, SessionState, Verifier,
};
pub use crate::cache::DidCache;
pub use crate::clock::{Clock, ManualClock, SystemClock};
pub use crate::context::{resolve_document, Context, ResolveError};
pub use crate::identity::{prove_ownership, register_identity, AgentIdentity, IdentityError};
pub use crate::nonce::{ChallengeTable, ConsumerId, NonceRejection};
pub use crate::store::{ContentStore, StoreError};
pub use crate::bus::{BroadcastBus, InProcessBus, TcpBus, TcpBusHub};
pub use crate::pubsub::{MessageVerifier, PubsubAuthenticator, VerifiedSubscription};
pub use crate::rpc::{rpc_serve, DirectChannel, EchoHandler, RpcClient, RpcError, RpcHandler};
pub use crate::transport::{
    connect_via_identity, listen_as, AddressBook, MemoryTransport, TcpTransport, Transport,
    TransportError,
};
