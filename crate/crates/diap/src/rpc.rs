// SPDX-License-Identifier: Apache-2.0

//! Request/response over a direct byte stream.
//!
//! Each message is one frame holding a canonical-JSON [`RpcEnvelope`].
//! A channel carries one serve loop on one side and any number of
//! concurrent calls from the other; responses are matched by id.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use async_trait::async_trait;
use diap_core::{RpcEnvelope, RpcKind};
use thiserror::Error;
use tokio::io::{AsyncRead, AsyncWrite, AsyncWriteExt, ReadHalf, WriteHalf};
use tokio::sync::oneshot;
use tokio::task::{JoinHandle, JoinSet};

use crate::frame::{read_frame, write_frame, FrameError};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// Any reliable, ordered, bidirectional byte stream.
pub trait Duplex: AsyncRead + AsyncWrite + Unpin + Send {}
impl<T: AsyncRead + AsyncWrite + Unpin + Send> Duplex for T {}

pub type DirectChannel = Box<dyn Duplex>;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum RpcError {
    #[error("timeout")]
    Timeout,
    #[error("channel closed")]
    ChannelClosed,
    #[error("rpc error: {0}")]
    Remote(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<FrameError> for RpcError {
    fn from(e: FrameError) -> Self {
        match e {
            FrameError::Protocol(m) => RpcError::Protocol(m),
            FrameError::Io(e) => RpcError::Io(e.to_string()),
        }
    }
}

type Pending = Arc<Mutex<HashMap<u64, oneshot::Sender<Result<Vec<u8>, RpcError>>>>>;

struct ClientShared {
    pending: Pending,
    highest_sent: AtomicU64,
    closed: Mutex<Option<RpcError>>,
}

pub struct RpcClient {
    writer: tokio::sync::Mutex<WriteHalf<DirectChannel>>,
    shared: Arc<ClientShared>,
    next_id: AtomicU64,
    reader: JoinHandle<()>,
}

impl RpcClient {
    pub fn new(channel: DirectChannel) -> Self {
        let (rd, wr) = tokio::io::split(channel);
        let shared = Arc::new(ClientShared {
            pending: Arc::default(),
            highest_sent: AtomicU64::new(0),
            closed: Mutex::new(None),
        });
        let reader = tokio::spawn(client_reader(rd, shared.clone()));
        RpcClient {
            writer: tokio::sync::Mutex::new(wr),
            shared,
            next_id: AtomicU64::new(1),
            reader,
        }
    }

    pub async fn call(
        &self,
        method: &str,
        payload: Vec<u8>,
        timeout: Duration,
    ) -> Result<Vec<u8>, RpcError> {
        if let Some(e) = self.shared.closed.lock().unwrap().clone() {
            return Err(e);
        }
        let id = self.next_id.fetch_add(1, Ordering::SeqCst);
        let (tx, rx) = oneshot::channel();
        self.shared.pending.lock().unwrap().insert(id, tx);
        self.shared.highest_sent.fetch_max(id, Ordering::SeqCst);
        let frame = RpcEnvelope::request(id, method, payload).to_json();
        let written = {
            let mut w = self.writer.lock().await;
            write_frame(&mut *w, &frame).await
        };
        if let Err(e) = written {
            self.shared.pending.lock().unwrap().remove(&id);
            return Err(e.into());
        }
        match tokio::time::timeout(timeout, rx).await {
            Ok(Ok(result)) => result,
            Ok(Err(_)) => Err(RpcError::ChannelClosed),
            Err(_) => {
                self.shared.pending.lock().unwrap().remove(&id);
                Err(RpcError::Timeout)
            }
        }
    }

    pub async fn call_default(&self, method: &str, payload: Vec<u8>) -> Result<Vec<u8>, RpcError> {
        self.call(method, payload, DEFAULT_TIMEOUT).await
    }

    pub async fn close(&self) {
        let _ = self.writer.lock().await.shutdown().await;
    }
}

impl Drop for RpcClient {
    fn drop(&mut self) {
        self.reader.abort();
    }
}

async fn client_reader(mut rd: ReadHalf<DirectChannel>, shared: Arc<ClientShared>) {
    let reason = loop {
        let bytes = match read_frame(&mut rd).await {
            Ok(Some(b)) => b,
            Ok(None) => break RpcError::ChannelClosed,
            Err(e) => break e.into(),
        };
        let env = match RpcEnvelope::from_json(&bytes) {
            Ok(env) if env.kind == RpcKind::Response => env,
            Ok(_) => break RpcError::Protocol("request received by client".into()),
            Err(e) => break RpcError::Protocol(e.to_string()),
        };
        let waiter = shared.pending.lock().unwrap().remove(&env.id);
        match waiter {
            Some(tx) => {
                let result = match env.error {
                    Some(e) => Err(RpcError::Remote(e)),
                    None => Ok(env.payload),
                };
                let _ = tx.send(result);
            }
            // A late answer to a call that already timed out.
            None if env.id <= shared.highest_sent.load(Ordering::SeqCst) => {}
            None => break RpcError::Protocol(format!("response to unknown id {}", env.id)),
        }
    };
    *shared.closed.lock().unwrap() = Some(reason.clone());
    let waiters: Vec<_> = shared.pending.lock().unwrap().drain().collect();
    for (_, tx) in waiters {
        let _ = tx.send(Err(match &reason {
            RpcError::Protocol(_) => reason.clone(),
            _ => RpcError::ChannelClosed,
        }));
    }
}

#[async_trait]
pub trait RpcHandler: Send + Sync {
    async fn handle(&self, method: &str, payload: Vec<u8>) -> Result<Vec<u8>, String>;
}

/// Answers `ping` and `echo` with the request payload.
pub struct EchoHandler;

#[async_trait]
impl RpcHandler for EchoHandler {
    async fn handle(&self, method: &str, payload: Vec<u8>) -> Result<Vec<u8>, String> {
        match method {
            "ping" | "echo" => Ok(payload),
            other => Err(format!("unknown method {other}")),
        }
    }
}

/// Adapts a synchronous closure.
pub struct FnHandler<F>(pub F);

#[async_trait]
impl<F> RpcHandler for FnHandler<F>
where
    F: Fn(&str, Vec<u8>) -> Result<Vec<u8>, String> + Send + Sync,
{
    async fn handle(&self, method: &str, payload: Vec<u8>) -> Result<Vec<u8>, String> {
        (self.0)(method, payload)
    }
}

/// Serves requests until the peer closes. Requests are handled
/// concurrently. A malformed or oversize frame ends the loop with a
/// protocol error and closes the channel.
pub async fn rpc_serve(channel: DirectChannel, handler: Arc<dyn RpcHandler>) -> Result<(), RpcError> {
    let (mut rd, wr) = tokio::io::split(channel);
    let writer = Arc::new(tokio::sync::Mutex::new(wr));
    let mut inflight = JoinSet::new();
    let outcome = loop {
        let bytes = match read_frame(&mut rd).await {
            Ok(Some(b)) => b,
            Ok(None) => break Ok(()),
            Err(e) => break Err(RpcError::from(e)),
        };
        let env = match RpcEnvelope::from_json(&bytes) {
            Ok(env) if env.kind == RpcKind::Request => env,
            Ok(_) => break Err(RpcError::Protocol("response received by server".into())),
            Err(e) => break Err(RpcError::Protocol(e.to_string())),
        };
        let handler = handler.clone();
        let writer = writer.clone();
        inflight.spawn(async move {
            let method = env.method.unwrap_or_default();
            let result = handler.handle(&method, env.payload).await;
            let frame = RpcEnvelope::response(env.id, result).to_json();
            let mut w = writer.lock().await;
            write_frame(&mut *w, &frame).await
        });
        while inflight.try_join_next().is_some() {}
    };
    match outcome {
        Ok(()) => {
            while inflight.join_next().await.is_some() {}
        }
        Err(_) => inflight.abort_all(),
    }
    let _ = writer.lock().await.shutdown().await;
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> (DirectChannel, DirectChannel) {
        let (a, b) = tokio::io::duplex(1 << 16);
        (Box::new(a), Box::new(b))
    }

    #[tokio::test]
    async fn echo_and_errors() {
        let (c, s) = pair();
        let server = tokio::spawn(rpc_serve(s, Arc::new(EchoHandler)));
        let client = RpcClient::new(c);
        for i in 0..3u8 {
            assert_eq!(client.call_default("ping", vec![i]).await.unwrap(), vec![i]);
        }
        assert_eq!(
            client.call_default("nope", vec![]).await,
            Err(RpcError::Remote("unknown method nope".into()))
        );
        assert_eq!(client.call_default("echo", b"ok".to_vec()).await.unwrap(), b"ok");
        client.close().await;
        assert_eq!(server.await.unwrap(), Ok(()));
    }

    struct Slow;

    #[async_trait]
    impl RpcHandler for Slow {
        async fn handle(&self, method: &str, payload: Vec<u8>) -> Result<Vec<u8>, String> {
            if method == "slow" {
                tokio::time::sleep(Duration::from_millis(200)).await;
            }
            Ok(payload)
        }
    }

    #[tokio::test]
    async fn timeout_leaves_channel_usable() {
        let (c, s) = pair();
        tokio::spawn(rpc_serve(s, Arc::new(Slow)));
        let client = RpcClient::new(c);
        assert_eq!(
            client.call("slow", vec![1], Duration::from_millis(20)).await,
            Err(RpcError::Timeout)
        );
        assert_eq!(
            client.call("fast", vec![2], Duration::from_secs(5)).await.unwrap(),
            vec![2]
        );
    }

    #[tokio::test]
    async fn oversize_frame_closes_server() {
        let (mut c, s) = pair();
        let server = tokio::spawn(rpc_serve(s, Arc::new(EchoHandler)));
        c.write_all(&(16 * 1024 * 1024u32 + 1).to_be_bytes()).await.unwrap();
        assert!(matches!(server.await.unwrap(), Err(RpcError::Protocol(_))));
    }

    #[tokio::test]
    async fn malformed_envelope_closes_server() {
        let (mut c, s) = pair();
        let server = tokio::spawn(rpc_serve(s, Arc::new(EchoHandler)));
        write_frame(&mut c, b"{not json").await.unwrap();
        assert!(matches!(server.await.unwrap(), Err(RpcError::Protocol(_))));
    }
}
