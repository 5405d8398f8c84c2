// SPDX-License-Identifier: Apache-2.0

//! Topic broadcast. Delivery is at-least-once to every subscriber that
//! subscribed before the publish; there is no ordering across publishers
//! and no history.
//!
//! [`InProcessBus`] is for single-process use and tests. [`TcpBusHub`] and
//! [`TcpBus`] fan out over loopback TCP so several processes can share a
//! topic.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::mpsc;
use tokio::task::JoinHandle;

use crate::frame::{read_frame, write_frame, FrameError};

#[derive(Debug, Error)]
pub enum BusError {
    #[error("bus closed")]
    Closed,
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[async_trait]
pub trait BroadcastBus: Send + Sync {
    async fn publish(&self, topic: &str, payload: Vec<u8>) -> Result<(), BusError>;
    async fn subscribe(&self, topic: &str) -> Result<Subscription, BusError>;
}

pub struct Subscription {
    rx: mpsc::UnboundedReceiver<Vec<u8>>,
    _guard: Option<JoinHandle<()>>,
}

impl Subscription {
    /// Next payload, or `None` once the bus is gone.
    pub async fn recv(&mut self) -> Option<Vec<u8>> {
        self.rx.recv().await
    }

    /// A payload if one is already waiting.
    pub fn try_recv(&mut self) -> Option<Vec<u8>> {
        self.rx.try_recv().ok()
    }
}

impl Drop for Subscription {
    fn drop(&mut self) {
        if let Some(h) = &self._guard {
            h.abort();
        }
    }
}

type Subscribers = Mutex<HashMap<String, Vec<mpsc::UnboundedSender<Vec<u8>>>>>;

fn fan_out(subs: &Subscribers, topic: &str, payload: &[u8], copies: usize) {
    let mut map = subs.lock().unwrap();
    if let Some(list) = map.get_mut(topic) {
        list.retain(|tx| (0..copies).all(|_| tx.send(payload.to_vec()).is_ok()));
    }
}

/// In-memory bus. With a duplication factor above one, every payload is
/// delivered that many times, imitating gossip redelivery.
#[derive(Default)]
pub struct InProcessBus {
    subs: Subscribers,
    copies: usize,
}

impl InProcessBus {
    pub fn new() -> Self {
        Self::with_duplication(1)
    }

    pub fn with_duplication(copies: usize) -> Self {
        InProcessBus {
            subs: Mutex::new(HashMap::new()),
            copies: copies.max(1),
        }
    }
}

#[async_trait]
impl BroadcastBus for InProcessBus {
    async fn publish(&self, topic: &str, payload: Vec<u8>) -> Result<(), BusError> {
        fan_out(&self.subs, topic, &payload, self.copies.max(1));
        Ok(())
    }

    async fn subscribe(&self, topic: &str) -> Result<Subscription, BusError> {
        let (tx, rx) = mpsc::unbounded_channel();
        self.subs
            .lock()
            .unwrap()
            .entry(topic.to_string())
            .or_default()
            .push(tx);
        Ok(Subscription { rx, _guard: None })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "camelCase")]
enum HubFrame {
    Sub { topic: String },
    SubAck,
    Pub { topic: String, payload: String },
    Msg { payload: String },
}

impl HubFrame {
    fn encode(&self) -> Vec<u8> {
        diap_core::canonical::to_vec(self).expect("hub frame serializes")
    }

    fn decode(bytes: &[u8]) -> Result<Self, FrameError> {
        serde_json::from_slice(bytes).map_err(|e| FrameError::Protocol(e.to_string()))
    }
}

/// Loopback fan-out server. Dropping the hub stops it.
pub struct TcpBusHub {
    addr: SocketAddr,
    task: JoinHandle<()>,
}

impl TcpBusHub {
    pub async fn bind(addr: SocketAddr) -> Result<Self, BusError> {
        let listener = TcpListener::bind(addr).await?;
        let addr = listener.local_addr()?;
        let subs: Arc<Subscribers> = Arc::default();
        let task = tokio::spawn(async move {
            while let Ok((stream, _)) = listener.accept().await {
                let subs = subs.clone();
                tokio::spawn(async move {
                    let _ = serve_hub_conn(stream, subs).await;
                });
            }
        });
        Ok(TcpBusHub { addr, task })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }
}

impl Drop for TcpBusHub {
    fn drop(&mut self) {
        self.task.abort();
    }
}

async fn serve_hub_conn(stream: TcpStream, subs: Arc<Subscribers>) -> Result<(), BusError> {
    let (mut rd, mut wr) = stream.into_split();
    let (tx, mut rx) = mpsc::unbounded_channel::<Vec<u8>>();
    let writer = tokio::spawn(async move {
        while let Some(frame) = rx.recv().await {
            if write_frame(&mut wr, &frame).await.is_err() {
                break;
            }
        }
    });
    let result = async {
        while let Some(bytes) = read_frame(&mut rd).await? {
            match HubFrame::decode(&bytes)? {
                HubFrame::Sub { topic } => {
                    let (msg_tx, mut msg_rx) = mpsc::unbounded_channel::<Vec<u8>>();
                    subs.lock().unwrap().entry(topic).or_default().push(msg_tx);
                    let out = tx.clone();
                    tokio::spawn(async move {
                        while let Some(p) = msg_rx.recv().await {
                            let f = HubFrame::Msg {
                                payload: B64.encode(p),
                            };
                            if out.send(f.encode()).is_err() {
                                break;
                            }
                        }
                    });
                    let _ = tx.send(HubFrame::SubAck.encode());
                }
                HubFrame::Pub { topic, payload } => {
                    let payload = B64
                        .decode(payload)
                        .map_err(|e| FrameError::Protocol(e.to_string()))?;
                    fan_out(&subs, &topic, &payload, 1);
                }
                _ => return Err(FrameError::Protocol("unexpected frame at hub".into()).into()),
            }
        }
        Ok(())
    }
    .await;
    drop(tx);
    let _ = writer.await;
    result
}

/// Client side of [`TcpBusHub`]. Each subscription uses its own
/// connection; publishes share one.
pub struct TcpBus {
    hub: SocketAddr,
    publisher: tokio::sync::Mutex<Option<TcpStream>>,
}

impl TcpBus {
    pub fn new(hub: SocketAddr) -> Self {
        TcpBus {
            hub,
            publisher: tokio::sync::Mutex::new(None),
        }
    }
}

#[async_trait]
impl BroadcastBus for TcpBus {
    async fn publish(&self, topic: &str, payload: Vec<u8>) -> Result<(), BusError> {
        let mut conn = self.publisher.lock().await;
        if conn.is_none() {
            *conn = Some(TcpStream::connect(self.hub).await?);
        }
        let frame = HubFrame::Pub {
            topic: topic.into(),
            payload: B64.encode(payload),
        };
        let stream = conn.as_mut().expect("connected above");
        if let Err(e) = write_frame(stream, &frame.encode()).await {
            *conn = None;
            return Err(e.into());
        }
        Ok(())
    }

    async fn subscribe(&self, topic: &str) -> Result<Subscription, BusError> {
        let mut stream = TcpStream::connect(self.hub).await?;
        write_frame(&mut stream, &HubFrame::Sub { topic: topic.into() }.encode()).await?;
        match read_frame(&mut stream).await? {
            Some(b) if matches!(HubFrame::decode(&b)?, HubFrame::SubAck) => {}
            _ => return Err(BusError::Closed),
        }
        let (tx, rx) = mpsc::unbounded_channel();
        let task = tokio::spawn(async move {
            while let Ok(Some(bytes)) = read_frame(&mut stream).await {
                let Ok(HubFrame::Msg { payload }) = HubFrame::decode(&bytes) else {
                    break;
                };
                let Ok(p) = B64.decode(payload) else { break };
                if tx.send(p).is_err() {
                    break;
                }
            }
        });
        Ok(Subscription {
            rx,
            _guard: Some(task),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[tokio::test]
    async fn in_process_fan_out() {
        let bus = InProcessBus::new();
        bus.publish("t", b"early".to_vec()).await.unwrap();
        let mut a = bus.subscribe("t").await.unwrap();
        let mut b = bus.subscribe("t").await.unwrap();
        let mut other = bus.subscribe("u").await.unwrap();
        bus.publish("t", b"x".to_vec()).await.unwrap();
        assert_eq!(a.recv().await.unwrap(), b"x");
        assert_eq!(b.recv().await.unwrap(), b"x");
        assert!(a.try_recv().is_none());
        assert!(other.try_recv().is_none());
    }

    #[tokio::test]
    async fn duplication() {
        let bus = InProcessBus::with_duplication(2);
        let mut a = bus.subscribe("t").await.unwrap();
        bus.publish("t", b"x".to_vec()).await.unwrap();
        assert_eq!(a.recv().await.unwrap(), b"x");
        assert_eq!(a.recv().await.unwrap(), b"x");
        assert!(a.try_recv().is_none());
    }

    #[tokio::test]
    async fn tcp_fan_out() {
        let hub = TcpBusHub::bind("127.0.0.1:0".parse().unwrap()).await.unwrap();
        let p = TcpBus::new(hub.local_addr());
        let s = TcpBus::new(hub.local_addr());
        let mut a = s.subscribe("t").await.unwrap();
        let mut b = s.subscribe("t").await.unwrap();
        for i in 0..3u8 {
            p.publish("t", vec![i; 10]).await.unwrap();
        }
        for sub in [&mut a, &mut b] {
            let mut got: Vec<_> = Vec::new();
            for _ in 0..3 {
                got.push(sub.recv().await.unwrap());
            }
            got.sort();
            assert_eq!(got, (0..3u8).map(|i| vec![i; 10]).collect::<Vec<_>>());
        }
    }
}
