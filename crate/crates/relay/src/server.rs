//! WebSocket front end for [`Relay`].
//!
//! One text frame carries one envelope. The registry sits behind a single
//! mutex so every mutation is totally ordered; deliveries are pushed onto
//! per-connection queues and each connection task drains its own queue, so a
//! slow reader never holds up anyone else.

use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use molsync_core::{encode_envelope, Envelope, Kind, Payload, PeerId};
use tokio::net::TcpListener;
use tokio::sync::Notify;
use tokio::time::{interval_at, timeout, Instant};
use tracing::{debug, info, warn};

use crate::queue::{OutboundQueue, PushOutcome, DEFAULT_QUEUE_CAP};
use crate::registry::{codes, Delivery, Relay, RelayConfig, DEFAULT_MAX_PEERS};

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub max_peers: usize,
    pub id_seed: Option<u64>,
    pub queue_cap: usize,
    pub heartbeat: Duration,
    /// Unanswered pings tolerated before the connection is dropped.
    pub missed_pongs: u32,
    pub hello_timeout: Duration,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            max_peers: DEFAULT_MAX_PEERS,
            id_seed: None,
            queue_cap: DEFAULT_QUEUE_CAP,
            heartbeat: Duration::from_secs(15),
            missed_pongs: 2,
            hello_timeout: Duration::from_secs(10),
        }
    }
}

struct Conn {
    queue: Mutex<OutboundQueue>,
    notify: Notify,
}

impl Conn {
    fn new(cap: usize) -> Arc<Self> {
        Arc::new(Self {
            queue: Mutex::new(OutboundQueue::new(cap)),
            notify: Notify::new(),
        })
    }

    fn push(&self, d: &Delivery) {
        let outcome = self.queue.lock().unwrap().push(d.kind, d.frame.clone());
        if outcome != PushOutcome::Queued {
            debug!(to = %d.to, ?outcome, "outbound queue full");
        }
        self.notify.notify_one();
    }

    fn pop(&self) -> Option<Arc<str>> {
        self.queue.lock().unwrap().pop()
    }
}

struct Shared {
    relay: Mutex<Relay<Arc<Conn>>>,
    config: ServerConfig,
}

impl Shared {
    fn deliver(relay: &Relay<Arc<Conn>>, deliveries: &[Delivery]) {
        for d in deliveries {
            match relay.peer(&d.to) {
                Some(entry) => entry.conn.push(d),
                None => debug!(to = %d.to, "delivery to departed peer"),
            }
        }
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

pub fn app(config: ServerConfig) -> Router {
    let relay = Relay::new(RelayConfig {
        max_peers: config.max_peers,
        id_seed: config.id_seed,
        record_drops: false,
    });
    let shared = Arc::new(Shared {
        relay: Mutex::new(relay),
        config,
    });
    Router::new()
        .route("/ws", get(ws_handler))
        .route("/healthz", get(|| async { "ok" }))
        .with_state(shared)
}

/// Serves until the listener fails.
pub async fn serve(listener: TcpListener, config: ServerConfig) -> std::io::Result<()> {
    info!(addr = ?listener.local_addr()?, "relay listening");
    axum::serve(listener, app(config)).await
}

async fn ws_handler(ws: WebSocketUpgrade, State(shared): State<Arc<Shared>>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| handle_socket(socket, shared))
}

async fn handle_socket(socket: WebSocket, shared: Arc<Shared>) {
    let (mut sink, mut stream) = socket.split();
    let conn = Conn::new(shared.config.queue_cap);

    let first = match timeout(shared.config.hello_timeout, stream.next()).await {
        Ok(Some(Ok(Message::Text(text)))) => text,
        _ => return,
    };
    let registered = shared
        .relay
        .lock()
        .unwrap()
        .hello_frame(conn.clone(), first.as_str(), now_ms());
    let id: PeerId = match registered {
        Ok((id, welcome)) => {
            conn.push(&welcome);
            id
        }
        Err(reply) => {
            let _ = sink.send(Message::Text(reply.frame.as_ref().into())).await;
            let _ = sink.close().await;
            return;
        }
    };
    info!(peer = %id, "peer joined");

    let period = shared.config.heartbeat;
    let mut ping = interval_at(Instant::now() + period, period);
    let mut outstanding = 0u32;

    loop {
        tokio::select! {
            msg = stream.next() => match msg {
                Some(Ok(Message::Text(text))) => {
                    let mut relay = shared.relay.lock().unwrap();
                    let out = relay.handle_frame(&id, text.as_str(), now_ms());
                    Shared::deliver(&relay, &out);
                }
                Some(Ok(Message::Binary(_))) => {
                    let err = Envelope::new(
                        PeerId::server(),
                        id.clone(),
                        0,
                        now_ms(),
                        Payload::error(codes::BINARY_UNSUPPORTED, "send envelopes as text frames"),
                    );
                    conn.push(&Delivery {
                        to: id.clone(),
                        kind: Kind::Error,
                        frame: encode_envelope(&err).into(),
                    });
                }
                Some(Ok(Message::Pong(_))) => outstanding = 0,
                Some(Ok(Message::Ping(_))) => {}
                Some(Ok(Message::Close(_))) | None => break,
                Some(Err(e)) => {
                    debug!(peer = %id, error = %e, "read failed");
                    break;
                }
            },
            _ = conn.notify.notified() => {
                let mut failed = false;
                while let Some(frame) = conn.pop() {
                    if sink.send(Message::Text(frame.as_ref().into())).await.is_err() {
                        failed = true;
                        break;
                    }
                }
                if failed {
                    break;
                }
            }
            _ = ping.tick() => {
                if outstanding >= shared.config.missed_pongs {
                    warn!(peer = %id, "heartbeat lost");
                    break;
                }
                outstanding += 1;
                if sink.send(Message::Ping(Vec::new().into())).await.is_err() {
                    break;
                }
            }
        }
    }

    let mut relay = shared.relay.lock().unwrap();
    let (_, notes) = relay.handle_disconnect(&id, now_ms());
    Shared::deliver(&relay, &notes);
    info!(peer = %id, "peer left");
}
