//! WebSocket driver for a [`PeerSession`].

use std::path::PathBuf;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use futures::{SinkExt, StreamExt};
use molsync_core::{decode_str, encode_envelope, Envelope, Payload, PeerId};
use tokio::net::TcpStream;
use tokio::time::{sleep, timeout, Instant};
use tokio_tungstenite::tungstenite::{self, Message};
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};
use tracing::{debug, warn};

use crate::runner::{encode_outgoing, ScriptRunner};
use crate::script::ActionScript;
use crate::session::{PeerSession, SessionOptions};
use crate::transcript::Transcript;

const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("transport: {0}")]
    Transport(#[from] tungstenite::Error),
    #[error("connection closed during {0}")]
    Closed(&'static str),
    #[error("timed out waiting for {0}")]
    Timeout(&'static str),
    #[error("peer not found: {0}")]
    PeerNotFound(PeerId),
    #[error("relay refused: {code}: {message}")]
    Refused { code: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Default)]
pub struct ClientOptions {
    pub session: SessionOptions,
    /// Received files are written here. `None` keeps them in memory only.
    pub staging_dir: Option<PathBuf>,
    /// Print transcript events to stdout as they happen.
    pub echo: bool,
}

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

pub struct Client {
    ws: Ws,
    session: PeerSession,
    transcript: Transcript,
    staging_dir: Option<PathBuf>,
    saved: Vec<PathBuf>,
}

async fn next_envelope(ws: &mut Ws, stage: &'static str) -> Result<(Envelope, usize), ClientError> {
    loop {
        let msg = timeout(HANDSHAKE_TIMEOUT, ws.next())
            .await
            .map_err(|_| ClientError::Timeout(stage))?
            .ok_or(ClientError::Closed(stage))??;
        match msg {
            Message::Text(t) => match decode_str(t.as_str()) {
                Ok(e) => return Ok((e, t.len())),
                Err(e) => warn!(error = %e, "undecodable frame during {stage}"),
            },
            Message::Close(_) => return Err(ClientError::Closed(stage)),
            _ => {}
        }
    }
}

/// Registers with the relay and, given a master, links to it before
/// returning.
pub async fn connect(url: &str, master: Option<PeerId>, opts: ClientOptions) -> Result<Client, ClientError> {
    let (mut ws, _) = connect_async(url).await?;
    let hello = Envelope::new(
        PeerId::server(),
        PeerId::server(),
        0,
        now_ms(),
        Payload::Hello {
            policy: Some(opts.session.policy),
        },
    );
    ws.send(Message::Text(encode_envelope(&hello).into())).await?;
    let (welcome, bytes) = next_envelope(&mut ws, "welcome").await?;
    let id = match &welcome.payload {
        Payload::Welcome { id } => id.clone(),
        Payload::Error { code, message } => {
            return Err(ClientError::Refused {
                code: code.clone(),
                message: message.clone(),
            })
        }
        other => {
            return Err(ClientError::Refused {
                code: "unexpected_kind".into(),
                message: format!("expected welcome, got {}", other.kind()),
            })
        }
    };
    let mut transcript = if opts.echo {
        Transcript::echoing()
    } else {
        Transcript::new()
    };
    transcript.peer = Some(id.clone());
    let mut session = PeerSession::new(id, opts.session);
    let now = now_ms();
    transcript.received(now, &welcome, bytes);
    session.on_receive(&welcome, bytes, now);
    let mut client = Client {
        ws,
        session,
        transcript,
        staging_dir: opts.staging_dir,
        saved: Vec::new(),
    };
    if let Some(master) = master {
        client.link(master).await?;
    }
    Ok(client)
}

impl Client {
    pub fn session(&self) -> &PeerSession {
        &self.session
    }

    pub fn session_mut(&mut self) -> &mut PeerSession {
        &mut self.session
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn id(&self) -> &PeerId {
        self.session.id()
    }

    /// Paths of files written to the staging directory so far.
    pub fn saved_files(&self) -> &[PathBuf] {
        &self.saved
    }

    async fn send_all(&mut self, envs: Vec<Envelope>, now: u64) -> Result<(), ClientError> {
        for e in envs {
            let text = encode_outgoing(&mut self.session, &mut self.transcript, &e, now);
            self.ws.send(Message::Text(text.into())).await?;
        }
        Ok(())
    }

    /// Sends a connect request and waits for the relay's answer.
    pub async fn link(&mut self, target: PeerId) -> Result<(), ClientError> {
        let now = now_ms();
        let req = self.session.connect(target.clone(), now);
        self.send_all(vec![req], now).await?;
        let deadline = Instant::now() + HANDSHAKE_TIMEOUT;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            let (e, bytes) = timeout(left, next_envelope(&mut self.ws, "connect_ok"))
                .await
                .map_err(|_| ClientError::Timeout("connect_ok"))??;
            self.on_envelope(&e, bytes).await?;
            match &e.payload {
                Payload::ConnectOk { peer } if *peer == target => return Ok(()),
                Payload::Error { code, .. } if code == "peer_not_found" => {
                    return Err(ClientError::PeerNotFound(target))
                }
                Payload::Error { code, message } if code == "self_connect" => {
                    return Err(ClientError::Refused {
                        code: code.clone(),
                        message: message.clone(),
                    })
                }
                _ => {}
            }
        }
    }

    async fn on_envelope(&mut self, e: &Envelope, bytes: usize) -> Result<(), ClientError> {
        let now = now_ms();
        self.transcript.received(now, e, bytes);
        let replies = self.session.on_receive(e, bytes, now);
        self.send_all(replies, now).await?;
        for f in self.session.take_completed_files() {
            let Some(dir) = &self.staging_dir else { continue };
            tokio::fs::create_dir_all(dir).await?;
            let path = dir.join(format!("{}-{}", f.manifest.file_id, sanitize(&f.manifest.name)));
            tokio::fs::write(&path, &f.bytes).await?;
            debug!(path = %path.display(), "file staged");
            self.saved.push(path);
        }
        Ok(())
    }

    /// Drives the session until the script finishes and `linger` has
    /// passed, the script disconnects, or the relay closes the socket.
    /// Without a linger the client runs until the socket closes.
    pub async fn run_script(&mut self, script: ActionScript, linger: Option<Duration>) -> Result<(), ClientError> {
        let base = now_ms();
        let mut runner = ScriptRunner::new(script, base);
        let mut finished_at: Option<u64> = None;
        loop {
            let now = now_ms();
            let mut out = self.session.tick(now);
            out.extend(runner.run_due(&mut self.session, now, &mut self.transcript));
            self.send_all(out, now).await?;
            if self.session.is_closed() {
                let _ = self.ws.close(None).await;
                return Ok(());
            }
            if runner.is_done() && self.session.next_deadline().is_none() {
                finished_at.get_or_insert(now);
            }
            let stop = finished_at.zip(linger).map(|(t, l)| t + l.as_millis() as u64);
            if stop.is_some_and(|s| now >= s) {
                let _ = self.ws.close(None).await;
                return Ok(());
            }
            let wake = [runner.next_due(), self.session.next_deadline(), stop]
                .into_iter()
                .flatten()
                .min();
            let nap = wake.map_or(Duration::from_secs(3600), |w| {
                Duration::from_millis(w.saturating_sub(now))
            });
            tokio::select! {
                msg = self.ws.next() => match msg {
                    Some(Ok(Message::Text(t))) => match decode_str(t.as_str()) {
                        Ok(e) => self.on_envelope(&e, t.len()).await?,
                        Err(err) => {
                            self.session.on_frame(t.as_str(), now_ms());
                            self.transcript.error(now_ms(), format!("undecodable frame: {err}"));
                        }
                    },
                    Some(Ok(Message::Close(_))) | None => return Ok(()),
                    Some(Ok(_)) => {}
                    Some(Err(e)) => return Err(e.into()),
                },
                _ = sleep(nap) => {}
            }
        }
    }
}

fn sanitize(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') {
                c
            } else {
                '_'
            }
        })
        .collect();
    match s.trim_start_matches('.') {
        "" => "file".into(),
        t => t.to_owned(),
    }
}

#[cfg(test)]
mod tests {
    use super::sanitize;

    #[test]
    fn staged_names_stay_in_directory() {
        assert_eq!(sanitize("../../etc/passwd"), "_.._etc_passwd");
        assert_eq!(sanitize("caffeine.pdb"), "caffeine.pdb");
        assert_eq!(sanitize(".."), "file");
    }
}
