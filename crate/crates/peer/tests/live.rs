use std::time::Duration;

use molsync_core::{Kind, PeerId};
use molsync_peer::{connect, ActionScript, Client, ClientError, ClientOptions, Event, SessionOptions};
use molsync_relay::{serve, ServerConfig};
use tokio::net::TcpListener;

async fn relay() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(serve(listener, ServerConfig::default()));
    format!("ws://{addr}/ws")
}

fn opts(hub: bool) -> ClientOptions {
    ClientOptions {
        session: SessionOptions {
            hub_mode: hub,
            seed: Some(9),
            ..Default::default()
        },
        ..Default::default()
    }
}

fn script(text: &str) -> ActionScript {
    text.parse().unwrap()
}

const LINGER: Option<Duration> = Some(Duration::from_millis(300));

async fn join(url: &str, master: Option<&Client>, hub: bool) -> Client {
    connect(url, master.map(|m| m.id().clone()), opts(hub)).await.unwrap()
}

#[tokio::test]
async fn connect_without_and_with_master() {
    let url = relay().await;
    let a = join(&url, None, false).await;
    assert!(a.session().links().is_empty());
    assert_eq!(a.id().as_str().len(), 16);
    let b = join(&url, Some(&a), false).await;
    assert_eq!(b.session().links().iter().collect::<Vec<_>>(), [a.id()]);
}

#[tokio::test]
async fn unknown_master_is_typed_error() {
    let url = relay().await;
    let ghost: PeerId = "ZZZZZZZZZZZZZZZZ".parse().unwrap();
    match connect(&url, Some(ghost.clone()), opts(false)).await {
        Err(ClientError::PeerNotFound(p)) => assert_eq!(p, ghost),
        other => panic!("expected peer_not_found, got {:?}", other.map(|c| c.id().clone())),
    }
}

#[tokio::test]
async fn two_scripted_peers_exchange_chat() {
    let url = relay().await;
    let mut a = join(&url, None, false).await;
    let mut b = join(&url, Some(&a), false).await;
    let (ra, rb) = tokio::join!(
        a.run_script(script("50 chat hello from a"), LINGER),
        b.run_script(script("80 chat hello from b"), LINGER),
    );
    ra.unwrap();
    rb.unwrap();
    for c in [&a, &b] {
        let texts: Vec<_> = c.session().chat_log().iter().map(|l| l.text.as_str()).collect();
        assert!(
            texts.contains(&"hello from a") && texts.contains(&"hello from b"),
            "{texts:?}"
        );
    }
    let got_chat = |c: &Client| {
        c.transcript()
            .events()
            .iter()
            .any(|e| matches!(e, Event::Received { kind: "chat", .. }))
    };
    assert!(got_chat(&a) && got_chat(&b));
}

#[tokio::test]
async fn file_lands_in_staging_dir() {
    let url = relay().await;
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("water.xyz");
    let body: Vec<u8> = (0..50_000u32).map(|i| (i * 7 % 251) as u8).collect();
    std::fs::write(&src, &body).unwrap();

    let inbox = dir.path().join("inbox");
    let mut a = connect(
        &url,
        None,
        ClientOptions {
            staging_dir: Some(inbox.clone()),
            ..opts(false)
        },
    )
    .await
    .unwrap();
    let mut b = join(&url, Some(&a), false).await;
    let (ra, rb) = tokio::join!(
        a.run_script(ActionScript::default(), LINGER),
        b.run_script(script(&format!("20 send_file {}", src.display())), LINGER),
    );
    ra.unwrap();
    rb.unwrap();
    assert_eq!(a.saved_files().len(), 1);
    assert_eq!(std::fs::read(&a.saved_files()[0]).unwrap(), body);
    assert!(a.saved_files()[0].starts_with(&inbox));
    assert_eq!(b.session().file_acks().len(), 1);
    assert!(b.session().file_acks()[0].1);
    assert_eq!(b.session().stats().sent.count(Kind::FileChunk), 4);
}

#[tokio::test]
async fn hub_relays_spoke_updates_to_other_spokes() {
    let url = relay().await;
    let mut hub = join(&url, None, true).await;
    let mut b = join(&url, Some(&hub), false).await;
    let mut c = join(&url, Some(&hub), false).await;
    let (rh, rb, rc) = tokio::join!(
        hub.run_script(ActionScript::default(), LINGER),
        b.run_script(script("30 drag 0.8 0.6 0 0\n40 zoom 175\n60 command spin on"), LINGER),
        c.run_script(ActionScript::default(), LINGER),
    );
    rh.unwrap();
    rb.unwrap();
    rc.unwrap();
    for peer in [&hub, &c] {
        assert!(peer.session().model.camera_matches(&b.session().model, 1e-12));
        assert_eq!(peer.session().model.command_log, ["spin on"]);
    }
    // C heard B only through the hub.
    let from_b = c
        .transcript()
        .events()
        .iter()
        .any(|e| matches!(e, Event::Received { from, .. } if from == b.id().as_str()));
    assert!(!from_b);
    assert!(hub.session().stats().reshared >= 2);
}

#[tokio::test]
async fn script_disconnect_notifies_partner() {
    let url = relay().await;
    let mut a = join(&url, None, false).await;
    let mut b = join(&url, Some(&a), false).await;
    let (ra, rb) = tokio::join!(
        a.run_script(ActionScript::default(), LINGER),
        b.run_script(script("10 disconnect"), None),
    );
    ra.unwrap();
    rb.unwrap();
    assert!(a.session().links().is_empty());
}
