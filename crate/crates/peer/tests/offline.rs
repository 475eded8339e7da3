use molsync_core::{Kind, Payload, PeerId, UnitQuaternion};
use molsync_peer::{run_offline, ActionScript, Event, PeerSession, SessionOptions, Transcript};

fn session() -> PeerSession {
    PeerSession::new(
        "AAAAAAAAAAAAAAAA".parse::<PeerId>().unwrap(),
        SessionOptions {
            seed: Some(4),
            ..Default::default()
        },
    )
}

fn drag_script(n: u64, spacing: u64) -> ActionScript {
    let mut text = String::new();
    for i in 0..n {
        let a = (i as f64 * 0.01).to_radians() / 2.0;
        text += &format!("{} drag {} 0 {} 0\n", i * spacing, a.cos(), a.sin());
    }
    text.parse().unwrap()
}

// Emission count worked out from the drag times alone: after each send the
// next one happens at the later of "one interval on" and "the first drag
// after that send".
fn throttle_oracle(n: u64, spacing: u64, interval: u64) -> u64 {
    let drags: Vec<u64> = (0..n).map(|i| i * spacing).collect();
    let mut sends = 1;
    let mut last = drags[0];
    while let Some(&next_drag) = drags.iter().find(|&&d| d > last) {
        last = next_drag.max(last + interval);
        sends += 1;
    }
    sends
}

#[test]
fn hundred_rapid_drags_emit_twenty_one_frames() {
    assert_eq!(throttle_oracle(100, 10, 50), 21);
    let mut s = session();
    let mut t = Transcript::new();
    let sent = run_offline(&mut s, drag_script(100, 10), &mut t);
    assert_eq!(sent.len(), 21);
    assert!(sent.iter().all(|e| e.kind() == Kind::Rotation));
    let Payload::Rotation(last) = &sent.last().unwrap().payload else {
        unreachable!()
    };
    assert_eq!(last.orientation, s.model.orientation);
    assert_eq!(t.sent_count(), 21);
    // Spacing between emissions never drops below the interval.
    let times: Vec<u64> = t
        .events()
        .iter()
        .filter(|e| matches!(e, Event::Sent { .. }))
        .map(|e| e.at())
        .collect();
    assert!(times.windows(2).all(|w| w[1] - w[0] >= 50), "{times:?}");
}

#[test]
fn throttle_matches_oracle_across_spacings() {
    for (n, spacing) in [(10, 50), (7, 20), (40, 5), (3, 100), (1, 10)] {
        let mut s = session();
        let sent = run_offline(&mut s, drag_script(n, spacing), &mut Transcript::new());
        assert_eq!(
            sent.len() as u64,
            throttle_oracle(n, spacing, 50),
            "n={n} spacing={spacing}"
        );
    }
}

#[test]
fn empty_script_yields_empty_transcript() {
    let mut t = Transcript::new();
    assert!(run_offline(&mut session(), ActionScript::default(), &mut t).is_empty());
    assert!(t.events().is_empty());
}

#[test]
fn failed_actions_are_recorded_and_skipped() {
    let script: ActionScript = "0 send_file /definitely/not/here.pdb\n10 chat still going\n"
        .parse()
        .unwrap();
    let mut t = Transcript::new();
    let sent = run_offline(&mut session(), script, &mut t);
    assert_eq!(sent.len(), 1);
    assert!(t.events().iter().any(|e| matches!(e, Event::Error { at: 0, .. })));
    let lines = t.to_json_lines();
    assert_eq!(lines.lines().count(), t.events().len());
    assert!(lines
        .lines()
        .all(|l| serde_json::from_str::<serde_json::Value>(l).is_ok()));
}

#[test]
fn nothing_after_disconnect() {
    let script: ActionScript = "0 drag 1 0 0 0\n10 drag 0 1 0 0\n20 disconnect\n30 chat late\n"
        .parse()
        .unwrap();
    let mut s = session();
    let sent = run_offline(&mut s, script, &mut Transcript::new());
    // The 10 ms drag was still pending at disconnect and is dropped.
    assert_eq!(sent.len(), 1);
    assert!(s.is_closed());
    assert_eq!(
        s.model.orientation,
        UnitQuaternion::normalize(molsync_core::Quaternion::new(0.0, 1.0, 0.0, 0.0)).unwrap()
    );
}
