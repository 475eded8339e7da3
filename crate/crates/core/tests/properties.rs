use molsync_core::strategies;
use molsync_core::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore};

type Mat = [[f64; 3]; 3];

// Independent rotation-matrix route for checking quaternion composition.
fn matrix_of(q: [f64; 4]) -> Mat {
    let [w, x, y, z] = q;
    [
        [
            w * w + x * x - y * y - z * z,
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            w * w - x * x + y * y - z * z,
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            w * w - x * x - y * y + z * z,
        ],
    ]
}

fn matmul(a: &Mat, b: &Mat) -> Mat {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

// Shepperd's method: pick the largest diagonal combination for stability.
fn quaternion_of(m: &Mat) -> [f64; 4] {
    let tr = m[0][0] + m[1][1] + m[2][2];
    let cands = [tr, m[0][0], m[1][1], m[2][2]];
    let big = (0..4).max_by(|&a, &b| cands[a].total_cmp(&cands[b])).unwrap();
    match big {
        0 => {
            let s = (1.0 + tr).sqrt() * 2.0;
            [
                s / 4.0,
                (m[2][1] - m[1][2]) / s,
                (m[0][2] - m[2][0]) / s,
                (m[1][0] - m[0][1]) / s,
            ]
        }
        1 => {
            let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
            [
                (m[2][1] - m[1][2]) / s,
                s / 4.0,
                (m[0][1] + m[1][0]) / s,
                (m[0][2] + m[2][0]) / s,
            ]
        }
        2 => {
            let s = (1.0 - m[0][0] + m[1][1] - m[2][2]).sqrt() * 2.0;
            [
                (m[0][2] - m[2][0]) / s,
                (m[0][1] + m[1][0]) / s,
                s / 4.0,
                (m[1][2] + m[2][1]) / s,
            ]
        }
        _ => {
            let s = (1.0 - m[0][0] - m[1][1] + m[2][2]).sqrt() * 2.0;
            [
                (m[1][0] - m[0][1]) / s,
                (m[0][2] + m[2][0]) / s,
                (m[1][2] + m[2][1]) / s,
                s / 4.0,
            ]
        }
    }
}

fn max_diff_up_to_sign(a: [f64; 4], b: [f64; 4]) -> f64 {
    let pos = (0..4).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max);
    let neg = (0..4).map(|i| (a[i] + b[i]).abs()).fold(0.0, f64::max);
    pos.min(neg)
}

fn random_unit(rng: &mut impl Rng) -> UnitQuaternion {
    loop {
        let c: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        if c.iter().map(|v| v * v).sum::<f64>() > 1e-4 {
            return UnitQuaternion::normalize(Quaternion::new(c[0], c[1], c[2], c[3])).unwrap();
        }
    }
}

#[test]
fn composition_matches_matrix_product() {
    let mut rng = seeded_rng(2024);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let q1 = random_unit(&mut rng);
        let q2 = random_unit(&mut rng);
        let got = compose_rotation(q1.quaternion(), q2.quaternion()).unwrap();
        let raw = quaternion_of(&matmul(&matrix_of(q2.to_array()), &matrix_of(q1.to_array())));
        // Inputs are unit only to 1e-9, so the recovered quaternion is too.
        let n = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        let want = raw.map(|v| v / n);
        let d = max_diff_up_to_sign(got.to_array(), want);
        worst = worst.max(d);
        assert!(d <= 1e-9, "{d:e}: {q1:?} {q2:?}");
        assert!((got.quaternion().norm_sq() - 1.0).abs() <= 1e-9);
    }
    println!("worst component deviation {worst:e}");
}

#[test]
fn gating_table_is_total_and_exact() {
    for p in Policy::all() {
        for kind in Kind::ALL {
            let (out, inb) = match kind {
                Kind::Rotation => (p.send_rotations, p.apply_rotations),
                Kind::State => (p.send_states, p.apply_states),
                Kind::Command => (p.send_commands, p.apply_commands),
                _ => (true, true),
            };
            assert_eq!(gate_outbound(kind, &p), out, "{kind} {p}");
            assert_eq!(gate_inbound(kind, &p), inb, "{kind} {p}");
        }
    }
}

#[test]
fn file_roundtrip_at_awkward_sizes() {
    let mut rng = seeded_rng(11);
    let sizes = [0usize, 1, 16383, 16384, 16385, 100_000, 1 << 20, (4 << 20) - 1, 4 << 20];
    for (i, &size) in sizes.iter().enumerate() {
        let mut bytes = vec![0u8; size];
        rng.fill_bytes(&mut bytes);
        let chunk_size = [16384u64, 1000, 7][i % 3];
        let (m, mut chunks) = chunk_file(&bytes, chunk_size, "f", FileId::random(&mut rng)).unwrap();
        assert_eq!(m.chunk_count, (size as u64).div_ceil(chunk_size));
        let dupes: Vec<_> = chunks.iter().step_by(3).cloned().collect();
        chunks.extend(dupes);
        chunks.shuffle(&mut rng);
        assert_eq!(reassemble(&m, &chunks).unwrap(), bytes);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn codec_roundtrip(e in strategies::envelope()) {
        let text = encode_envelope(&e);
        prop_assert_eq!(decode_str(&text).unwrap(), e.clone());
        // Deterministic bytes.
        prop_assert_eq!(encode_envelope(&e), text);
    }

    #[test]
    fn view_updates_are_small(e in strategies::view_update()) {
        let text = encode_envelope(&e);
        prop_assert!(text.len() <= SMALL_FRAME_BYTES, "{} bytes", text.len());
    }

    #[test]
    fn quaternion_components_have_at_most_nine_digits(q in strategies::raw_unit_quaternion()) {
        let f = RotationFrame::new(q, 0).unwrap();
        let e = Envelope::new(PeerId::server(), Recipient::Broadcast, 0, 0, Payload::Rotation(f));
        let v: serde_json::Value = serde_json::from_str(&encode_envelope(&e)).unwrap();
        for c in v["payload"]["q"].as_array().unwrap() {
            let text = c.to_string();
            let mantissa = text.split(['e', 'E']).next().unwrap();
            let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
            let significant = digits.trim_start_matches('0').trim_end_matches('0');
            prop_assert!(significant.len() <= 9, "{}", text);
        }
    }

    #[test]
    fn decode_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
        let _ = decode_envelope(&bytes);
    }

    #[test]
    fn decode_survives_mutations(e in strategies::envelope(), pos in any::<prop::sample::Index>(), byte in any::<u8>()) {
        let mut bytes = encode_envelope(&e).into_bytes();
        let i = pos.index(bytes.len());
        bytes[i] = byte;
        let _ = decode_envelope(&bytes);
        bytes.truncate(i);
        let _ = decode_envelope(&bytes);
    }

    #[test]
    fn lww_is_order_insensitive(n in 1usize..8, seed in any::<u64>()) {
        let origin: PeerId = "OOOOOOOOOOOOOOOO".parse().unwrap();
        let mut rng = seeded_rng(seed);
        let envs: Vec<Envelope> = (1..=n as u64)
            .map(|seq| {
                let q = random_unit(&mut rng);
                ViewState::new(q.quaternion(), rng.random_range(1.0..500.0), [seq as f64, 0.0, 0.0], seq, origin.clone())
                    .unwrap()
                    .state_envelope(Recipient::Broadcast, 0)
            })
            .collect();
        let mut a = envs.clone();
        let mut b = envs.clone();
        a.shuffle(&mut rng);
        b.shuffle(&mut rng);
        let run = |order: &[Envelope]| {
            let mut m = ViewerModel::new();
            for e in order {
                m.apply(e, &Policy::default());
            }
            m
        };
        let (ma, mb) = (run(&a), run(&b));
        prop_assert_eq!(&ma, &mb);
        prop_assert_eq!(ma.last_applied_seq[&origin], n as u64);
    }
}
