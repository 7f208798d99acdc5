//! Pins the broadcast bit format against checked-in dumps. A failure here
//! means the wire format changed and every deployed decoder breaks.

use acoustic_dmpc::bspline::ideal_line_coeffs;
use acoustic_dmpc::codec::{
    decode_coeffs, decode_payload, encode_coeffs, encode_payload, hex_dump, hex_parse, Payload,
    QuantScheme,
};

fn golden(name: &str) -> String {
    let path = format!("{}/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(path).unwrap().trim().to_string()
}

#[test]
fn four_agent_survey_payload_is_frozen() {
    let s = QuantScheme::new(3, 7, 32, 8.0, 0.05).unwrap();
    let line = ideal_line_coeffs(1.25, 8.0, 6).unwrap();
    let mut bent = line.clone();
    for (j, c) in bent.iter_mut().enumerate() {
        *c += 0.2 * (j as f64) - 0.6;
    }
    let mut slow = ideal_line_coeffs(-3.4, 8.0, 6).unwrap();
    for (j, c) in slow.iter_mut().enumerate() {
        *c -= 0.35 * j as f64;
    }
    let payload = Payload {
        sender: 2,
        per_neighbor: vec![
            (0, encode_coeffs(&line, &s).unwrap()),
            (1, encode_coeffs(&bent, &s).unwrap()),
            (3, encode_coeffs(&slow, &s).unwrap()),
        ],
    };
    let bytes = encode_payload(&payload, &s, 4, 6).unwrap();
    assert_eq!(hex_dump(&bytes), golden("payload_v4_hp6.hex"));

    // an ideal line rides the zero-residual fast path: every residual code 0
    let back = decode_payload(&bytes, &s, 4, 6).unwrap();
    assert_eq!(back.sender, 2);
    assert!(back.per_neighbor[0].1.codes.iter().all(|&c| c == 0));
    let line_back = decode_coeffs(&back.per_neighbor[0].1, &s).unwrap();
    for (got, want) in line_back.iter().zip(line.iter()) {
        assert!((got - want).abs() <= 0.05 / 2.0 + 1e-12, "{got} vs {want}");
    }
}

#[test]
fn six_agent_column_payload_is_frozen() {
    let s = QuantScheme::new(3, 4, 16, 4.0, 0.1).unwrap();
    let mut msgs = Vec::new();
    for (i, id) in [0u32, 1, 2, 4, 5].iter().enumerate() {
        let mut c = ideal_line_coeffs(0.5 * i as f64, 4.0, 4).unwrap();
        for (j, x) in c.iter_mut().enumerate() {
            *x += 0.05 * ((i + j) as f64);
        }
        msgs.push((*id, encode_coeffs(&c, &s).unwrap()));
    }
    let payload = Payload { sender: 3, per_neighbor: msgs };
    let bytes = encode_payload(&payload, &s, 6, 4).unwrap();
    let want = golden("payload_v6_hp4.hex");
    assert_eq!(hex_dump(&bytes), want);

    // the dump also has to parse back to the same bytes and decode cleanly
    let parsed = hex_parse(&want).unwrap();
    assert_eq!(parsed, bytes);
    let back = decode_payload(&parsed, &s, 6, 4).unwrap();
    assert_eq!(back.sender, 3);
    assert_eq!(back.per_neighbor.len(), 5);
}
