//! Anatomy of one broadcast packet: sender id, then per neighbor an
//! absolute anchor and one residual code per coefficient delta.

use acoustic_dmpc::bspline::ideal_line_coeffs;
use acoustic_dmpc::codec::{
    decode_payload, encode_coeffs, encode_payload, hex_dump, id_bits, payload_bits, Payload,
    QuantScheme,
};

fn main() {
    let v = 4;
    let h_p = 6;
    let scheme = QuantScheme::new(3, 7, 32, 8.0, 0.05).unwrap();

    let mut per_neighbor = Vec::new();
    for id in [0u32, 1, 3] {
        let mut c = ideal_line_coeffs(10.0 * id as f64, 8.0, h_p).unwrap();
        for (j, x) in c.iter_mut().enumerate() {
            *x += 0.3 * (j as f64 + id as f64).cos();
        }
        per_neighbor.push((id, encode_coeffs(&c, &scheme).unwrap()));
    }
    let payload = Payload { sender: 2, per_neighbor };
    let bytes = encode_payload(&payload, &scheme, v, h_p).unwrap();

    let per_msg = scheme.w1_bits as usize + scheme.w_fi() as usize * (h_p + 2);
    println!("fleet of {v}, horizon {h_p} intervals");
    println!("  sender id field:            {} bits", id_bits(v));
    println!("  anchor per neighbor:        {} bits", scheme.w1_bits);
    println!("  residuals per neighbor:     {} x {} bits", h_p + 2, scheme.w_fi());
    println!("  per-neighbor message:       {per_msg} bits");
    println!(
        "  total: {} bits in {} bytes",
        payload_bits(v, scheme.w1_bits, scheme.w_fi(), h_p),
        bytes.len()
    );
    println!("\nhex: {}", hex_dump(&bytes));

    let back = decode_payload(&bytes, &scheme, v, h_p).unwrap();
    println!("\ndecoded sender {} with messages for:", back.sender);
    for (id, msg) in &back.per_neighbor {
        println!("  agent {id}: anchor code {}, residual codes {:?}", msg.m_code, msg.codes);
    }
}
