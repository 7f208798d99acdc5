//! Coefficient compression for the broadcast channel.
//!
//! A coefficient vector rides the channel as one coarsely quantized absolute
//! anchor (the first coefficient) plus one small fixed-point residual per
//! successive difference. Residuals are differences against the telescoped
//! deltas of a nominal-speed straight line, scaled by `3 / k_ref` so that a
//! unit residual step corresponds to the natural coefficient spacing of that
//! line; a fleet moving close to its target speed then produces residuals
//! tightly clustered around zero.
//!
//! The fixed-point alphabet is a signed two's-complement grid with `i_bits`
//! integer bits (sign included) and `f_bits` fraction bits: representable
//! values are `[-2^(i-1), 2^(i-1) - 2^-f]` in steps of `2^-f`. Rounding is
//! half-to-even; out-of-range values saturate silently and are counted.

use crate::error::{Error, Result};

/// Fixed-point quantization setup shared by both ends of a link.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantScheme {
    /// Integer bits of the residual grid, sign included. At least 1.
    pub i_bits: u32,
    /// Fraction bits of the residual grid.
    pub f_bits: u32,
    /// Bit width of the absolute first-coefficient field (0 sends no anchor).
    pub w1_bits: u32,
    /// Expected coefficient increment per spline interval (target speed
    /// times interval length). Sets the residual scaling `3 / k_ref`.
    pub k_ref: f64,
    /// Quantization step of the first-coefficient field, in coefficient
    /// units (meters).
    pub m_lsb: f64,
}

impl QuantScheme {
    pub fn new(i_bits: u32, f_bits: u32, w1_bits: u32, k_ref: f64, m_lsb: f64) -> Result<Self> {
        let s = Self { i_bits, f_bits, w1_bits, k_ref, m_lsb };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.i_bits < 1 {
            return Err(Error::Config("i_bits must be at least 1".into()));
        }
        if self.i_bits + self.f_bits > 63 {
            return Err(Error::Config(format!(
                "residual width {} exceeds 63 bits",
                self.i_bits + self.f_bits
            )));
        }
        if self.w1_bits > 63 {
            return Err(Error::Config("w1_bits exceeds 63".into()));
        }
        if !(self.k_ref.is_finite() && self.k_ref > 0.0) {
            return Err(Error::Config(format!("k_ref must be > 0, got {}", self.k_ref)));
        }
        if !(self.m_lsb.is_finite() && self.m_lsb > 0.0) {
            return Err(Error::Config(format!("m_lsb must be > 0, got {}", self.m_lsb)));
        }
        Ok(())
    }

    /// Total residual width in bits.
    pub fn w_fi(&self) -> u32 {
        self.i_bits + self.f_bits
    }

    /// Residual grid step.
    pub fn step(&self) -> f64 {
        (2.0f64).powi(-(self.f_bits as i32))
    }

    pub fn grid_min(&self) -> f64 {
        -(2.0f64).powi(self.i_bits as i32 - 1)
    }

    pub fn grid_max(&self) -> f64 {
        (2.0f64).powi(self.i_bits as i32 - 1) - self.step()
    }

    /// Quantizes a residual onto the grid. Returns the signed integer code
    /// (value / step) and whether the value saturated.
    pub fn quantize(&self, r: f64) -> (i64, bool) {
        let scaled = r * (2.0f64).powi(self.f_bits as i32);
        let code_min = -(1i64 << (self.w_fi() - 1));
        let code_max = (1i64 << (self.w_fi() - 1)) - 1;
        let rounded = scaled.round_ties_even();
        if rounded < code_min as f64 {
            (code_min, true)
        } else if rounded > code_max as f64 {
            (code_max, true)
        } else {
            (rounded as i64, false)
        }
    }

    /// Grid value of a residual code.
    pub fn value_of(&self, code: i64) -> f64 {
        code as f64 * self.step()
    }
}

/// One neighbor's worth of coded coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMessage {
    /// Signed `w1_bits` code of the first coefficient (0 when `w1_bits` is 0).
    pub m_code: i64,
    /// Signed `i_bits + f_bits` residual codes, one per successive delta.
    pub codes: Vec<i64>,
    /// How many fields saturated while encoding this message.
    pub saturated: usize,
}

/// Telescoped deltas of the unit-slope line pattern: first and last third,
/// second and second-to-last two thirds, ones in between.
pub(crate) fn ideal_delta_pattern(n_deltas: usize) -> Vec<f64> {
    let mut p = vec![1.0; n_deltas];
    if n_deltas >= 1 {
        p[0] = 1.0 / 3.0;
        p[n_deltas - 1] = 1.0 / 3.0;
    }
    if n_deltas >= 3 {
        p[1] = 2.0 / 3.0;
        p[n_deltas - 2] = 2.0 / 3.0;
    }
    p
}

/// Encodes a coefficient vector: absolute anchor plus per-delta residuals
/// against the nominal line.
pub fn encode_coeffs(coeffs: &[f64], scheme: &QuantScheme) -> Result<EncodedMessage> {
    scheme.validate()?;
    if coeffs.len() < 4 {
        return Err(Error::Length(format!(
            "need at least 4 coefficients, got {}",
            coeffs.len()
        )));
    }
    let mut saturated = 0usize;
    let m_code = if scheme.w1_bits == 0 {
        0
    } else {
        let code_min = -(1i64 << (scheme.w1_bits - 1));
        let code_max = (1i64 << (scheme.w1_bits - 1)) - 1;
        let rounded = (coeffs[0] / scheme.m_lsb).round_ties_even();
        if rounded < code_min as f64 {
            saturated += 1;
            code_min
        } else if rounded > code_max as f64 {
            saturated += 1;
            code_max
        } else {
            rounded as i64
        }
    };
    let pattern = ideal_delta_pattern(coeffs.len() - 1);
    let mut codes = Vec::with_capacity(coeffs.len() - 1);
    for (j, w) in coeffs.windows(2).enumerate() {
        let delta = w[1] - w[0];
        let residual = 3.0 * (delta - scheme.k_ref * pattern[j]) / scheme.k_ref;
        let (code, sat) = scheme.quantize(residual);
        if sat {
            saturated += 1;
        }
        codes.push(code);
    }
    Ok(EncodedMessage { m_code, codes, saturated })
}

/// Inverts [`encode_coeffs`] up to quantization: anchor value plus ideal
/// deltas plus decoded residuals.
pub fn decode_coeffs(msg: &EncodedMessage, scheme: &QuantScheme) -> Result<Vec<f64>> {
    scheme.validate()?;
    if msg.codes.len() < 3 {
        return Err(Error::Length(format!(
            "need at least 3 residuals, got {}",
            msg.codes.len()
        )));
    }
    let pattern = ideal_delta_pattern(msg.codes.len());
    let mut coeffs = Vec::with_capacity(msg.codes.len() + 1);
    coeffs.push(msg.m_code as f64 * scheme.m_lsb);
    for (j, code) in msg.codes.iter().enumerate() {
        let delta = scheme.k_ref * pattern[j] + scheme.k_ref / 3.0 * scheme.value_of(*code);
        let prev = *coeffs.last().unwrap();
        coeffs.push(prev + delta);
    }
    Ok(coeffs)
}

/// A full broadcast packet before bit packing: who is speaking and one coded
/// message per neighbor, keyed by neighbor id in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct Payload {
    pub sender: u32,
    pub per_neighbor: Vec<(u32, EncodedMessage)>,
}

/// Bits needed for the sender id field of a fleet of `v` agents.
pub fn id_bits(v: usize) -> u32 {
    debug_assert!(v >= 2);
    (usize::BITS - (v - 1).leading_zeros()).max(1)
}

/// Exact payload size in bits for a fleet of `v` agents with `h_p` planning
/// intervals: `(v-1) * (w1 + w_fi * (h_p + 2)) + ceil(log2 v)`.
pub fn payload_bits(v: usize, w1_bits: u32, w_fi: u32, h_p: usize) -> usize {
    (v - 1) * (w1_bits as usize + w_fi as usize * (h_p + 2)) + id_bits(v) as usize
}

/// Lowercase hex, two digits per byte, no separators. The canonical form
/// for payload dumps and golden files.
pub fn hex_dump(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        use std::fmt::Write as _;
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Inverse of [`hex_dump`].
pub fn hex_parse(text: &str) -> Result<Vec<u8>> {
    let t = text.trim();
    if t.len() % 2 != 0 {
        return Err(Error::Parse("hex dump has an odd digit count".into()));
    }
    (0..t.len() / 2)
        .map(|i| {
            u8::from_str_radix(&t[2 * i..2 * i + 2], 16)
                .map_err(|e| Error::Parse(format!("bad hex byte at {i}: {e}")))
        })
        .collect()
}

struct BitWriter {
    buf: Vec<u8>,
    nbits: usize,
}

impl BitWriter {
    fn new() -> Self {
        Self { buf: Vec::new(), nbits: 0 }
    }

    /// Appends the low `bits` bits of `value`, most significant first.
    fn write(&mut self, value: u64, bits: u32) {
        for i in (0..bits).rev() {
            let bit = (value >> i) & 1;
            let byte_idx = self.nbits / 8;
            if byte_idx == self.buf.len() {
                self.buf.push(0);
            }
            self.buf[byte_idx] |= (bit as u8) << (7 - self.nbits % 8);
            self.nbits += 1;
        }
    }

    fn write_signed(&mut self, value: i64, bits: u32) {
        let mask = if bits >= 64 { u64::MAX } else { (1u64 << bits) - 1 };
        self.write((value as u64) & mask, bits);
    }
}

struct BitReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn read(&mut self, bits: u32) -> Result<u64> {
        let mut v = 0u64;
        for _ in 0..bits {
            let byte_idx = self.pos / 8;
            if byte_idx >= self.buf.len() {
                return Err(Error::Length("payload truncated".into()));
            }
            let bit = (self.buf[byte_idx] >> (7 - self.pos % 8)) & 1;
            v = (v << 1) | bit as u64;
            self.pos += 1;
        }
        Ok(v)
    }

    fn read_signed(&mut self, bits: u32) -> Result<i64> {
        let raw = self.read(bits)?;
        if bits == 0 {
            return Ok(0);
        }
        let sign = 1u64 << (bits - 1);
        Ok(if raw & sign != 0 {
            (raw | !(sign | (sign - 1))) as i64
        } else {
            raw as i64
        })
    }
}

/// Packs a payload into bytes, most significant bit first: sender id, then
/// per neighbor in ascending id order the anchor field followed by the
/// residual fields. The produced bit count always equals [`payload_bits`].
pub fn encode_payload(
    payload: &Payload,
    scheme: &QuantScheme,
    v: usize,
    h_p: usize,
) -> Result<Vec<u8>> {
    scheme.validate()?;
    if v < 2 {
        return Err(Error::Argument(format!("fleet size must be >= 2, got {v}")));
    }
    if payload.sender as usize >= v {
        return Err(Error::Id(format!("sender {} out of range 0..{v}", payload.sender)));
    }
    let expected: Vec<u32> = (0..v as u32).filter(|&a| a != payload.sender).collect();
    let given: Vec<u32> = payload.per_neighbor.iter().map(|(id, _)| *id).collect();
    if given != expected {
        return Err(Error::Id(format!(
            "neighbor ids must be all other agents ascending, got {given:?}"
        )));
    }
    let mut w = BitWriter::new();
    w.write(payload.sender as u64, id_bits(v));
    for (_, msg) in &payload.per_neighbor {
        if msg.codes.len() != h_p + 2 {
            return Err(Error::Length(format!(
                "message carries {} residuals, expected {}",
                msg.codes.len(),
                h_p + 2
            )));
        }
        w.write_signed(msg.m_code, scheme.w1_bits);
        for code in &msg.codes {
            w.write_signed(*code, scheme.w_fi());
        }
    }
    debug_assert_eq!(w.nbits, payload_bits(v, scheme.w1_bits, scheme.w_fi(), h_p));
    Ok(w.buf)
}

/// Unpacks a byte buffer produced by [`encode_payload`]. The buffer length
/// must match the scheme exactly.
pub fn decode_payload(
    bytes: &[u8],
    scheme: &QuantScheme,
    v: usize,
    h_p: usize,
) -> Result<Payload> {
    scheme.validate()?;
    if v < 2 {
        return Err(Error::Argument(format!("fleet size must be >= 2, got {v}")));
    }
    let nbits = payload_bits(v, scheme.w1_bits, scheme.w_fi(), h_p);
    let expect_len = (nbits + 7) / 8;
    if bytes.len() != expect_len {
        return Err(Error::Length(format!(
            "payload is {} bytes, expected {expect_len}",
            bytes.len()
        )));
    }
    let mut r = BitReader::new(bytes);
    let sender = r.read(id_bits(v))? as u32;
    if sender as usize >= v {
        return Err(Error::Id(format!("sender {sender} out of range 0..{v}")));
    }
    let mut per_neighbor = Vec::with_capacity(v - 1);
    for id in (0..v as u32).filter(|&a| a != sender) {
        let m_code = r.read_signed(scheme.w1_bits)?;
        let mut codes = Vec::with_capacity(h_p + 2);
        for _ in 0..h_p + 2 {
            codes.push(r.read_signed(scheme.w_fi())?);
        }
        per_neighbor.push((id, EncodedMessage { m_code, codes, saturated: 0 }));
    }
    Ok(Payload { sender, per_neighbor })
}
