//! Flit and packet model, opcode space, and the canonical header codec.
//!
//! A packet header is exactly one 32-byte metadata flit. The byte layout is
//! documented in `docs/wire-format.md`; golden vectors live under `golden/`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Body width of every flit, in bytes.
pub const FLIT_BYTES: usize = 32;
/// Encoded header length. One metadata flit.
pub const HEADER_LEN: usize = FLIT_BYTES;
/// Largest payload that rides inline in the extension flit.
pub const INLINE_MAX: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("malformed header: {0}")]
    MalformedHeader(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Opcode {
    Load = 0,
    Store = 1,
    Read = 2,
    Write = 3,
    Send = 4,
    Cas = 5,
    Swap = 6,
    Faa = 7,
    Fsub = 8,
    Fand = 9,
    For = 10,
    Fxor = 11,
    /// Per-packet transport ack.
    TpAck = 12,
    /// Transaction-level ack.
    TaAck = 13,
    /// Selective ack carrying a PSN bitmap.
    TpSack = 14,
    Nak = 15,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpClass {
    Request,
    Response,
    Ack,
}

impl Opcode {
    pub const ALL: [Opcode; 16] = [
        Opcode::Load,
        Opcode::Store,
        Opcode::Read,
        Opcode::Write,
        Opcode::Send,
        Opcode::Cas,
        Opcode::Swap,
        Opcode::Faa,
        Opcode::Fsub,
        Opcode::Fand,
        Opcode::For,
        Opcode::Fxor,
        Opcode::TpAck,
        Opcode::TaAck,
        Opcode::TpSack,
        Opcode::Nak,
    ];

    pub fn from_u8(b: u8) -> Option<Opcode> {
        Opcode::ALL.get(b as usize).copied()
    }

    /// The transaction ack is the only response opcode: it carries the
    /// completion (and atomic result) back to the initiator.
    pub fn class(self) -> OpClass {
        match self {
            Opcode::TaAck => OpClass::Response,
            Opcode::TpAck | Opcode::TpSack | Opcode::Nak => OpClass::Ack,
            _ => OpClass::Request,
        }
    }

    pub fn is_atomic(self) -> bool {
        matches!(
            self,
            Opcode::Cas | Opcode::Swap | Opcode::Faa | Opcode::Fsub | Opcode::Fand | Opcode::For | Opcode::Fxor
        )
    }

    /// Only plain loads and stores may skip the transport layer.
    pub fn bypass_allowed(self) -> bool {
        matches!(self, Opcode::Load | Opcode::Store)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[repr(u8)]
pub enum ServiceMode {
    /// Reliable, ordered by the initiator.
    #[default]
    Roi = 0,
    /// Reliable, ordered by the target.
    Rot = 1,
    /// Reliable, lightweight: transport and transaction acks may fuse.
    Rol = 2,
    /// Unreliable-order: no transaction-layer ack.
    Uno = 3,
}

impl ServiceMode {
    pub const ALL: [ServiceMode; 4] = [ServiceMode::Roi, ServiceMode::Rot, ServiceMode::Rol, ServiceMode::Uno];

    pub fn from_u8(b: u8) -> Option<Self> {
        Self::ALL.get(b as usize).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[repr(u8)]
pub enum ExecTag {
    #[default]
    No = 0,
    Ro = 1,
    So = 2,
}

impl ExecTag {
    pub const ALL: [ExecTag; 3] = [ExecTag::No, ExecTag::Ro, ExecTag::So];

    pub fn from_u8(b: u8) -> Option<Self> {
        Self::ALL.get(b as usize).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PacketHeader {
    pub opcode: Opcode,
    pub src_jetty: u32,
    pub dst_jetty: u32,
    pub token: u32,
    pub psn: u32,
    pub tpmsn: u32,
    pub service_mode: ServiceMode,
    pub exec_tag: ExecTag,
    pub fence: bool,
    pub completion_order: bool,
    pub tp_bypass: bool,
    pub cong_mark: bool,
    pub cong_increase_req: bool,
    pub cong_hint: u8,
    pub payload_len: u16,
}

impl Default for PacketHeader {
    fn default() -> Self {
        PacketHeader {
            opcode: Opcode::Load,
            src_jetty: 0,
            dst_jetty: 0,
            token: 0,
            psn: 0,
            tpmsn: 0,
            service_mode: ServiceMode::Roi,
            exec_tag: ExecTag::No,
            fence: false,
            completion_order: false,
            tp_bypass: false,
            cong_mark: false,
            cong_increase_req: false,
            cong_hint: 0,
            payload_len: 0,
        }
    }
}

// Byte offsets of the canonical layout.
const OFF_OPCODE: usize = 0;
const OFF_SRC: usize = 1;
const OFF_DST: usize = 5;
const OFF_TOKEN: usize = 9;
const OFF_PSN: usize = 13;
const OFF_TPMSN: usize = 17;
const OFF_MODE: usize = 21;
const OFF_TAG: usize = 22;
const OFF_ORDER: usize = 23;
const OFF_CONG: usize = 24;
/// Offset of the congestion hint byte.
pub const OFF_HINT: usize = 25;
const OFF_LEN: usize = 26;
const OFF_RESERVED: usize = 28;

const ORDER_FENCE: u8 = 1 << 0;
const ORDER_COMPLETION: u8 = 1 << 1;
const ORDER_BYPASS: u8 = 1 << 2;
const CONG_MARK: u8 = 1 << 0;
const CONG_INCREASE: u8 = 1 << 1;

impl PacketHeader {
    /// A header is valid iff the bypass flag is only set on loads and stores.
    pub fn is_valid(&self) -> bool {
        !self.tp_bypass || self.opcode.bypass_allowed()
    }

    pub fn encode(&self) -> [u8; HEADER_LEN] {
        debug_assert!(self.is_valid(), "bypass flag on {:?}", self.opcode);
        let mut b = [0u8; HEADER_LEN];
        b[OFF_OPCODE] = self.opcode as u8;
        b[OFF_SRC..OFF_SRC + 4].copy_from_slice(&self.src_jetty.to_le_bytes());
        b[OFF_DST..OFF_DST + 4].copy_from_slice(&self.dst_jetty.to_le_bytes());
        b[OFF_TOKEN..OFF_TOKEN + 4].copy_from_slice(&self.token.to_le_bytes());
        b[OFF_PSN..OFF_PSN + 4].copy_from_slice(&self.psn.to_le_bytes());
        b[OFF_TPMSN..OFF_TPMSN + 4].copy_from_slice(&self.tpmsn.to_le_bytes());
        b[OFF_MODE] = self.service_mode as u8;
        b[OFF_TAG] = self.exec_tag as u8;
        b[OFF_ORDER] = (self.fence as u8 * ORDER_FENCE)
            | (self.completion_order as u8 * ORDER_COMPLETION)
            | (self.tp_bypass as u8 * ORDER_BYPASS);
        b[OFF_CONG] = (self.cong_mark as u8 * CONG_MARK) | (self.cong_increase_req as u8 * CONG_INCREASE);
        b[OFF_HINT] = self.cong_hint;
        b[OFF_LEN..OFF_LEN + 2].copy_from_slice(&self.payload_len.to_le_bytes());
        b
    }

    pub fn decode(b: &[u8]) -> Result<PacketHeader, WireError> {
        if b.len() != HEADER_LEN {
            return Err(WireError::MalformedHeader("wrong length"));
        }
        let u32_at = |o: usize| u32::from_le_bytes([b[o], b[o + 1], b[o + 2], b[o + 3]]);
        let opcode = Opcode::from_u8(b[OFF_OPCODE]).ok_or(WireError::MalformedHeader("opcode"))?;
        let service_mode = ServiceMode::from_u8(b[OFF_MODE]).ok_or(WireError::MalformedHeader("service mode"))?;
        let exec_tag = ExecTag::from_u8(b[OFF_TAG]).ok_or(WireError::MalformedHeader("execution tag"))?;
        let order = b[OFF_ORDER];
        if order & !(ORDER_FENCE | ORDER_COMPLETION | ORDER_BYPASS) != 0 {
            return Err(WireError::MalformedHeader("ordering flags"));
        }
        let cong = b[OFF_CONG];
        if cong & !(CONG_MARK | CONG_INCREASE) != 0 {
            return Err(WireError::MalformedHeader("congestion flags"));
        }
        if b[OFF_RESERVED..].iter().any(|&x| x != 0) {
            return Err(WireError::MalformedHeader("reserved bytes"));
        }
        let h = PacketHeader {
            opcode,
            src_jetty: u32_at(OFF_SRC),
            dst_jetty: u32_at(OFF_DST),
            token: u32_at(OFF_TOKEN),
            psn: u32_at(OFF_PSN),
            tpmsn: u32_at(OFF_TPMSN),
            service_mode,
            exec_tag,
            fence: order & ORDER_FENCE != 0,
            completion_order: order & ORDER_COMPLETION != 0,
            tp_bypass: order & ORDER_BYPASS != 0,
            cong_mark: cong & CONG_MARK != 0,
            cong_increase_req: cong & CONG_INCREASE != 0,
            cong_hint: b[OFF_HINT],
            payload_len: u16::from_le_bytes([b[OFF_LEN], b[OFF_LEN + 1]]),
        };
        if !h.is_valid() {
            return Err(WireError::MalformedHeader("bypass flag on a non load/store opcode"));
        }
        Ok(h)
    }
}

pub fn encode_header(h: &PacketHeader) -> [u8; HEADER_LEN] {
    h.encode()
}

pub fn decode_header(b: &[u8]) -> Result<PacketHeader, WireError> {
    PacketHeader::decode(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlitKind {
    Metadata,
    Extension,
    Payload,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Flit {
    pub kind: FlitKind,
    pub body: [u8; FLIT_BYTES],
}

/// Flits on the wire for one packet: a metadata flit, plus one extension flit
/// when a payload of at most 8 B rides inline, or one payload flit per 32 B.
pub fn flit_count(op: Opcode, payload_len: usize) -> u32 {
    let _ = op;
    let body = match payload_len {
        0 => 0,
        n if n <= INLINE_MAX => 1,
        n => n.div_ceil(FLIT_BYTES),
    };
    1 + body as u32
}

pub fn serialization_ns(flits: u32, bandwidth_gbps: f64) -> f64 {
    assert!(bandwidth_gbps > 0.0, "bandwidth must be positive");
    (flits as f64 * FLIT_BYTES as f64 * 8.0) / bandwidth_gbps
}

/// Split a header and payload into wire flits.
pub fn packetize(h: &PacketHeader, payload: &[u8]) -> Vec<Flit> {
    let mut out = vec![Flit { kind: FlitKind::Metadata, body: h.encode() }];
    if payload.is_empty() {
        return out;
    }
    if payload.len() <= INLINE_MAX {
        let mut body = [0u8; FLIT_BYTES];
        body[..payload.len()].copy_from_slice(payload);
        out.push(Flit { kind: FlitKind::Extension, body });
        return out;
    }
    for chunk in payload.chunks(FLIT_BYTES) {
        let mut body = [0u8; FLIT_BYTES];
        body[..chunk.len()].copy_from_slice(chunk);
        out.push(Flit { kind: FlitKind::Payload, body });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flit_counts_match_anchors() {
        assert_eq!(flit_count(Opcode::Write, 4096), 129);
        assert_eq!(flit_count(Opcode::Write, 8), 2);
        assert_eq!(flit_count(Opcode::TpAck, 0), 1);
        assert_eq!(flit_count(Opcode::Write, 9), 2);
        assert_eq!(flit_count(Opcode::Write, 33), 3);
    }

    #[test]
    fn flit_count_monotone() {
        let mut prev = 0;
        for p in 0..10_000 {
            let c = flit_count(Opcode::Write, p);
            assert!(c >= prev.max(1));
            prev = c;
        }
    }

    #[test]
    fn serialization() {
        assert!((serialization_ns(1, 400.0) - 0.64).abs() < 1e-12);
        assert!((serialization_ns(129, 400.0) - 82.56).abs() < 1e-9);
        assert_eq!(serialization_ns(0, 400.0), 0.0);
    }

    #[test]
    fn every_opcode_has_one_class() {
        let acks = Opcode::ALL.iter().filter(|o| o.class() == OpClass::Ack).count();
        let resp = Opcode::ALL.iter().filter(|o| o.class() == OpClass::Response).count();
        let req = Opcode::ALL.iter().filter(|o| o.class() == OpClass::Request).count();
        assert_eq!(acks + resp + req, 16);
        let bypass: Vec<_> = Opcode::ALL.iter().filter(|o| o.bypass_allowed()).collect();
        assert_eq!(bypass, [&Opcode::Load, &Opcode::Store]);
    }

    #[test]
    fn zero_header_is_constant() {
        let b = PacketHeader::default().encode();
        assert_eq!(b, [0u8; HEADER_LEN]);
    }

    #[test]
    fn hint_is_bit_local() {
        let base = PacketHeader { opcode: Opcode::Write, psn: 77, ..Default::default() };
        let a = base.encode();
        for hint in 0..=255u8 {
            let b = PacketHeader { cong_hint: hint, ..base }.encode();
            for i in 0..HEADER_LEN {
                if i != OFF_HINT {
                    assert_eq!(a[i], b[i]);
                }
            }
            assert_eq!(b[OFF_HINT], hint);
        }
    }

    #[test]
    fn decode_rejects() {
        let good = PacketHeader::default().encode();
        assert!(matches!(decode_header(&good[..31]), Err(WireError::MalformedHeader(_))));
        let mut bad = good;
        bad[OFF_MODE] = 4;
        assert_eq!(decode_header(&bad), Err(WireError::MalformedHeader("service mode")));
        let mut bad = good;
        bad[OFF_OPCODE] = Opcode::Write as u8;
        bad[OFF_ORDER] = ORDER_BYPASS;
        assert!(decode_header(&bad).is_err());
        let mut bad = good;
        bad[31] = 1;
        assert!(decode_header(&bad).is_err());
    }

    #[test]
    fn packetize_matches_flit_count() {
        let h = PacketHeader { opcode: Opcode::Write, payload_len: 4096, ..Default::default() };
        for p in [0usize, 1, 8, 9, 64, 4096] {
            let flits = packetize(&h, &vec![0xab; p]);
            assert_eq!(flits.len() as u32, flit_count(Opcode::Write, p));
        }
    }
}
