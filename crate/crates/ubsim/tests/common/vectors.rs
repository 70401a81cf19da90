//! Named headers whose encodings are pinned in `golden/wire_vectors.txt`.

use std::fmt::Write as _;
use ubsim::wire::{encode_header, ExecTag, Opcode, PacketHeader, ServiceMode};

pub const VECTORS_FILE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/golden/wire_vectors.txt");

pub fn vectors() -> Vec<(&'static str, PacketHeader)> {
    let d = PacketHeader::default();
    vec![
        ("zero", d),
        (
            "load_bypass",
            PacketHeader { opcode: Opcode::Load, src_jetty: 1, dst_jetty: 2, tp_bypass: true, payload_len: 64, ..d },
        ),
        (
            "read_roi",
            PacketHeader {
                opcode: Opcode::Read,
                src_jetty: 0x0102_0304,
                dst_jetty: 0x0a0b_0c0d,
                token: 0xdead_beef,
                psn: 0x00ff_ffff,
                tpmsn: 7,
                payload_len: 64,
                ..d
            },
        ),
        (
            "write_rol_so_fence",
            PacketHeader {
                opcode: Opcode::Write,
                service_mode: ServiceMode::Rol,
                exec_tag: ExecTag::So,
                fence: true,
                completion_order: true,
                psn: 42,
                payload_len: 4096,
                ..d
            },
        ),
        (
            "cas_congested",
            PacketHeader {
                opcode: Opcode::Cas,
                cong_mark: true,
                cong_increase_req: true,
                cong_hint: 0x80,
                payload_len: 8,
                ..d
            },
        ),
        ("tpsack_uno", PacketHeader { opcode: Opcode::TpSack, service_mode: ServiceMode::Uno, psn: 1000, ..d }),
        (
            "nak_saturated",
            PacketHeader {
                opcode: Opcode::Nak,
                src_jetty: u32::MAX,
                dst_jetty: u32::MAX,
                token: u32::MAX,
                psn: u32::MAX,
                tpmsn: u32::MAX,
                service_mode: ServiceMode::Rot,
                exec_tag: ExecTag::Ro,
                fence: true,
                completion_order: true,
                cong_mark: true,
                cong_increase_req: true,
                cong_hint: u8::MAX,
                payload_len: u16::MAX,
                ..d
            },
        ),
    ]
}

pub fn render() -> String {
    let mut out = String::from("# name hex (32-byte header, little-endian fields)\n");
    for (name, h) in vectors() {
        let hex: String = encode_header(&h).iter().map(|b| format!("{b:02x}")).collect();
        let _ = writeln!(out, "{name} {hex}");
    }
    out
}
