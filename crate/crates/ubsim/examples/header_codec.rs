//! Encode a packet header, print its 32 bytes, and decode it back.

use ubsim::wire::{decode_header, encode_header, flit_count, ExecTag, Opcode, PacketHeader, ServiceMode};

fn main() {
    let h = PacketHeader {
        opcode: Opcode::Write,
        src_jetty: 7,
        dst_jetty: 42,
        token: 0xdead_beef,
        psn: 1000,
        tpmsn: 17,
        service_mode: ServiceMode::Rol,
        exec_tag: ExecTag::Ro,
        fence: false,
        completion_order: true,
        tp_bypass: false,
        cong_mark: false,
        cong_increase_req: true,
        cong_hint: 3,
        payload_len: 4096,
    };
    let bytes = encode_header(&h);
    let hex: String = bytes.iter().map(|b| format!("{b:02x}")).collect();
    println!("{hex}");
    let back = decode_header(&bytes).expect("valid header");
    assert_eq!(back, h);
    println!("round trip ok; {} flits on the wire", flit_count(h.opcode, h.payload_len as usize));
}
