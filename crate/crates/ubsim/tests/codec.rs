//! Header codec: round trip over random headers and stable encode vectors.

mod common;

use common::vectors::{render, vectors, VECTORS_FILE};
use proptest::prelude::*;
use ubsim::wire::{decode_header, encode_header, ExecTag, Opcode, PacketHeader, ServiceMode, HEADER_LEN};

fn opcode() -> impl Strategy<Value = Opcode> {
    (0u8..16).prop_map(|b| Opcode::from_u8(b).unwrap())
}

prop_compose! {
    fn header()(
        opcode in opcode(),
        src_jetty in any::<u32>(),
        dst_jetty in any::<u32>(),
        token in any::<u32>(),
        psn in any::<u32>(),
        tpmsn in any::<u32>(),
        mode in 0u8..4,
        tag in 0u8..3,
        flags in any::<[bool; 5]>(),
        cong_hint in any::<u8>(),
        payload_len in any::<u16>(),
    ) -> PacketHeader {
        PacketHeader {
            opcode,
            src_jetty,
            dst_jetty,
            token,
            psn,
            tpmsn,
            service_mode: ServiceMode::from_u8(mode).unwrap(),
            exec_tag: ExecTag::from_u8(tag).unwrap(),
            fence: flags[0],
            completion_order: flags[1],
            // bypass is only legal on loads and stores
            tp_bypass: flags[2] && opcode.bypass_allowed(),
            cong_mark: flags[3],
            cong_increase_req: flags[4],
            cong_hint,
            payload_len,
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100_000))]

    #[test]
    fn round_trip(h in header()) {
        let b = encode_header(&h);
        prop_assert_eq!(b.len(), HEADER_LEN);
        prop_assert_eq!(decode_header(&b).unwrap(), h);
    }
}

proptest! {
    #[test]
    fn decode_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
        if let Ok(h) = decode_header(&bytes) {
            let again = encode_header(&h);
            prop_assert_eq!(again.as_slice(), bytes.as_slice());
        }
    }
}

#[test]
fn golden_encode_vectors() {
    let path = VECTORS_FILE;
    let fresh = render();
    if std::env::var_os("UBSIM_BLESS").is_some() {
        std::fs::write(path, &fresh).unwrap();
    }
    let golden = std::fs::read_to_string(path).expect("golden/wire_vectors.txt");
    assert_eq!(golden, fresh);
    for (name, h) in vectors() {
        assert_eq!(decode_header(&encode_header(&h)).unwrap(), h, "{name}");
    }
}
