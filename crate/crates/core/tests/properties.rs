mod common;

use keyledger::cores::{CoreEnables, DestAddr, IpId, SourceAddr};
use keyledger::crypto::{aes_encrypt, keccak_digest, rsa_sign, rsa_verify, Digest512, SymmetricKey};
use keyledger::datapath::{decode_cwr, encode_cwr, ControlWord};
use keyledger::harness::flip_bit;
use keyledger::ledger::{load_chain, persist_chain, verify_chain, BlockOp, HEADER_LEN, MAGIC, RECORD_LEN, VERSION};
use keyledger::sim::Genesis;
use proptest::prelude::*;

fn control_word() -> impl Strategy<Value = ControlWord> {
    (0usize..4, 0usize..5, any::<bool>(), any::<bool>(), 0u8..64).prop_map(|(s, d, bg, cbi, en)| ControlWord {
        source: SourceAddr::ALL[s],
        dest: DestAddr::ALL[d],
        block_gen: bg,
        cbi_enable: cbi,
        enables: CoreEnables::from_bits_truncate(en),
    })
}

fn record() -> impl Strategy<Value = Vec<u8>> {
    (
        any::<u64>(),
        any::<u64>(),
        prop::sample::select(vec![0x00u8, 0x01, 0xFF]),
        0u8..4,
        0u8..5,
        any::<u32>(),
        any::<u64>(),
        proptest::collection::vec(any::<u8>(), 256),
    )
        .prop_map(|(idx, ts, op, src, dst, status, key, tail)| {
            let mut r = Vec::with_capacity(RECORD_LEN);
            r.extend_from_slice(&idx.to_be_bytes());
            r.extend_from_slice(&ts.to_be_bytes());
            r.extend_from_slice(&[op, src, dst, 0]);
            r.extend_from_slice(&status.to_be_bytes());
            r.extend_from_slice(&key.to_be_bytes());
            r.extend_from_slice(&tail);
            r
        })
}

proptest! {
    #[test]
    fn cwr_roundtrip(cw in control_word()) {
        let w = encode_cwr(&cw);
        prop_assert_eq!(decode_cwr(w).unwrap(), cw);
        prop_assert_eq!(encode_cwr(&decode_cwr(w).unwrap()), w);
    }

    #[test]
    fn cwr_decode_is_total_and_exact(w in any::<u16>()) {
        let src_ok = (w >> 12) < 4;
        let dst_ok = ((w >> 8) & 0xf) < 5;
        match decode_cwr(w) {
            Ok(cw) => {
                prop_assert!(src_ok && dst_ok);
                prop_assert_eq!(encode_cwr(&cw), w);
            }
            Err(_) => prop_assert!(!(src_ok && dst_ok)),
        }
    }

    #[test]
    fn dump_persist_load_roundtrip(recs in proptest::collection::vec(record(), 1..8)) {
        let mut dump = Vec::new();
        dump.extend_from_slice(MAGIC);
        dump.extend_from_slice(&VERSION.to_be_bytes());
        dump.extend_from_slice(&(recs.len() as u32).to_be_bytes());
        for r in &recs {
            dump.extend_from_slice(r);
        }
        prop_assert_eq!(dump.len(), HEADER_LEN + recs.len() * RECORD_LEN);
        let chain = load_chain(&dump).unwrap();
        prop_assert_eq!(persist_chain(&chain), dump);
    }

    #[test]
    fn load_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..700)) {
        let _ = load_chain(&bytes);
    }

    #[test]
    fn keccak_matches_reference(msg in proptest::collection::vec(any::<u8>(), 0..600)) {
        use sha3::Digest as _;
        let want = sha3::Sha3_512::digest(&msg);
        prop_assert_eq!(&keccak_digest(&msg).0[..], &want[..]);
    }

    #[test]
    fn aes_ctr_is_an_involution(key in any::<[u8; 16]>(), pt in proptest::collection::vec(any::<u8>(), 1..200)) {
        let k = SymmetricKey::new(key, keyledger::cores::KeyType::Encryption);
        let ct = aes_encrypt(&k, &pt).unwrap();
        prop_assert_eq!(ct.len(), pt.len());
        prop_assert_eq!(aes_encrypt(&k, &ct).unwrap(), pt);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn rsa_sign_verify_roundtrip(d in any::<[u8; 32]>(), e in any::<[u8; 32]>(), ip in 0usize..5) {
        let g = Genesis::cached(1);
        let key = &g.signers[&IpId::ALL[ip]];
        let mut bytes = [0u8; 64];
        bytes[..32].copy_from_slice(&d);
        bytes[32..].copy_from_slice(&e);
        let digest = Digest512(bytes);
        let sig = rsa_sign(&digest, key).unwrap();
        prop_assert_eq!(rsa_verify(&sig, key.public()).unwrap(), digest);
        let other = &g.signers[&IpId::ALL[(ip + 1) % 5]];
        prop_assert_ne!(rsa_verify(&sig, other.public()).ok(), Some(digest));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn any_single_flip_of_lifecycle_dump_is_detected(frac in 0.0f64..1.0) {
        let run = common::run_lifecycle();
        let dump = persist_chain(run.sim.chain());
        let bit = (frac * (dump.len() * 8) as f64) as u64;
        let mut bad = dump.clone();
        flip_bit(&mut bad, bit).unwrap();
        let ok = load_chain(&bad)
            .map(|c| verify_chain(&c, run.sim.registry(), run.sim.config().scope).is_ok())
            .unwrap_or(false);
        prop_assert!(!ok, "bit {} undetected", bit);
    }
}

#[test]
fn one_mebibyte_digest_matches_reference() {
    use sha3::Digest as _;
    let msg: Vec<u8> = (0..1u32 << 20).map(|i| (i % 251) as u8).collect();
    let want = sha3::Sha3_512::digest(&msg);
    assert_eq!(&keccak_digest(&msg).0[..], &want[..]);
}

#[test]
fn op_bytes_outside_the_enum_are_rejected() {
    for b in 0u8..=255 {
        assert_eq!(BlockOp::from_byte(b).is_some(), matches!(b, 0x00 | 0x01 | 0xFF), "{b:#04x}");
    }
}
