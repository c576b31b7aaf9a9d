mod common;

use std::collections::HashSet;

use proptest::collection::vec;
use proptest::prelude::*;
use pufchain::fom::{randomness, uniqueness};
use pufchain::ledger::{canonical_bytes, make_auth_tag, parse_canonical, AuthTag, BlockData, Chain, MAX_PAYLOAD};
use pufchain::puf::{manufacture, Challenge, PufConfig, Response};
use pufchain::{DeviceId, Hash256, NodeId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn block_data() -> impl Strategy<Value = BlockData> {
    (0u64..1 << 48, any::<u64>(), any::<u64>(), vec(any::<u8>(), 0..200))
        .prop_map(|(id, seq, t_init, payload)| BlockData { device_id: DeviceId::truncate(id), seq, t_init, payload })
}

fn response() -> impl Strategy<Value = Response> {
    vec(any::<bool>(), 128).prop_map(Response::from_bits)
}

fn matrix() -> impl Strategy<Value = Vec<Vec<Response>>> {
    (2usize..6, 1usize..5, 1usize..40).prop_flat_map(|(devices, challenges, width)| {
        vec(vec(vec(any::<bool>(), width).prop_map(Response::from_bits), challenges), devices)
    })
}

fn chain_of(entries: &[(BlockData, [u8; 32], u64)], validator: NodeId) -> Chain {
    entries.iter().fold(Chain::new(), |c, (d, tag, t)| {
        c.append(d.clone(), AuthTag(Hash256(*tag)), validator, *t).unwrap()
    })
}

proptest! {
    #[test]
    fn canonical_encoding_round_trips(d in block_data()) {
        let bytes = canonical_bytes(&d).unwrap();
        prop_assert_eq!(&bytes, &common::canonical(&d));
        prop_assert_eq!(parse_canonical(&bytes).unwrap(), d);
    }

    #[test]
    fn auth_tag_matches_the_reference_construction(d in block_data(), r in response()) {
        let tag = make_auth_tag(&d, &r).unwrap();
        prop_assert_eq!(tag.0.as_bytes(), &common::tag(&d, &r));
        prop_assert_eq!(make_auth_tag(&d, &r).unwrap(), tag);
    }

    #[test]
    fn uniqueness_ignores_device_order(m in matrix(), rot in 0usize..6) {
        let mut shuffled = m.clone();
        let len = shuffled.len();
        shuffled.rotate_left(rot % len);
        shuffled.reverse();
        prop_assert!((uniqueness(&m).unwrap() - uniqueness(&shuffled).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn uniqueness_ignores_global_complement(m in matrix()) {
        let flipped: Vec<Vec<Response>> = m.iter().map(|row| row.iter().map(Response::complement).collect()).collect();
        prop_assert!((uniqueness(&m).unwrap() - uniqueness(&flipped).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn randomness_of_complement(bits in vec(any::<bool>(), 1..300)) {
        let r = Response::from_bits(bits);
        prop_assert!((randomness(&r.complement()) - (100.0 - randomness(&r))).abs() < 1e-9);
        prop_assert!((0.0..=100.0).contains(&randomness(&r)));
    }

    #[test]
    fn append_preserves_validity(
        entries in vec((block_data(), any::<[u8; 32]>(), any::<u64>()), 0..8),
        next in (block_data(), any::<[u8; 32]>(), any::<u64>()),
    ) {
        let validator = DeviceId::truncate(0xb827_eb00_0000);
        let chain = chain_of(&entries, validator);
        prop_assert!(chain.verify().is_ok());
        let before = chain.clone();
        let grown = chain.append(next.0, AuthTag(Hash256(next.1)), validator, next.2).unwrap();
        prop_assert!(grown.verify().is_ok());
        prop_assert_eq!(&grown.entries()[..before.len()], before.entries());
        prop_assert_eq!(grown.entries()[before.len()].prev_hash, before.tip_hash());
    }

    #[test]
    fn spliced_chains_fail_at_the_splice(
        a in vec((block_data(), any::<[u8; 32]>(), any::<u64>()), 2..7),
        b in vec((block_data(), any::<[u8; 32]>(), any::<u64>()), 2..7),
        cut in 1usize..6,
    ) {
        let validator = DeviceId::truncate(7);
        let (ca, cb) = (chain_of(&a, validator), chain_of(&b, validator));
        let cut = cut.min(ca.len() - 1).min(cb.len() - 1);
        prop_assume!(ca.entries()[cut - 1].entry_hash != cb.entries()[cut - 1].entry_hash);
        let spliced: Vec<_> = ca.entries()[..cut].iter().chain(&cb.entries()[cut..]).cloned().collect();
        let fault = Chain::from_entries(spliced).verify().unwrap_err();
        prop_assert_eq!(fault.height, cut as u64);
    }

    #[test]
    fn challenges_with_repeated_pairs_are_rejected(pairs in vec((0u32..4, 0u32..4), 2..20)) {
        let distinct: HashSet<_> = pairs.iter().collect();
        prop_assert_eq!(Challenge::new(pairs.clone()).is_ok(), distinct.len() == pairs.len());
    }

    #[test]
    fn fixed_seeds_fix_every_bit(device_seed in any::<u64>(), eval_seed in any::<u64>()) {
        let config = PufConfig { n_oscillators: 64, response_bits: 32, ..PufConfig::default() };
        let d1 = manufacture(&config, DeviceId::truncate(1), device_seed).unwrap();
        let d2 = manufacture(&config, DeviceId::truncate(1), device_seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(device_seed ^ eval_seed);
        let c = Challenge::random(&mut rng, 32, 32).unwrap();
        prop_assert_eq!(d1.evaluate(&c, eval_seed).unwrap(), d2.evaluate(&c, eval_seed).unwrap());
    }
}

#[test]
fn oversized_payload_is_refused() {
    let d = BlockData { device_id: DeviceId::truncate(1), seq: 0, t_init: 0, payload: vec![0; MAX_PAYLOAD + 1] };
    assert!(canonical_bytes(&d).is_err());
    let ok = BlockData { payload: vec![0; MAX_PAYLOAD], ..d };
    assert_eq!(parse_canonical(&canonical_bytes(&ok).unwrap()).unwrap(), ok);
}

#[test]
fn single_response_bit_flip_avalanches() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let trials = 1000;
    let mut total = 0u32;
    for _ in 0..trials {
        let d = BlockData {
            device_id: DeviceId::truncate(rng.random_range(0..1 << 48)),
            seq: rng.random(),
            t_init: rng.random(),
            payload: (0..rng.random_range(0..64)).map(|_| rng.random()).collect(),
        };
        let bits: Vec<bool> = (0..128).map(|_| rng.random()).collect();
        let mut flipped = bits.clone();
        let k = rng.random_range(0..128);
        flipped[k] = !flipped[k];
        let a = make_auth_tag(&d, &Response::from_bits(bits)).unwrap();
        let b = make_auth_tag(&d, &Response::from_bits(flipped)).unwrap();
        total += a.0.as_bytes().iter().zip(b.0.as_bytes()).map(|(x, y)| (x ^ y).count_ones()).sum::<u32>();
    }
    // a fair 256-bit coin flip has sd 8 per trial, so the mean of 1000 has sd 0.25
    let mean = total as f64 / trials as f64;
    assert!((mean - 128.0).abs() < 2.0, "mean differing bits {mean}");
}

#[test]
fn distinct_responses_never_share_a_tag() {
    let d = BlockData { device_id: DeviceId::truncate(0xb827_eb00_0001), seq: 3, t_init: 9000, payload: b"t=21.5".to_vec() };
    let hasher = pufchain::ledger::TagHasher::new(&d).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut responses = HashSet::new();
    let mut tags = HashSet::new();
    while responses.len() < 1_000_000 {
        let bits: u128 = rng.random();
        if !responses.insert(bits) {
            continue;
        }
        let r = Response::from_bits((0..128).map(|i| bits >> (127 - i) & 1 == 1).collect());
        assert!(tags.insert(hasher.tag(&r).unwrap()), "tag collision");
    }
}
