//! Independent re-implementations used as test oracles. Nothing here calls
//! the library's encoders, taggers or verdict logic.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};

use pufchain::consensus::{DropReason, RejectReason, Role, WireBlock};
use pufchain::harness::ScenarioRun;
use pufchain::ledger::BlockData;
use pufchain::netsim::Verdict;
use pufchain::puf::Response;
use pufchain::registry::Registry;
use pufchain::{DeviceId, NodeId};

/// FIPS 180-4 SHA-256, written from the standard.
pub fn sha256_reference(msg: &[u8]) -> [u8; 32] {
    const K: [u32; 64] = [
        0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4, 0xab1c5ed5, 0xd807aa98,
        0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786,
        0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da, 0x983e5152, 0xa831c66d, 0xb00327c8,
        0xbf597fc7, 0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13,
        0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b, 0xc24b8b70, 0xc76c51a3, 0xd192e819,
        0xd6990624, 0xf40e3585, 0x106aa070, 0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a,
        0x5b9cca4f, 0x682e6ff3, 0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7,
        0xc67178f2,
    ];
    let mut h: [u32; 8] =
        [0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a, 0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19];
    let mut padded = msg.to_vec();
    padded.push(0x80);
    while padded.len() % 64 != 56 {
        padded.push(0);
    }
    padded.extend_from_slice(&((msg.len() as u64) * 8).to_be_bytes());
    for block in padded.chunks(64) {
        let mut w = [0u32; 64];
        for t in 0..16 {
            w[t] = u32::from_be_bytes(block[4 * t..4 * t + 4].try_into().unwrap());
        }
        for t in 16..64 {
            let s0 = w[t - 15].rotate_right(7) ^ w[t - 15].rotate_right(18) ^ (w[t - 15] >> 3);
            let s1 = w[t - 2].rotate_right(17) ^ w[t - 2].rotate_right(19) ^ (w[t - 2] >> 10);
            w[t] = w[t - 16].wrapping_add(s0).wrapping_add(w[t - 7]).wrapping_add(s1);
        }
        let [mut a, mut b, mut c, mut d, mut e, mut f, mut g, mut hh] = h;
        for t in 0..64 {
            let big_s1 = e.rotate_right(6) ^ e.rotate_right(11) ^ e.rotate_right(25);
            let ch = (e & f) ^ (!e & g);
            let t1 = hh.wrapping_add(big_s1).wrapping_add(ch).wrapping_add(K[t]).wrapping_add(w[t]);
            let big_s0 = a.rotate_right(2) ^ a.rotate_right(13) ^ a.rotate_right(22);
            let maj = (a & b) ^ (a & c) ^ (b & c);
            let t2 = big_s0.wrapping_add(maj);
            hh = g;
            g = f;
            f = e;
            e = d.wrapping_add(t1);
            d = c;
            c = b;
            b = a;
            a = t1.wrapping_add(t2);
        }
        for (x, y) in h.iter_mut().zip([a, b, c, d, e, f, g, hh]) {
            *x = x.wrapping_add(y);
        }
    }
    let mut out = [0u8; 32];
    for (i, word) in h.iter().enumerate() {
        out[4 * i..4 * i + 4].copy_from_slice(&word.to_be_bytes());
    }
    out
}

pub fn sha(parts: &[&[u8]]) -> [u8; 32] {
    use sha2::Digest;
    let mut h = sha2::Sha256::new();
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

pub fn id_bytes(id: DeviceId) -> [u8; 6] {
    let b = id.get().to_be_bytes();
    b[2..].try_into().unwrap()
}

pub fn canonical(d: &BlockData) -> Vec<u8> {
    let mut v = Vec::with_capacity(26 + d.payload.len());
    v.extend_from_slice(&id_bytes(d.device_id));
    v.extend_from_slice(&d.seq.to_be_bytes());
    v.extend_from_slice(&d.t_init.to_be_bytes());
    v.extend_from_slice(&(d.payload.len() as u32).to_be_bytes());
    v.extend_from_slice(&d.payload);
    v
}

pub fn pack(r: &Response) -> [u8; 16] {
    let mut out = [0u8; 16];
    for (i, b) in r.bits().iter().enumerate() {
        if *b {
            out[i / 8] |= 1 << (7 - i % 8);
        }
    }
    out
}

pub fn tag(d: &BlockData, r: &Response) -> [u8; 32] {
    sha(&[&canonical(d), &pack(r)])
}

pub fn attestation(d: &BlockData, auth_tag: &[u8; 32], validator: NodeId, t: u64, r: &Response) -> [u8; 32] {
    sha(&[&canonical(d), auth_tag, &id_bytes(validator), &t.to_be_bytes(), &pack(r)])
}

/// Reference model of the receive-side rules, fed deliveries in handling
/// order.
pub struct VerdictOracle<'a> {
    registry: &'a Registry,
    trusted: NodeId,
    last_seq: BTreeMap<(NodeId, DeviceId), u64>,
}

impl<'a> VerdictOracle<'a> {
    pub fn new(registry: &'a Registry, trusted: NodeId) -> Self {
        Self { registry, trusted, last_seq: BTreeMap::new() }
    }

    fn responses(&self, device: DeviceId) -> Option<Vec<Response>> {
        self.registry.records().find(|r| r.device_id() == device).map(|r| r.pairs().iter().map(|p| p.1.clone()).collect())
    }

    pub fn expect(&mut self, receiver: NodeId, role: Role, b: &WireBlock) -> Verdict {
        let key = (receiver, b.data.device_id);
        let fresh = self.last_seq.get(&key).is_none_or(|s| b.data.seq > *s);
        match role {
            Role::Trusted => {
                let Some(rs) = self.responses(b.data.device_id) else {
                    return Verdict::Rejected(RejectReason::UnknownDevice);
                };
                if !rs.iter().any(|r| tag(&b.data, r) == *b.auth_tag.0.as_bytes()) {
                    return Verdict::Rejected(RejectReason::NoMatch);
                }
                if !fresh {
                    return Verdict::Rejected(RejectReason::Replay);
                }
                self.last_seq.insert(key, b.data.seq);
                Verdict::Accepted
            }
            Role::Client => {
                let Some(v) = b.validated_by.filter(|v| *v == self.trusted) else {
                    return Verdict::Dropped(DropReason::NotFromTrusted);
                };
                let rs = self.responses(v).expect("trusted node is enrolled");
                let ok = b.attestation.is_some_and(|a| {
                    rs.iter().any(|r| attestation(&b.data, b.auth_tag.0.as_bytes(), v, a.t_validated, r) == *a.tag.as_bytes())
                });
                if !ok {
                    return Verdict::Dropped(DropReason::BadValidation);
                }
                if !fresh {
                    return Verdict::Dropped(DropReason::Replay);
                }
                self.last_seq.insert(key, b.data.seq);
                Verdict::Appended
            }
        }
    }
}

#[derive(Debug, Default)]
pub struct SoundnessTally {
    pub adversarial: usize,
    pub mismatched_verdicts: Vec<String>,
    pub false_accepts: Vec<String>,
}

/// Checks every delivery of a run against the oracle and counts accepts of
/// blocks that no honest device produced, or that a node had already taken.
pub fn audit(run: &ScenarioRun, tally: &mut SoundnessTally) {
    let trusted = run.world.sim.trusted().unwrap().node_id;
    let role = |n: NodeId| run.world.sim.entry(n).unwrap().role;
    type Honest = (DeviceId, u64, u64, Vec<u8>, [u8; 32]);
    let honest: HashSet<Honest> = run
        .outcome
        .transactions
        .iter()
        .map(|t| {
            let script = &run.world.scenario.initiations[t.tx];
            let data = BlockData { device_id: t.origin, seq: t.seq, t_init: t.t_i, payload: script.payload.clone() };
            let dev = run.world.devices.iter().find(|d| d.device_id() == t.origin).unwrap();
            let ch = &run.world.registry.enrolled_challenges(t.origin).unwrap()[t.challenge_index];
            let r = dev.evaluate_reference(ch).unwrap();
            (t.origin, t.seq, t.t_i, script.payload.clone(), tag(&data, &r))
        })
        .collect();
    let mut oracle = VerdictOracle::new(&run.world.registry, trusted);
    let mut taken: HashSet<(NodeId, DeviceId, u64)> = HashSet::new();
    for d in &run.outcome.deliveries {
        tally.adversarial += usize::from(d.adversarial.is_some());
        let want = oracle.expect(d.to, role(d.to), &d.block);
        if want != d.verdict {
            tally.mismatched_verdicts.push(format!("msg {} to {}: got {:?}, oracle {:?}", d.msg, d.to, d.verdict, want));
        }
        if matches!(d.verdict, Verdict::Accepted | Verdict::Appended) {
            let b = &d.block.data;
            let key = (b.device_id, b.seq, b.t_init, b.payload.clone(), *d.block.auth_tag.0.as_bytes());
            if !honest.contains(&key) || !taken.insert((d.to, b.device_id, b.seq)) {
                tally.false_accepts.push(format!("msg {} to {} ({:?})", d.msg, d.to, d.adversarial));
            }
        }
    }
    tally.adversarial += run.outcome.lost.iter().filter(|l| l.adversarial.is_some()).count();
}
