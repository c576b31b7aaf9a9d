use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::wire::{attestation_tag, Attestation, AttestationHasher, WireBlock};
use crate::error::{Error, Result};
use crate::ids::{DeviceId, NodeId};
use crate::ledger::{make_auth_tag, BlockData, Chain, ChainEntry, TagHasher};
use crate::puf::{Challenge, PufDevice};
use crate::registry::Registry;

/// False validations a trusted node may accumulate before it is demoted.
pub const DEFAULT_DEMOTION_THRESHOLD: u32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Trusted,
    Client,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RejectReason {
    /// No enrolled response reproduces the tag.
    NoMatch,
    UnknownDevice,
    /// Sequence number not above the last accepted one for the device.
    Replay,
}

impl RejectReason {
    pub fn code(self) -> &'static str {
        match self {
            RejectReason::NoMatch => "no-match",
            RejectReason::UnknownDevice => "unknown-device",
            RejectReason::Replay => "replay",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DropReason {
    /// Not validated, or validated by a node that is not trusted.
    NotFromTrusted,
    /// Claims a trusted validator but the attestation does not check out.
    BadValidation,
    Replay,
}

impl DropReason {
    pub fn code(self) -> &'static str {
        match self {
            DropReason::NotFromTrusted => "not-from-trusted",
            DropReason::BadValidation => "bad-validation",
            DropReason::Replay => "replay",
        }
    }
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[allow(clippy::large_enum_variant)]
pub enum AuthOutcome {
    Accepted { entry: ChainEntry, rebroadcast: WireBlock },
    Rejected(RejectReason),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ClientOutcome {
    Appended(ChainEntry),
    Dropped(DropReason),
}

/// One network participant. Owned by exactly one logical actor.
#[derive(Clone, Debug)]
pub struct NodeState {
    node_id: NodeId,
    role: Role,
    device: PufDevice,
    challenges: Vec<Challenge>,
    chain: Chain,
    next_seq: u64,
    trust_value: i64,
    false_validations: u32,
    demotion_threshold: u32,
    accepted_seq: BTreeMap<DeviceId, u64>,
    hash_evals: u64,
    attestations: u64,
}

impl NodeState {
    /// `challenges` is the list provisioned to the device at enrolment. The
    /// node is identified by its device's MAC address.
    pub fn new(role: Role, device: PufDevice, challenges: Vec<Challenge>) -> Self {
        Self {
            node_id: device.device_id(),
            role,
            device,
            challenges,
            chain: Chain::new(),
            next_seq: 0,
            trust_value: 0,
            false_validations: 0,
            demotion_threshold: DEFAULT_DEMOTION_THRESHOLD,
            accepted_seq: BTreeMap::new(),
            hash_evals: 0,
            attestations: 0,
        }
    }

    pub fn with_demotion_threshold(mut self, threshold: u32) -> Self {
        self.demotion_threshold = threshold;
        self
    }

    pub fn node_id(&self) -> NodeId {
        self.node_id
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn device(&self) -> &PufDevice {
        &self.device
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn trust_value(&self) -> i64 {
        self.trust_value
    }

    pub fn false_validations(&self) -> u32 {
        self.false_validations
    }

    pub fn enrolled_challenge_count(&self) -> usize {
        self.challenges.len()
    }

    /// Tag computations performed so far (authentication scans and
    /// attestation checks).
    pub fn hash_evals(&self) -> u64 {
        self.hash_evals
    }

    /// Builds and tags a new block from local sensor data.
    pub fn initiate(&mut self, payload: Vec<u8>, challenge_index: usize, now: u64) -> Result<WireBlock> {
        let challenge = self.challenges.get(challenge_index).ok_or_else(|| {
            Error::Argument(format!(
                "challenge index {challenge_index} out of range for {} enrolled challenges",
                self.challenges.len()
            ))
        })?;
        let data = BlockData { device_id: self.device.device_id(), seq: self.next_seq, t_init: now, payload };
        let response = self.device.evaluate_reference(challenge)?;
        let auth_tag = make_auth_tag(&data, &response)?;
        self.next_seq += 1;
        Ok(WireBlock { data, auth_tag, origin: self.node_id, validated_by: None, attestation: None })
    }

    /// Trusted-node check of a broadcast block. Scans every enrolled response
    /// of the sender in stored order; stops at the first match.
    pub fn authenticate(&mut self, block: &WireBlock, registry: &Registry, now: u64) -> Result<AuthOutcome> {
        if self.role != Role::Trusted {
            return Err(Error::Argument(format!("node {} is not trusted", self.node_id)));
        }
        let device = block.data.device_id;
        let Ok(responses) = registry.lookup(self.node_id, device) else {
            return Ok(AuthOutcome::Rejected(RejectReason::UnknownDevice));
        };
        let hasher = TagHasher::new(&block.data)?;
        let mut matched = false;
        for r in responses {
            self.hash_evals += 1;
            if hasher.tag(r)? == block.auth_tag {
                matched = true;
                break;
            }
        }
        if !matched {
            return Ok(AuthOutcome::Rejected(RejectReason::NoMatch));
        }
        if self.accepted_seq.get(&device).is_some_and(|last| block.data.seq <= *last) {
            return Ok(AuthOutcome::Rejected(RejectReason::Replay));
        }

        let chain = std::mem::take(&mut self.chain);
        self.chain = chain.append(block.data.clone(), block.auth_tag, self.node_id, now)?;
        self.accepted_seq.insert(device, block.data.seq);
        self.trust_value += 1;

        let tag = self.attest(&block.data, &block.auth_tag, now)?;
        let rebroadcast = WireBlock {
            data: block.data.clone(),
            auth_tag: block.auth_tag,
            origin: block.origin,
            validated_by: Some(self.node_id),
            attestation: Some(Attestation { t_validated: now, tag }),
        };
        let entry = self.chain.last().expect("just appended").clone();
        Ok(AuthOutcome::Accepted { entry, rebroadcast })
    }

    fn attest(&mut self, data: &BlockData, auth_tag: &crate::ledger::AuthTag, now: u64) -> Result<crate::Hash256> {
        if self.challenges.is_empty() {
            return Err(Error::Argument(format!("trusted node {} has no enrolled challenges", self.node_id)));
        }
        let idx = (self.attestations % self.challenges.len() as u64) as usize;
        self.attestations += 1;
        let response = self.device.evaluate_reference(&self.challenges[idx])?;
        attestation_tag(data, auth_tag, self.node_id, now, &response)
    }

    /// Client-side handling of a block claimed to be validated. The
    /// attestation is checked against every enrolled response of the
    /// claimed validator.
    pub fn accept_validated(&mut self, block: &WireBlock, registry: &Registry, _now: u64) -> Result<ClientOutcome> {
        if self.role != Role::Client {
            return Err(Error::Argument(format!("node {} is not a client", self.node_id)));
        }
        let drop = |r| Ok(ClientOutcome::Dropped(r));
        let Some(validator) = block.validated_by else {
            return drop(DropReason::NotFromTrusted);
        };
        let Ok(responses) = registry.validator_responses(validator) else {
            return drop(DropReason::NotFromTrusted);
        };
        let Some(att) = block.attestation else {
            return drop(DropReason::BadValidation);
        };
        let hasher = AttestationHasher::new(&block.data, &block.auth_tag, validator, att.t_validated)?;
        let mut valid = false;
        for r in responses {
            self.hash_evals += 1;
            if hasher.tag(r)? == att.tag {
                valid = true;
                break;
            }
        }
        if !valid {
            return drop(DropReason::BadValidation);
        }
        let device = block.data.device_id;
        if self.accepted_seq.get(&device).is_some_and(|last| block.data.seq <= *last) {
            return drop(DropReason::Replay);
        }
        let chain = std::mem::take(&mut self.chain);
        self.chain = chain.append(block.data.clone(), block.auth_tag, validator, att.t_validated)?;
        self.accepted_seq.insert(device, block.data.seq);
        Ok(ClientOutcome::Appended(self.chain.last().expect("just appended").clone()))
    }

    /// Records a validation later shown to be false. Returns `true` when
    /// this demotes the node to a client.
    pub fn penalize_false_validation(&mut self) -> bool {
        self.trust_value -= 1;
        self.false_validations += 1;
        if self.role == Role::Trusted && self.false_validations >= self.demotion_threshold {
            self.role = Role::Client;
            return true;
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fom::ScreeningPolicy;
    use crate::puf::{manufacture, PufConfig};
    use crate::registry::Enrollment;

    struct Net {
        registry: Registry,
        trusted: NodeState,
        client: NodeState,
        other: NodeState,
    }

    fn net() -> Net {
        let cfg = PufConfig::default();
        let t = manufacture(&cfg, DeviceId::truncate(0xa0), 1).unwrap();
        let c = manufacture(&cfg, DeviceId::truncate(0xb0), 2).unwrap();
        let o = manufacture(&cfg, DeviceId::truncate(0xc0), 3).unwrap();
        let mut registry = Registry::new([t.device_id()]);
        let params = Enrollment { n_candidates: 60, policy: ScreeningPolicy::default(), seed: 9, enrolled_at: 0 };
        for d in [&t, &c, &o] {
            registry.enroll(d, &params).unwrap();
        }
        let node = |role, d: PufDevice| {
            let ch = registry.enrolled_challenges(d.device_id()).unwrap();
            NodeState::new(role, d, ch)
        };
        Net {
            trusted: node(Role::Trusted, t),
            client: node(Role::Client, c),
            other: node(Role::Client, o),
            registry,
        }
    }

    #[test]
    fn sequence_numbers_increase() {
        let mut n = net();
        let a = n.client.initiate(vec![1], 0, 10).unwrap();
        let b = n.client.initiate(vec![2], 1, 11).unwrap();
        assert_eq!((a.data.seq, b.data.seq), (0, 1));
        assert_eq!(n.client.next_seq(), 2);
        assert!(a.validated_by.is_none());
    }

    #[test]
    fn challenge_index_out_of_range() {
        let mut n = net();
        let k = n.client.enrolled_challenge_count();
        assert!(matches!(n.client.initiate(vec![], k, 0), Err(Error::Argument(_))));
        assert_eq!(n.client.next_seq(), 0);
    }

    #[test]
    fn happy_path_replicates() {
        let mut n = net();
        let block = n.client.initiate(b"21.5C".to_vec(), 3, 100).unwrap();
        let AuthOutcome::Accepted { entry, rebroadcast } = n.trusted.authenticate(&block, &n.registry, 220).unwrap() else {
            panic!("rejected")
        };
        assert_eq!(n.trusted.chain().len(), 1);
        assert_eq!(n.trusted.trust_value(), 1);
        assert_eq!(rebroadcast.validated_by, Some(n.trusted.node_id()));
        for c in [&mut n.client, &mut n.other] {
            let ClientOutcome::Appended(e) = c.accept_validated(&rebroadcast, &n.registry, 300).unwrap() else {
                panic!("dropped")
            };
            assert_eq!(e, entry);
        }
        assert_eq!(n.client.chain(), n.trusted.chain());
    }

    #[test]
    fn linear_scan_bound() {
        let mut n = net();
        let k = n.client.enrolled_challenge_count();
        let block = n.client.initiate(vec![], k - 1, 0).unwrap();
        n.trusted.authenticate(&block, &n.registry, 1).unwrap();
        assert!(n.trusted.hash_evals() <= k as u64);
        let mut bad = n.client.initiate(vec![], 0, 2).unwrap();
        bad.auth_tag.0 .0[0] ^= 1;
        let before = n.trusted.hash_evals();
        assert_eq!(n.trusted.authenticate(&bad, &n.registry, 3).unwrap(), AuthOutcome::Rejected(RejectReason::NoMatch));
        assert_eq!(n.trusted.hash_evals() - before, k as u64);
    }

    #[test]
    fn flipped_payload_bit_matches_no_stored_response() {
        let mut n = net();
        let mut block = n.client.initiate(vec![0x55; 8], 2, 0).unwrap();
        block.data.payload[3] ^= 0x10;
        // oracle: recompute every candidate tag independently
        let any = n
            .registry
            .lookup(n.trusted.node_id(), block.data.device_id)
            .unwrap()
            .iter()
            .any(|r| make_auth_tag(&block.data, r).unwrap() == block.auth_tag);
        assert!(!any);
        assert_eq!(n.trusted.authenticate(&block, &n.registry, 5).unwrap(), AuthOutcome::Rejected(RejectReason::NoMatch));
    }

    #[test]
    fn replayed_block_is_rejected() {
        let mut n = net();
        let block = n.client.initiate(vec![], 0, 0).unwrap();
        assert!(matches!(n.trusted.authenticate(&block, &n.registry, 1).unwrap(), AuthOutcome::Accepted { .. }));
        assert_eq!(n.trusted.authenticate(&block, &n.registry, 2).unwrap(), AuthOutcome::Rejected(RejectReason::Replay));
        assert_eq!(n.trusted.chain().len(), 1);
    }

    #[test]
    fn unknown_device_is_rejected() {
        let mut n = net();
        let stranger = manufacture(&PufConfig::default(), DeviceId::truncate(0xdd), 77).unwrap();
        let ch = n.registry.enrolled_challenges(n.client.node_id()).unwrap();
        let mut rogue = NodeState::new(Role::Client, stranger, ch);
        let block = rogue.initiate(vec![], 0, 0).unwrap();
        assert_eq!(
            n.trusted.authenticate(&block, &n.registry, 1).unwrap(),
            AuthOutcome::Rejected(RejectReason::UnknownDevice)
        );
    }

    #[test]
    fn client_drops() {
        let mut n = net();
        let block = n.client.initiate(vec![], 0, 0).unwrap();
        let reg = n.registry.clone();
        assert_eq!(n.other.accept_validated(&block, &reg, 1).unwrap(), ClientOutcome::Dropped(DropReason::NotFromTrusted));

        let mut forged = block.clone();
        forged.validated_by = Some(n.client.node_id());
        assert_eq!(n.other.accept_validated(&forged, &reg, 1).unwrap(), ClientOutcome::Dropped(DropReason::NotFromTrusted));

        forged.validated_by = Some(n.trusted.node_id());
        assert_eq!(n.other.accept_validated(&forged, &reg, 1).unwrap(), ClientOutcome::Dropped(DropReason::BadValidation));

        let AuthOutcome::Accepted { rebroadcast, .. } = n.trusted.authenticate(&block, &reg, 2).unwrap() else { panic!() };
        let mut late = rebroadcast.clone();
        late.attestation.as_mut().unwrap().t_validated += 1;
        assert_eq!(n.other.accept_validated(&late, &reg, 3).unwrap(), ClientOutcome::Dropped(DropReason::BadValidation));
        assert!(matches!(n.other.accept_validated(&rebroadcast, &reg, 3).unwrap(), ClientOutcome::Appended(_)));
        assert_eq!(n.other.accept_validated(&rebroadcast, &reg, 4).unwrap(), ClientOutcome::Dropped(DropReason::Replay));
    }

    #[test]
    fn role_preconditions() {
        let mut n = net();
        let block = n.client.initiate(vec![], 0, 0).unwrap();
        let reg = n.registry.clone();
        assert!(n.client.authenticate(&block, &reg, 0).is_err());
        assert!(n.trusted.accept_validated(&block, &reg, 0).is_err());
    }

    #[test]
    fn demotion_after_threshold() {
        let mut n = net();
        let mut t = n.trusted.clone().with_demotion_threshold(3);
        let block = n.client.initiate(vec![], 0, 0).unwrap();
        t.authenticate(&block, &n.registry, 1).unwrap();
        assert_eq!(t.trust_value(), 1);
        assert!(!t.penalize_false_validation());
        assert!(!t.penalize_false_validation());
        assert!(t.penalize_false_validation());
        assert_eq!(t.role(), Role::Client);
        assert_eq!(t.trust_value(), 1 - 3);
    }
}
