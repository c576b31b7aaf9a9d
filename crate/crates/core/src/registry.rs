//! The secure database of enrolled challenge-response pairs.
//!
//! Records are written once, at enrolment, and never updated. Only nodes on
//! the trusted list may read a device's responses; any node may read the
//! responses of a *trusted* node, which is how clients check that a block
//! really was validated by one.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fom::{screen_challenge, ScreeningPolicy};
use crate::ids::{DeviceId, NodeId};
use crate::ledger::RESPONSE_BITS;
use crate::puf::{Challenge, PufDevice, Response};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CrpRecord {
    device_id: DeviceId,
    pairs: Vec<(Challenge, Response)>,
    enrolled_at: u64,
}

impl CrpRecord {
    pub fn new(device_id: DeviceId, pairs: Vec<(Challenge, Response)>, enrolled_at: u64) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EnrollmentFailed(device_id));
        }
        let width = pairs[0].1.len();
        let mut seen = BTreeSet::new();
        for (c, r) in &pairs {
            if r.len() != width || c.len() != width {
                return Err(Error::Dimension(format!("record for {device_id} mixes response widths")));
            }
            if !seen.insert(c.selectors()) {
                return Err(Error::Conflict(format!("record for {device_id} repeats a challenge")));
            }
        }
        Ok(Self { device_id, pairs, enrolled_at })
    }

    pub fn device_id(&self) -> DeviceId {
        self.device_id
    }

    pub fn pairs(&self) -> &[(Challenge, Response)] {
        &self.pairs
    }

    pub fn enrolled_at(&self) -> u64 {
        self.enrolled_at
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn to_json_line(&self) -> String {
        let raw = RawRecord {
            device_id: self.device_id,
            enrolled_at: self.enrolled_at,
            pairs: self
                .pairs
                .iter()
                .map(|(c, r)| RawPair { challenge: c.clone(), response: r.to_hex() })
                .collect(),
        };
        serde_json::to_string(&raw).expect("records always serialise")
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        let raw: RawRecord = serde_json::from_str(line).map_err(|e| Error::Parse(e.to_string()))?;
        let pairs = raw
            .pairs
            .into_iter()
            .map(|p| {
                if !crate::ids::is_lower_hex(&p.response) {
                    return Err(Error::Parse("response is not lowercase hex".into()));
                }
                let bytes = hex::decode(&p.response).map_err(|e| Error::Parse(e.to_string()))?;
                let r = Response::from_bytes(&bytes, p.challenge.len())?;
                Ok((p.challenge, r))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(raw.device_id, pairs, raw.enrolled_at)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    device_id: DeviceId,
    enrolled_at: u64,
    pairs: Vec<RawPair>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPair {
    challenge: Challenge,
    response: String,
}

/// Enrolment parameters besides the device itself.
#[derive(Clone, Debug)]
pub struct Enrollment {
    pub n_candidates: usize,
    pub policy: ScreeningPolicy,
    /// Root of the candidate-challenge and screening-jitter streams.
    pub seed: u64,
    pub enrolled_at: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Registry {
    records: BTreeMap<DeviceId, CrpRecord>,
    trusted: BTreeSet<NodeId>,
}

impl Registry {
    pub fn new(trusted: impl IntoIterator<Item = NodeId>) -> Self {
        Self { records: BTreeMap::new(), trusted: trusted.into_iter().collect() }
    }

    pub fn is_trusted(&self, node: NodeId) -> bool {
        self.trusted.contains(&node)
    }

    pub fn trusted_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.trusted.iter().copied()
    }

    pub fn is_enrolled(&self, device: DeviceId) -> bool {
        self.records.contains_key(&device)
    }

    pub fn records(&self) -> impl Iterator<Item = &CrpRecord> {
        self.records.values()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Screens `n_candidates` random challenges and stores the noiseless
    /// reference response of every accepted one.
    pub fn enroll(&mut self, device: &PufDevice, params: &Enrollment) -> Result<&CrpRecord> {
        let id = device.device_id();
        if self.records.contains_key(&id) {
            return Err(Error::AlreadyEnrolled(id));
        }
        params.policy.validate(RESPONSE_BITS)?;
        let pairs = screen_candidates(device, params)?;
        let record = CrpRecord::new(id, pairs, params.enrolled_at)?;
        Ok(self.records.entry(id).or_insert(record))
    }

    /// Inserts a record built elsewhere (e.g. loaded from disk).
    pub fn insert(&mut self, record: CrpRecord) -> Result<()> {
        let id = record.device_id;
        if self.records.contains_key(&id) {
            return Err(Error::AlreadyEnrolled(id));
        }
        self.records.insert(id, record);
        Ok(())
    }

    /// Enrolled responses of `device`, in stored order. Trusted readers only.
    pub fn lookup(&self, requester: NodeId, device: DeviceId) -> Result<Vec<&Response>> {
        if !self.is_trusted(requester) {
            return Err(Error::AccessDenied(requester));
        }
        let record = self.records.get(&device).ok_or(Error::NotFound(device))?;
        Ok(record.pairs.iter().map(|(_, r)| r).collect())
    }

    /// Responses of a trusted node, readable by anyone checking a validation.
    /// Fails with access-denied if `validator` is not on the trusted list.
    pub fn validator_responses(&self, validator: NodeId) -> Result<Vec<&Response>> {
        if !self.is_trusted(validator) {
            return Err(Error::AccessDenied(validator));
        }
        let record = self.records.get(&validator).ok_or(Error::NotFound(validator))?;
        Ok(record.pairs.iter().map(|(_, r)| r).collect())
    }

    /// The challenge list provisioned to a device at enrolment. Challenges
    /// are not secret; responses never leave the database through this call.
    pub fn enrolled_challenges(&self, device: DeviceId) -> Result<Vec<Challenge>> {
        let record = self.records.get(&device).ok_or(Error::NotFound(device))?;
        Ok(record.pairs.iter().map(|(c, _)| c.clone()).collect())
    }

    pub fn to_jsonl(&self) -> String {
        self.records.values().map(|r| r.to_json_line() + "\n").collect()
    }

    pub fn from_jsonl(text: &str, trusted: impl IntoIterator<Item = NodeId>) -> Result<Self> {
        let mut reg = Self::new(trusted);
        for (n, line) in text.lines().enumerate() {
            let record = CrpRecord::from_json_line(line).map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?;
            reg.insert(record)?;
        }
        Ok(reg)
    }
}

fn screen_candidates(device: &PufDevice, params: &Enrollment) -> Result<Vec<(Challenge, Response)>> {
    let id = device.device_id().get();
    let mut rng = seed::rng("registry/candidates", &[params.seed, id]);
    let mut seen = BTreeSet::new();
    let mut pairs = Vec::new();
    for k in 0..params.n_candidates as u64 {
        let challenge = Challenge::random(&mut rng, device.bank_size(), RESPONSE_BITS)?;
        if !seen.insert(challenge.selectors().to_vec()) {
            continue;
        }
        let seeds: Vec<u64> = (0..params.policy.n_screen_reevals as u64)
            .map(|r| seed::derive_u64("registry/screen", &[params.seed, id, k, r]))
            .collect();
        let verdict = screen_challenge(device, &challenge, &params.policy, &seeds)?;
        if verdict.accepted {
            pairs.push((challenge, verdict.reference));
        }
    }
    if pairs.is_empty() {
        return Err(Error::EnrollmentFailed(device.device_id()));
    }
    Ok(pairs)
}
