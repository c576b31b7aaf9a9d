use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ids::{Hash256, NodeId};
use crate::ledger::{canonical_bytes, AuthTag, BlockData};
use crate::puf::Response;

/// What travels between nodes: `(D_n, H_n)` plus routing metadata. Never
/// carries a PUF response.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireBlock {
    pub data: BlockData,
    pub auth_tag: AuthTag,
    pub origin: NodeId,
    /// Set only when a trusted node rebroadcasts an authenticated block.
    pub validated_by: Option<NodeId>,
    pub attestation: Option<Attestation>,
}

/// The trusted node's proof that it validated a block: a tag keyed by one of
/// its own enrolled PUF responses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Attestation {
    pub t_validated: u64,
    pub tag: Hash256,
}

/// `SHA-256(canonical(data) || auth_tag || validator (6 BE) || t_validated (8 BE) || response)`
pub fn attestation_tag(
    data: &BlockData,
    auth_tag: &AuthTag,
    validator: NodeId,
    t_validated: u64,
    validator_response: &Response,
) -> Result<Hash256> {
    AttestationHasher::new(data, auth_tag, validator, t_validated)?.tag(validator_response)
}

/// Everything but the validator response absorbed; see [`attestation_tag`].
#[derive(Clone)]
pub struct AttestationHasher {
    prefix: Sha256,
}

impl AttestationHasher {
    pub fn new(data: &BlockData, auth_tag: &AuthTag, validator: NodeId, t_validated: u64) -> Result<Self> {
        let mut prefix = Sha256::new();
        prefix.update(canonical_bytes(data)?);
        prefix.update(auth_tag.0.as_bytes());
        prefix.update(validator.to_be_bytes());
        prefix.update(t_validated.to_be_bytes());
        Ok(Self { prefix })
    }

    pub fn tag(&self, validator_response: &Response) -> Result<Hash256> {
        if validator_response.len() != crate::ledger::RESPONSE_BITS {
            return Err(Error::Argument(format!("validator response has {} bits", validator_response.len())));
        }
        let mut h = self.prefix.clone();
        h.update(validator_response.to_bytes());
        Ok(Hash256(h.finalize().into()))
    }
}

impl WireBlock {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("wire blocks always serialise")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }
}
