use std::fmt;

use serde::{Deserialize, Serialize};

use super::block::{canonical_bytes, sha256, AuthTag, BlockData};
use crate::error::Result;
use crate::ids::{Hash256, NodeId};

/// An authenticated block linked into a local ledger.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainEntry {
    pub height: u64,
    pub prev_hash: Hash256,
    pub data: BlockData,
    pub auth_tag: AuthTag,
    pub trusted_node_id: NodeId,
    pub t_validated: u64,
    pub entry_hash: Hash256,
}

impl ChainEntry {
    /// `height || prev_hash || canonical(data) || auth_tag || trusted_node_id || t_validated`
    pub fn header_bytes(
        height: u64,
        prev_hash: &Hash256,
        data: &BlockData,
        auth_tag: &AuthTag,
        trusted_node_id: NodeId,
        t_validated: u64,
    ) -> Result<Vec<u8>> {
        let data = canonical_bytes(data)?;
        let mut out = Vec::with_capacity(8 + 32 + data.len() + 32 + 6 + 8);
        out.extend_from_slice(&height.to_be_bytes());
        out.extend_from_slice(prev_hash.as_bytes());
        out.extend_from_slice(&data);
        out.extend_from_slice(auth_tag.0.as_bytes());
        out.extend_from_slice(&trusted_node_id.to_be_bytes());
        out.extend_from_slice(&t_validated.to_be_bytes());
        Ok(out)
    }

    pub fn compute_hash(&self) -> Result<Hash256> {
        let bytes = Self::header_bytes(
            self.height,
            &self.prev_hash,
            &self.data,
            &self.auth_tag,
            self.trusted_node_id,
            self.t_validated,
        )?;
        Ok(sha256(&[&bytes]))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaultKind {
    /// Stored height differs from the entry's position.
    Height,
    /// `prev_hash` does not match the previous entry.
    Link,
    /// Stored `entry_hash` does not match the recomputed digest.
    Hash,
    /// The persisted record could not be decoded.
    Malformed,
}

/// First failing position found by verification.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChainFault {
    pub height: u64,
    pub kind: FaultKind,
}

impl fmt::Display for ChainFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "chain broken at height {} ({:?})", self.height, self.kind)
    }
}

impl std::error::Error for ChainFault {}

/// An ordered, hash-linked list of entries starting at height 0.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Chain {
    entries: Vec<ChainEntry>,
}

impl Chain {
    pub fn new() -> Self {
        Self::default()
    }

    /// Wraps entries as read from storage; nothing is checked here, call
    /// [`Chain::verify`].
    pub fn from_entries(entries: Vec<ChainEntry>) -> Self {
        Self { entries }
    }

    pub fn entries(&self) -> &[ChainEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last(&self) -> Option<&ChainEntry> {
        self.entries.last()
    }

    pub fn tip_hash(&self) -> Hash256 {
        self.entries.last().map_or(Hash256::ZERO, |e| e.entry_hash)
    }

    /// Returns the chain extended by one entry. Existing entries are never
    /// touched; callers that keep a clone of `self` keep the old value.
    pub fn append(
        mut self,
        data: BlockData,
        auth_tag: AuthTag,
        trusted_node_id: NodeId,
        t_validated: u64,
    ) -> Result<Self> {
        let height = self.entries.len() as u64;
        let prev_hash = self.tip_hash();
        let bytes = ChainEntry::header_bytes(height, &prev_hash, &data, &auth_tag, trusted_node_id, t_validated)?;
        let entry_hash = sha256(&[&bytes]);
        self.entries.push(ChainEntry {
            height,
            prev_hash,
            data,
            auth_tag,
            trusted_node_id,
            t_validated,
            entry_hash,
        });
        Ok(self)
    }

    /// Recomputes every digest and link; reports the lowest failing height.
    pub fn verify(&self) -> std::result::Result<(), ChainFault> {
        let mut prev = Hash256::ZERO;
        for (pos, e) in self.entries.iter().enumerate() {
            let height = pos as u64;
            let fault = |kind| Err(ChainFault { height, kind });
            if e.height != height {
                return fault(FaultKind::Height);
            }
            if e.prev_hash != prev {
                return fault(FaultKind::Link);
            }
            match e.compute_hash() {
                Ok(h) if h == e.entry_hash => {}
                Ok(_) => return fault(FaultKind::Hash),
                Err(_) => return fault(FaultKind::Malformed),
            }
            prev = e.entry_hash;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::DeviceId;

    fn block(seq: u64) -> (BlockData, AuthTag) {
        let data = BlockData { device_id: DeviceId::truncate(7), seq, t_init: seq * 10, payload: vec![seq as u8; 4] };
        (data, AuthTag(sha256(&[&seq.to_be_bytes()])))
    }

    fn chain(n: u64) -> Chain {
        (0..n).fold(Chain::new(), |c, s| {
            let (d, t) = block(s);
            c.append(d, t, DeviceId::truncate(1), s * 10 + 5).unwrap()
        })
    }

    #[test]
    fn genesis_and_linkage() {
        let c = chain(2);
        assert_eq!(c.entries()[0].height, 0);
        assert_eq!(c.entries()[0].prev_hash, Hash256::ZERO);
        assert_eq!(c.entries()[1].prev_hash, c.entries()[0].entry_hash);
        assert_eq!(c.verify(), Ok(()));
    }

    #[test]
    fn empty_chain_verifies() {
        assert_eq!(Chain::new().verify(), Ok(()));
    }

    #[test]
    fn append_leaves_the_original_value_alone() {
        let c = chain(3);
        let snapshot = c.clone();
        let (d, t) = block(3);
        let longer = c.clone().append(d, t, DeviceId::truncate(1), 99).unwrap();
        assert_eq!(c, snapshot);
        assert_eq!(&longer.entries()[..3], snapshot.entries());
    }

    #[test]
    fn payload_mutation_is_reported_at_its_height() {
        for k in 0..10 {
            let mut entries = chain(10).entries().to_vec();
            entries[k].data.payload[0] ^= 1;
            let fault = Chain::from_entries(entries).verify().unwrap_err();
            assert_eq!(fault, ChainFault { height: k as u64, kind: FaultKind::Hash });
        }
    }

    #[test]
    fn wrong_height_is_reported() {
        let mut entries = chain(3).entries().to_vec();
        entries[2].height = 7;
        assert_eq!(Chain::from_entries(entries).verify().unwrap_err().kind, FaultKind::Height);
    }
}
