//! Line-delimited JSON chain files.
//!
//! One entry per line, fields in canonical order, digests and payload as
//! lowercase hex, every line terminated by `\n`. Decoding is strict: a line
//! is accepted only if re-encoding it reproduces the exact bytes, so any
//! edit to a persisted chain is either a decoding failure or a digest
//! mismatch at that entry's height.

use serde::{Deserialize, Serialize};

use super::block::{AuthTag, BlockData};
use super::chain::{Chain, ChainEntry, ChainFault, FaultKind};
use crate::error::{Error, Result};
use crate::ids::{lower_hex, DeviceId, Hash256, NodeId};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryRecord {
    height: u64,
    prev_hash: Hash256,
    device_id: DeviceId,
    seq: u64,
    t_init: u64,
    #[serde(with = "lower_hex")]
    payload: Vec<u8>,
    auth_tag: Hash256,
    trusted_node_id: NodeId,
    t_validated: u64,
    entry_hash: Hash256,
}

impl From<&ChainEntry> for EntryRecord {
    fn from(e: &ChainEntry) -> Self {
        Self {
            height: e.height,
            prev_hash: e.prev_hash,
            device_id: e.data.device_id,
            seq: e.data.seq,
            t_init: e.data.t_init,
            payload: e.data.payload.clone(),
            auth_tag: e.auth_tag.0,
            trusted_node_id: e.trusted_node_id,
            t_validated: e.t_validated,
            entry_hash: e.entry_hash,
        }
    }
}

impl From<EntryRecord> for ChainEntry {
    fn from(r: EntryRecord) -> Self {
        Self {
            height: r.height,
            prev_hash: r.prev_hash,
            data: BlockData { device_id: r.device_id, seq: r.seq, t_init: r.t_init, payload: r.payload },
            auth_tag: AuthTag(r.auth_tag),
            trusted_node_id: r.trusted_node_id,
            t_validated: r.t_validated,
            entry_hash: r.entry_hash,
        }
    }
}

pub fn entry_to_json_line(entry: &ChainEntry) -> String {
    serde_json::to_string(&EntryRecord::from(entry)).expect("entry records always serialise")
}

/// Decodes one line (without its terminator), rejecting any non-canonical
/// spelling.
pub fn entry_from_json_line(line: &[u8]) -> Result<ChainEntry> {
    let record: EntryRecord = serde_json::from_slice(line).map_err(|e| Error::Parse(e.to_string()))?;
    let entry = ChainEntry::from(record);
    if entry_to_json_line(&entry).as_bytes() != line {
        return Err(Error::Parse("entry is not in canonical form".into()));
    }
    Ok(entry)
}

pub fn chain_to_jsonl(chain: &Chain) -> String {
    let mut out = String::new();
    for e in chain.entries() {
        out.push_str(&entry_to_json_line(e));
        out.push('\n');
    }
    out
}

/// Decodes a chain file without checking digests.
pub fn chain_from_jsonl(bytes: &[u8]) -> std::result::Result<Chain, ChainFault> {
    let mut entries = Vec::new();
    for (height, line) in split_lines(bytes).enumerate() {
        let malformed = ChainFault { height: height as u64, kind: FaultKind::Malformed };
        let line = line.map_err(|_| malformed)?;
        entries.push(entry_from_json_line(line).map_err(|_| malformed)?);
    }
    Ok(Chain::from_entries(entries))
}

/// Decodes and verifies a chain file, reporting the lowest broken height.
pub fn verify_jsonl(bytes: &[u8]) -> std::result::Result<Chain, ChainFault> {
    let mut entries: Vec<ChainEntry> = Vec::new();
    for (pos, line) in split_lines(bytes).enumerate() {
        let height = pos as u64;
        let fault = |kind| ChainFault { height, kind };
        let entry = line
            .ok()
            .and_then(|l| entry_from_json_line(l).ok())
            .ok_or(fault(FaultKind::Malformed))?;
        let prev = entries.last().map_or(Hash256::ZERO, |e| e.entry_hash);
        if entry.height != height {
            return Err(fault(FaultKind::Height));
        }
        if entry.prev_hash != prev {
            return Err(fault(FaultKind::Link));
        }
        match entry.compute_hash() {
            Ok(h) if h == entry.entry_hash => {}
            Ok(_) => return Err(fault(FaultKind::Hash)),
            Err(_) => return Err(fault(FaultKind::Malformed)),
        }
        entries.push(entry);
    }
    Ok(Chain::from_entries(entries))
}

/// Splits on `\n`. Every line must be terminated; an unterminated tail is
/// yielded as `Err(())`.
fn split_lines(bytes: &[u8]) -> impl Iterator<Item = std::result::Result<&[u8], ()>> {
    let mut rest = bytes;
    std::iter::from_fn(move || {
        if rest.is_empty() {
            return None;
        }
        match rest.iter().position(|b| *b == b'\n') {
            Some(i) => {
                let line = &rest[..i];
                rest = &rest[i + 1..];
                Some(Ok(line))
            }
            None => {
                rest = &[];
                Some(Err(()))
            }
        }
    })
}
