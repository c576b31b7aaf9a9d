//! Block data model, canonical encoding, PUF-keyed hashing and the
//! append-only hash-linked chain.

mod block;
mod chain;
mod store;

pub use block::{canonical_bytes, make_auth_tag, parse_canonical, sha256, AuthTag, BlockData, TagHasher, MAX_PAYLOAD};
pub use chain::{Chain, ChainEntry, ChainFault, FaultKind};
pub use store::{chain_from_jsonl, chain_to_jsonl, entry_from_json_line, entry_to_json_line, verify_jsonl};

/// Width of the response bound into every auth tag.
pub const RESPONSE_BITS: usize = 128;
