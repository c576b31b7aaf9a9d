//! Proof-of-PUF-enabled-authentication state machine.
//!
//! * a client **initiates** a block: `H = SHA-256(data || R)` where `R` is
//!   its PUF's response to one of its enrolled challenges, and broadcasts
//!   `(data, H)` without `R`;
//! * the trusted node **authenticates** it by recomputing the tag with every
//!   response enrolled for the sender until one matches, appends it, and
//!   rebroadcasts it with its own attestation;
//! * clients **accept** only blocks carrying a valid trusted-node attestation.
//!
//! A toy proof-of-work miner is included as a latency baseline.

mod node;
mod pow;
mod wire;

pub use node::{AuthOutcome, ClientOutcome, DropReason, NodeState, RejectReason, Role, DEFAULT_DEMOTION_THRESHOLD};
pub use pow::{leading_zero_bits, pow_mine_baseline, PowSolution, MAX_POW_DIFFICULTY};
pub use wire::{attestation_tag, Attestation, AttestationHasher, WireBlock};
