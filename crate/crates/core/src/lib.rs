//! PUF-authenticated lightweight blockchain, simulated end to end.
//!
//! The crate models a ring-oscillator/arbiter hybrid PUF, screens its
//! challenges into an enrolment database, authenticates blocks by
//! recomputing `SHA-256(data || response)` against every enrolled response
//! of the originating device, and replicates the authenticated blocks over a
//! deterministic discrete-event network.
//!
//! ```text
//! puf ──► fom ──► registry ──► consensus ──► netsim ──► harness
//!                     ▲            │
//!                     └── ledger ◄─┘
//! ```
//!
//! Every random draw flows from explicit 64-bit seeds, so any run can be
//! reproduced bit for bit. See `examples/` for one runnable program per
//! capability.

pub mod consensus;
pub mod error;
pub mod fom;
pub mod harness;
pub mod ids;
pub mod ledger;
pub mod netsim;
pub mod puf;
pub mod registry;
pub mod seed;

pub use error::{Error, Result};
pub use ids::{DeviceId, Hash256, NodeId};
