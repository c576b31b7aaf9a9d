//! Deterministic discrete-event network.
//!
//! Simulated time is integer milliseconds. Events fire in `(time, insertion
//! order)` order, each node handles one message at a time, and every random
//! draw (latency, loss, processing cost, adversary choices) comes from
//! streams keyed by the configuration seed, so a `(SimConfig, Scenario)`
//! pair always produces the same [`EventLog`].

mod adversary;
mod engine;
mod log;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use adversary::{inject, Adversary, AdversaryKind, Attack, Schedule, Target};
pub use engine::{Delivery, Network, RunOutcome, TxRecord, Verdict};
pub use log::{Event, EventKind, EventLog};

use crate::consensus::Role;
use crate::error::{Error, Result};
use crate::ids::NodeId;
use crate::ledger::MAX_PAYLOAD;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkClass {
    Wired,
    Wireless,
}

/// One access hop: `base_ms + U{0..=jitter_ms}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HopLatency {
    pub base_ms: u64,
    pub jitter_ms: u64,
}

impl HopLatency {
    pub const ZERO: HopLatency = HopLatency { base_ms: 0, jitter_ms: 0 };

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.base_ms + if self.jitter_ms == 0 { 0 } else { rng.random_range(0..=self.jitter_ms) }
    }
}

/// A message crosses the sender's access hop and then the receiver's.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyModel {
    pub wired: HopLatency,
    pub wireless: HopLatency,
}

impl Default for LatencyModel {
    fn default() -> Self {
        Self {
            wired: HopLatency { base_ms: 1, jitter_ms: 1 },
            wireless: HopLatency { base_ms: 3, jitter_ms: 4 },
        }
    }
}

impl LatencyModel {
    pub fn zero() -> Self {
        Self { wired: HopLatency::ZERO, wireless: HopLatency::ZERO }
    }

    pub fn hop(&self, class: LinkClass) -> HopLatency {
        match class {
            LinkClass::Wired => self.wired,
            LinkClass::Wireless => self.wireless,
        }
    }
}

/// Gaussian handler cost in ms, truncated at zero and rounded.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostDist {
    pub mean_ms: f64,
    pub sd_ms: f64,
}

impl CostDist {
    pub const ZERO: CostDist = CostDist { mean_ms: 0.0, sd_ms: 0.0 };

    pub fn sample<R: Rng + ?Sized>(&self, scale: f64, rng: &mut R) -> u64 {
        let (mean, sd) = (self.mean_ms * scale, self.sd_ms * scale);
        let x = if sd > 0.0 { Normal::new(mean, sd).expect("validated").sample(rng) } else { mean };
        x.max(0.0).round() as u64
    }

    fn validate(&self, what: &str) -> Result<()> {
        if !(self.mean_ms.is_finite() && self.mean_ms >= 0.0 && self.sd_ms.is_finite() && self.sd_ms >= 0.0) {
            return Err(Error::Config(format!("{what} cost must have non-negative mean and sd")));
        }
        Ok(())
    }
}

/// Per-handler processing costs.
///
/// Defaults are calibration targets taken from single-board-computer
/// measurements: the trusted node needs about 120 ms to validate and append,
/// a mid-range client about 46.5 ms to check and append.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    /// PUF evaluation plus tagging on the originating device.
    pub initiate: CostDist,
    /// Trusted-node authentication and append.
    pub authenticate: CostDist,
    /// Client attestation check and append.
    pub append: CostDist,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            initiate: CostDist { mean_ms: 2.0, sd_ms: 0.5 },
            authenticate: CostDist { mean_ms: 120.03, sd_ms: 3.44 },
            append: CostDist { mean_ms: 46.5, sd_ms: 2.66 },
        }
    }
}

impl CostModel {
    pub fn zero() -> Self {
        Self { initiate: CostDist::ZERO, authenticate: CostDist::ZERO, append: CostDist::ZERO }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RosterEntry {
    pub node_id: NodeId,
    pub role: Role,
    pub link: LinkClass,
    /// Multiplies every handler cost on this node (slower hardware > 1).
    pub cost_scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub latency: LatencyModel,
    pub costs: CostModel,
    /// Independent loss probability per message.
    pub drop_rate: f64,
    pub roster: Vec<RosterEntry>,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.drop_rate) {
            return Err(Error::Config(format!("drop_rate {} outside [0, 1]", self.drop_rate)));
        }
        let trusted = self.roster.iter().filter(|r| r.role == Role::Trusted).count();
        if trusted != 1 {
            return Err(Error::Config(format!("roster needs exactly one trusted node, found {trusted}")));
        }
        let mut ids: Vec<NodeId> = self.roster.iter().map(|r| r.node_id).collect();
        ids.sort();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("duplicate node id in roster".into()));
        }
        if let Some(r) = self.roster.iter().find(|r| !(r.cost_scale.is_finite() && r.cost_scale > 0.0)) {
            return Err(Error::Config(format!("node {} has non-positive cost_scale", r.node_id)));
        }
        self.costs.initiate.validate("initiate")?;
        self.costs.authenticate.validate("authenticate")?;
        self.costs.append.validate("append")?;
        Ok(())
    }

    pub fn trusted(&self) -> Option<&RosterEntry> {
        self.roster.iter().find(|r| r.role == Role::Trusted)
    }

    pub fn entry(&self, id: NodeId) -> Option<&RosterEntry> {
        self.roster.iter().find(|r| r.node_id == id)
    }
}

/// A scheduled sensor reading on a client.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Initiation {
    pub t_ms: u64,
    pub node: NodeId,
    pub payload: Vec<u8>,
    /// Which enrolled challenge to answer; drawn from the seed when absent.
    pub challenge_index: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Scenario {
    /// Latest time at which anything may be scheduled. In-flight work still
    /// completes after it.
    pub horizon_ms: u64,
    pub initiations: Vec<Initiation>,
    pub adversaries: Vec<Adversary>,
}

impl Scenario {
    pub fn new(horizon_ms: u64) -> Self {
        Self { horizon_ms, ..Self::default() }
    }

    /// Checks the script against the roster; nothing runs if this fails.
    pub fn validate(&self, config: &SimConfig) -> Result<()> {
        for (k, i) in self.initiations.iter().enumerate() {
            let bad = |why: String| Err(Error::Scenario(format!("initiation {k}: {why}")));
            if i.t_ms > self.horizon_ms {
                return bad(format!("time {} beyond horizon {}", i.t_ms, self.horizon_ms));
            }
            match config.entry(i.node) {
                None => return bad(format!("node {} not in roster", i.node)),
                Some(r) if r.role != Role::Client => return bad(format!("node {} is not a client", i.node)),
                Some(_) => {}
            }
            if i.payload.len() > MAX_PAYLOAD {
                return bad(format!("payload of {} bytes over the limit", i.payload.len()));
            }
        }
        for (k, a) in self.adversaries.iter().enumerate() {
            a.validate(config, self.horizon_ms)
                .map_err(|e| Error::Scenario(format!("adversary {k}: {e}")))?;
        }
        Ok(())
    }
}
