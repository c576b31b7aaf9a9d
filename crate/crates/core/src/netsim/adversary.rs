//! Attack scripting.
//!
//! Tamper and forge-validator rewrite matching messages as they are sent
//! during a time window. Replay and fake-device inject new messages at
//! listed instants.

use std::fmt;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Scenario, SimConfig};
use crate::consensus::WireBlock;
use crate::error::{Error, Result};
use crate::ids::{DeviceId, NodeId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdversaryKind {
    Tamper,
    Replay,
    FakeDevice,
    ForgeValidator,
}

impl AdversaryKind {
    pub fn code(self) -> &'static str {
        match self {
            AdversaryKind::Tamper => "tamper",
            AdversaryKind::Replay => "replay",
            AdversaryKind::FakeDevice => "fake-device",
            AdversaryKind::ForgeValidator => "forge-validator",
        }
    }
}

impl fmt::Display for AdversaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Attack {
    /// Flip `flips` distinct bits across the block's identity fields,
    /// payload and auth tag.
    Tamper { flips: u32 },
    /// Re-send the most recent message delivered to a matching receiver.
    Replay,
    /// Broadcast blocks from a device that was never enrolled.
    FakeDevice { device_seed: u64 },
    /// Mark unvalidated blocks as validated by `claimed`.
    ForgeValidator { claimed: NodeId },
}

/// Which messages an adversary acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    Any,
    ToNode(NodeId),
    FromNode(NodeId),
}

impl Target {
    pub(crate) fn matches(&self, from: NodeId, to: NodeId) -> bool {
        match *self {
            Target::Any => true,
            Target::ToNode(n) => n == to,
            Target::FromNode(n) => n == from,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Schedule {
    /// Inclusive send-time window.
    Window { from_ms: u64, to_ms: u64 },
    At(Vec<u64>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Adversary {
    pub attack: Attack,
    pub target: Target,
    pub schedule: Schedule,
}

impl Adversary {
    pub fn kind(&self) -> AdversaryKind {
        match self.attack {
            Attack::Tamper { .. } => AdversaryKind::Tamper,
            Attack::Replay => AdversaryKind::Replay,
            Attack::FakeDevice { .. } => AdversaryKind::FakeDevice,
            Attack::ForgeValidator { .. } => AdversaryKind::ForgeValidator,
        }
    }

    pub fn tamper(target: Target, from_ms: u64, to_ms: u64, flips: u32) -> Self {
        Self { attack: Attack::Tamper { flips }, target, schedule: Schedule::Window { from_ms, to_ms } }
    }

    pub fn replay(target: Target, at: Vec<u64>) -> Self {
        Self { attack: Attack::Replay, target, schedule: Schedule::At(at) }
    }

    pub fn fake_device(device_seed: u64, at: Vec<u64>) -> Self {
        Self { attack: Attack::FakeDevice { device_seed }, target: Target::Any, schedule: Schedule::At(at) }
    }

    pub fn forge_validator(claimed: NodeId, target: Target, from_ms: u64, to_ms: u64) -> Self {
        Self {
            attack: Attack::ForgeValidator { claimed },
            target,
            schedule: Schedule::Window { from_ms, to_ms },
        }
    }

    /// The identity an injected fake device uses; derived from its seed and
    /// never equal to a roster node.
    pub fn fake_device_id(device_seed: u64) -> DeviceId {
        // locally administered MAC prefix 0x02
        DeviceId::truncate(0x0200_0000_0000 | (crate::seed::derive_u64("netsim/fake-id", &[device_seed]) & 0xff_ffff_ffff))
    }

    pub(crate) fn validate(&self, config: &SimConfig, horizon_ms: u64) -> Result<()> {
        let in_roster = |n: NodeId| config.entry(n).is_some();
        match self.target {
            Target::ToNode(n) | Target::FromNode(n) if !in_roster(n) => {
                return Err(Error::Scenario(format!("target node {n} not in roster")));
            }
            _ => {}
        }
        match (&self.attack, &self.schedule) {
            (Attack::Tamper { .. } | Attack::ForgeValidator { .. }, Schedule::Window { from_ms, to_ms }) => {
                if from_ms > to_ms || *to_ms > horizon_ms {
                    return Err(Error::Scenario(format!("window [{from_ms}, {to_ms}] outside horizon {horizon_ms}")));
                }
            }
            (Attack::Replay | Attack::FakeDevice { .. }, Schedule::At(times)) => {
                if let Some(t) = times.iter().find(|t| **t > horizon_ms) {
                    return Err(Error::Scenario(format!("time {t} beyond horizon {horizon_ms}")));
                }
            }
            _ => {
                return Err(Error::Scenario(format!(
                    "{} needs a {} schedule",
                    self.kind(),
                    if matches!(self.attack, Attack::Tamper { .. } | Attack::ForgeValidator { .. }) { "window" } else { "point" }
                )))
            }
        }
        if let Attack::Tamper { flips } = self.attack {
            if flips == 0 {
                return Err(Error::Scenario("tamper must flip at least one bit".into()));
            }
        }
        if let Attack::FakeDevice { device_seed } = self.attack {
            if in_roster(Self::fake_device_id(device_seed)) {
                return Err(Error::Scenario("fake device id collides with a roster node".into()));
            }
        }
        Ok(())
    }

    pub(crate) fn window_contains(&self, t: u64) -> bool {
        matches!(self.schedule, Schedule::Window { from_ms, to_ms } if from_ms <= t && t <= to_ms)
    }
}

/// Adds an adversary to a scenario.
pub fn inject(adversary: Adversary, mut scenario: Scenario) -> Scenario {
    scenario.adversaries.push(adversary);
    scenario
}

/// Flips `flips` distinct bits of `device_id || seq || t_init || payload || auth_tag`.
/// Returns the flipped bit positions.
pub(crate) fn tamper_block<R: Rng + ?Sized>(block: &mut WireBlock, flips: u32, rng: &mut R) -> Vec<usize> {
    let payload_bits = block.data.payload.len() * 8;
    let total = 48 + 64 + 64 + payload_bits + 256;
    let picks = index::sample(rng, total, (flips as usize).min(total)).into_vec();
    for &bit in &picks {
        flip_bit(block, bit);
    }
    picks
}

pub(crate) fn flip_bit(block: &mut WireBlock, bit: usize) {
    let payload_bits = block.data.payload.len() * 8;
    match bit {
        b if b < 48 => {
            let raw = block.data.device_id.get() ^ (1 << (47 - b));
            block.data.device_id = DeviceId::truncate(raw);
        }
        b if b < 112 => block.data.seq ^= 1 << (63 - (b - 48)),
        b if b < 176 => block.data.t_init ^= 1 << (63 - (b - 112)),
        b if b < 176 + payload_bits => {
            let p = b - 176;
            block.data.payload[p / 8] ^= 0x80 >> (p % 8);
        }
        b => {
            let t = b - 176 - payload_bits;
            block.auth_tag.0 .0[t / 8] ^= 0x80 >> (t % 8);
        }
    }
}
