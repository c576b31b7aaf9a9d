//! Flat `key = value` scenario files.
//!
//! ```text
//! # comments start with '#'
//! seed = 42
//! n_transactions = 300
//! puf.noise_sigma = 0.125
//! node.0 = trusted wired 1.0
//! node.1 = client wireless 1.554
//! adversary.0 = replay target=to:b827eb000000 at=500,1500
//! ```
//!
//! Keys mirror [`ScenarioConfig`] field names. Unknown or repeated keys are
//! errors. A file that lists no `node.N` entries gets the default roster.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::consensus::Role;
use crate::error::{Error, Result};
use crate::fom::ScreeningPolicy;
use crate::ids::{DeviceId, NodeId};
use crate::ledger::RESPONSE_BITS;
use crate::netsim::{Adversary, Attack, CostModel, LatencyModel, LinkClass, Schedule, Target};
use crate::puf::PufConfig;

/// Node ids are assigned from this MAC-style prefix by roster index.
pub const NODE_ID_BASE: u64 = 0xb827_eb00_0000;

/// Cost multiplier for the slowest client class: its append takes 72.27 ms
/// where the reference client takes 46.5 ms.
pub const SLOW_CLIENT_SCALE: f64 = 72.27 / 46.5;

#[derive(Clone, Debug, PartialEq)]
pub struct NodeSpec {
    pub node_id: NodeId,
    pub role: Role,
    pub link: LinkClass,
    pub cost_scale: f64,
}

/// Transaction-time band reported alongside the measured mean.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimingTarget {
    pub mean_ms: f64,
    /// Relative half-width, e.g. 0.2 for ±20%.
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FomSettings {
    pub n_devices: usize,
    /// Common challenges used for the inter-device metrics.
    pub n_challenges: usize,
    pub n_reevals: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchSettings {
    pub trials: usize,
    pub payload_bytes: usize,
    /// Stored CRPs for the worst-case authenticate measurement; the scaling
    /// check repeats it at twice this size.
    pub crps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    /// Root of every random stream in the run.
    pub seed: u64,
    pub n_transactions: usize,
    /// Gap between successive initiations, round-robin over clients.
    pub tx_interval_ms: u64,
    pub payload_bytes: usize,
    pub n_candidates: usize,
    pub pow_difficulty_bits: u32,
    pub puf: PufConfig,
    pub policy: ScreeningPolicy,
    pub latency: LatencyModel,
    pub costs: CostModel,
    pub drop_rate: f64,
    pub nodes: Vec<NodeSpec>,
    pub adversaries: Vec<Adversary>,
    pub timing: TimingTarget,
    pub fom: FomSettings,
    pub bench: BenchSettings,
    pub output_dir: PathBuf,
    /// Load these instead of manufacturing and enrolling.
    pub devices_file: Option<PathBuf>,
    pub registry_file: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    /// One wired trusted node and five clients: two reference-speed wired
    /// boards and three slower wireless ones.
    fn default() -> Self {
        let node = |i: u64, role, link, cost_scale| NodeSpec { node_id: DeviceId::truncate(NODE_ID_BASE + i), role, link, cost_scale };
        Self {
            seed: 0,
            n_transactions: 300,
            tx_interval_ms: 1000,
            payload_bytes: 48,
            n_candidates: 500,
            pow_difficulty_bits: 20,
            puf: PufConfig::default(),
            policy: ScreeningPolicy::default(),
            latency: LatencyModel::default(),
            costs: CostModel::default(),
            drop_rate: 0.0,
            nodes: vec![
                node(0, Role::Trusted, LinkClass::Wired, 1.0),
                node(1, Role::Client, LinkClass::Wired, 1.0),
                node(2, Role::Client, LinkClass::Wired, 1.0),
                node(3, Role::Client, LinkClass::Wireless, SLOW_CLIENT_SCALE),
                node(4, Role::Client, LinkClass::Wireless, SLOW_CLIENT_SCALE),
                node(5, Role::Client, LinkClass::Wireless, SLOW_CLIENT_SCALE),
            ],
            adversaries: Vec::new(),
            timing: TimingTarget { mean_ms: 198.0, tolerance: 0.2 },
            fom: FomSettings { n_devices: 20, n_challenges: 100, n_reevals: 11 },
            bench: BenchSettings { trials: 100, payload_bytes: 64, crps: 128 },
            output_dir: PathBuf::from("out"),
            devices_file: None,
            registry_file: None,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.puf.validate()?;
        if self.puf.response_bits != RESPONSE_BITS {
            return bad(format!("puf.response_bits must be {RESPONSE_BITS}"));
        }
        self.policy.validate(RESPONSE_BITS)?;
        if self.n_transactions == 0 {
            return bad("n_transactions must be at least 1".into());
        }
        if self.n_candidates == 0 {
            return bad("n_candidates must be at least 1".into());
        }
        if self.fom.n_devices < 2 || self.fom.n_challenges == 0 || self.fom.n_reevals < 2 {
            return bad("fom needs ≥2 devices, ≥1 challenge and ≥2 re-evaluations".into());
        }
        if self.bench.trials == 0 || self.bench.crps == 0 {
            return bad("bench needs ≥1 trial and ≥1 CRP".into());
        }
        if !(self.timing.mean_ms > 0.0 && self.timing.tolerance >= 0.0) {
            return bad("timing target must be positive".into());
        }
        if !self.nodes.iter().any(|n| n.role == Role::Client) {
            return bad("roster has no clients".into());
        }
        self.sim_config(0).validate()?;
        self.scenario().validate(&self.sim_config(0))?;
        Ok(())
    }

    pub fn trusted(&self) -> NodeId {
        self.nodes.iter().find(|n| n.role == Role::Trusted).map(|n| n.node_id).expect("validated roster")
    }

    pub fn clients(&self) -> Vec<NodeId> {
        self.nodes.iter().filter(|n| n.role == Role::Client).map(|n| n.node_id).collect()
    }

    pub(crate) fn sim_config(&self, sim_seed: u64) -> crate::netsim::SimConfig {
        crate::netsim::SimConfig {
            seed: sim_seed,
            latency: self.latency,
            costs: self.costs,
            drop_rate: self.drop_rate,
            roster: self
                .nodes
                .iter()
                .map(|n| crate::netsim::RosterEntry {
                    node_id: n.node_id,
                    role: n.role,
                    link: n.link,
                    cost_scale: n.cost_scale,
                })
                .collect(),
        }
    }

    /// Initiation script without payloads, used for validation only.
    fn scenario(&self) -> crate::netsim::Scenario {
        let mut s = crate::netsim::Scenario::new(self.horizon_ms());
        s.adversaries = self.adversaries.clone();
        s
    }

    pub fn horizon_ms(&self) -> u64 {
        self.n_transactions as u64 * self.tx_interval_ms
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if entries.insert(k.clone(), v).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key {k}", n + 1)));
            }
        }
        let mut c = Self::default();
        let mut nodes = BTreeMap::new();
        let mut adversaries = BTreeMap::new();
        for (key, value) in &entries {
            let v = value.as_str();
            match key.as_str() {
                "seed" => c.seed = num(key, v)?,
                "n_transactions" => c.n_transactions = num(key, v)?,
                "tx_interval_ms" => c.tx_interval_ms = num(key, v)?,
                "payload_bytes" => c.payload_bytes = num(key, v)?,
                "n_candidates" => c.n_candidates = num(key, v)?,
                "pow_difficulty_bits" => c.pow_difficulty_bits = num(key, v)?,
                "drop_rate" => c.drop_rate = num(key, v)?,
                "output_dir" => c.output_dir = PathBuf::from(v),
                "devices_file" => c.devices_file = Some(PathBuf::from(v)),
                "registry_file" => c.registry_file = Some(PathBuf::from(v)),
                "puf.n_oscillators" => c.puf.n_oscillators = num(key, v)?,
                "puf.response_bits" => c.puf.response_bits = num(key, v)?,
                "puf.freq_mean" => c.puf.freq_mean = num(key, v)?,
                "puf.freq_sigma" => c.puf.freq_sigma = num(key, v)?,
                "puf.noise_sigma" => c.puf.noise_sigma = num(key, v)?,
                "policy.randomness_low" => c.policy.randomness_band.0 = num(key, v)?,
                "policy.randomness_high" => c.policy.randomness_band.1 = num(key, v)?,
                "policy.max_unreliable_bits" => c.policy.max_unreliable_bits = num(key, v)?,
                "policy.n_screen_reevals" => c.policy.n_screen_reevals = num(key, v)?,
                "latency.wired.base_ms" => c.latency.wired.base_ms = num(key, v)?,
                "latency.wired.jitter_ms" => c.latency.wired.jitter_ms = num(key, v)?,
                "latency.wireless.base_ms" => c.latency.wireless.base_ms = num(key, v)?,
                "latency.wireless.jitter_ms" => c.latency.wireless.jitter_ms = num(key, v)?,
                "costs.initiate.mean_ms" => c.costs.initiate.mean_ms = num(key, v)?,
                "costs.initiate.sd_ms" => c.costs.initiate.sd_ms = num(key, v)?,
                "costs.authenticate.mean_ms" => c.costs.authenticate.mean_ms = num(key, v)?,
                "costs.authenticate.sd_ms" => c.costs.authenticate.sd_ms = num(key, v)?,
                "costs.append.mean_ms" => c.costs.append.mean_ms = num(key, v)?,
                "costs.append.sd_ms" => c.costs.append.sd_ms = num(key, v)?,
                "timing.mean_ms" => c.timing.mean_ms = num(key, v)?,
                "timing.tolerance" => c.timing.tolerance = num(key, v)?,
                "fom.n_devices" => c.fom.n_devices = num(key, v)?,
                "fom.n_challenges" => c.fom.n_challenges = num(key, v)?,
                "fom.n_reevals" => c.fom.n_reevals = num(key, v)?,
                "bench.trials" => c.bench.trials = num(key, v)?,
                "bench.payload_bytes" => c.bench.payload_bytes = num(key, v)?,
                "bench.crps" => c.bench.crps = num(key, v)?,
                k => {
                    if let Some(i) = k.strip_prefix("node.") {
                        nodes.insert(num::<usize>(key, i)?, parse_node(num(key, i)?, v)?);
                    } else if let Some(i) = k.strip_prefix("adversary.") {
                        adversaries.insert(num::<usize>(key, i)?, parse_adversary(v)?);
                    } else {
                        return Err(Error::Config(format!("unknown key {k}")));
                    }
                }
            }
        }
        if !nodes.is_empty() {
            c.nodes = nodes.into_values().collect();
        }
        c.adversaries = adversaries.into_values().collect();
        c.validate()?;
        Ok(c)
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

/// `role link cost_scale [id]`; the id defaults to the base prefix plus index.
fn parse_node(index: u64, v: &str) -> Result<NodeSpec> {
    let parts: Vec<&str> = v.split_whitespace().collect();
    let err = || Error::Config(format!("node.{index}: expected `role link cost_scale [id]`, got {v:?}"));
    if !(3..=4).contains(&parts.len()) {
        return Err(err());
    }
    let role = match parts[0] {
        "trusted" => Role::Trusted,
        "client" => Role::Client,
        _ => return Err(err()),
    };
    let link = match parts[1] {
        "wired" => LinkClass::Wired,
        "wireless" => LinkClass::Wireless,
        _ => return Err(err()),
    };
    let cost_scale = parts[2].parse().map_err(|_| err())?;
    let node_id = match parts.get(3) {
        Some(id) => id.parse().map_err(|_| err())?,
        None => DeviceId::new(NODE_ID_BASE + index).map_err(|_| err())?,
    };
    Ok(NodeSpec { node_id, role, link, cost_scale })
}

/// `kind key=value...` with keys `target` (`any`, `to:<id>`, `from:<id>`),
/// `from`/`to` windows, `at` lists, `every`/`count`/`start` point series,
/// `flips`, `seed` and `claimed`.
fn parse_adversary(v: &str) -> Result<Adversary> {
    let mut words = v.split_whitespace();
    let kind = words.next().ok_or_else(|| Error::Config("empty adversary".into()))?;
    let mut opts = BTreeMap::new();
    for w in words {
        let (k, x) = w.split_once('=').ok_or_else(|| Error::Config(format!("adversary option {w:?} is not key=value")))?;
        opts.insert(k, x);
    }
    let get = |k: &str| opts.get(k).copied().ok_or_else(|| Error::Config(format!("{kind} needs {k}=")));
    let target = match opts.get("target").copied().unwrap_or("any") {
        "any" => Target::Any,
        t => match t.split_once(':') {
            Some(("to", id)) => Target::ToNode(num("target", id)?),
            Some(("from", id)) => Target::FromNode(num("target", id)?),
            _ => return Err(Error::Config(format!("bad target {t:?}"))),
        },
    };
    let window = || -> Result<Schedule> { Ok(Schedule::Window { from_ms: num("from", get("from")?)?, to_ms: num("to", get("to")?)? }) };
    let points = || -> Result<Schedule> {
        if let Some(at) = opts.get("at") {
            return Ok(Schedule::At(at.split(',').map(|t| num("at", t)).collect::<Result<_>>()?));
        }
        let every: u64 = num("every", get("every")?)?;
        let count: u64 = num("count", get("count")?)?;
        let start: u64 = opts.get("start").map(|s| num("start", s)).transpose()?.unwrap_or(0);
        Ok(Schedule::At((0..count).map(|k| start + k * every).collect()))
    };
    let (attack, schedule) = match kind {
        "tamper" => (Attack::Tamper { flips: opts.get("flips").map(|f| num("flips", f)).transpose()?.unwrap_or(1) }, window()?),
        "forge-validator" => (Attack::ForgeValidator { claimed: num("claimed", get("claimed")?)? }, window()?),
        "replay" => (Attack::Replay, points()?),
        "fake-device" => (Attack::FakeDevice { device_seed: num("seed", get("seed")?)? }, points()?),
        k => return Err(Error::Config(format!("unknown adversary kind {k:?}"))),
    };
    Ok(Adversary { attack, target, schedule })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(ScenarioConfig::parse("# nothing\n\n").unwrap(), ScenarioConfig::default());
    }

    #[test]
    fn keys_override_defaults() {
        let c = ScenarioConfig::parse("seed = 9\npuf.noise_sigma = 0\nn_transactions=5 # short\nlatency.wired.base_ms = 0").unwrap();
        assert_eq!((c.seed, c.n_transactions, c.puf.noise_sigma, c.latency.wired.base_ms), (9, 5, 0.0, 0));
    }

    #[test]
    fn roster_and_adversaries() {
        let c = ScenarioConfig::parse(
            "node.0 = trusted wired 1\nnode.1 = client wireless 2.0 0000000000aa\n\
             adversary.0 = tamper from=0 to=100 flips=3 target=from:0000000000aa\n\
             adversary.1 = fake-device seed=4 every=10 count=3 start=5\n\
             adversary.2 = replay at=1,2 target=to:b827eb000000",
        )
        .unwrap();
        assert_eq!(c.nodes.len(), 2);
        assert_eq!(c.nodes[1].node_id, DeviceId::truncate(0xaa));
        assert_eq!(c.adversaries[0].attack, Attack::Tamper { flips: 3 });
        assert_eq!(c.adversaries[1].schedule, Schedule::At(vec![5, 15, 25]));
        assert_eq!(c.adversaries[2].target, Target::ToNode(DeviceId::truncate(NODE_ID_BASE)));
    }

    #[test]
    fn rejects_bad_files() {
        for text in [
            "seed",
            "seed = x",
            "seed = 1\nseed = 2",
            "colour = red",
            "n_transactions = 0",
            "puf.response_bits = 64",
            "node.0 = client wired 1",
            "node.0 = trusted wired 1\nnode.1 = trusted wired 1\nnode.2 = client wired 1",
            "adversary.0 = teleport",
            "adversary.0 = replay at=999999999",
            "drop_rate = 1.5",
        ] {
            assert!(matches!(ScenarioConfig::parse(text), Err(Error::Config(_)) | Err(Error::Scenario(_))), "{text}");
        }
    }
}
