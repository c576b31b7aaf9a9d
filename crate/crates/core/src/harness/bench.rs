use std::time::{Duration, Instant};

use serde::Serialize;

use super::config::{ScenarioConfig, NODE_ID_BASE};
use crate::consensus::{pow_mine_baseline, AuthOutcome, NodeState, Role};
use crate::error::{Error, Result};
use crate::fom::ScreeningPolicy;
use crate::ids::DeviceId;
use crate::ledger::{BlockData, RESPONSE_BITS};
use crate::puf::{manufacture, PufConfig};
use crate::registry::{Enrollment, Registry};
use crate::seed;

const WARMUP: usize = 5;

/// Wall-clock comparison of authentication against a toy proof of work.
/// Every field except the settings varies from run to run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub non_deterministic: bool,
    pub difficulty_bits: u32,
    pub trials: usize,
    pub payload_bytes: usize,
    pub crps: usize,
    /// Worst case: the matching response is the last one scanned.
    pub pop_median_ns: u64,
    pub pow_median_ns: u64,
    /// `pow_median_ns / pop_median_ns`.
    pub speedup: f64,
    /// Worst-case authentication with `2 * crps` stored responses.
    pub pop_median_ns_double_crps: u64,
    /// `pop_median_ns_double_crps / pop_median_ns`.
    pub crp_scaling: f64,
    pub pow_mean_attempts: f64,
}

pub fn run_benchmark(config: &ScenarioConfig) -> Result<BenchReport> {
    config.validate()?;
    let b = &config.bench;
    // the two set sizes alternate so drift in machine load hits both alike
    let mut single = PopRig::new(config, b.crps)?;
    let mut double = PopRig::new(config, 2 * b.crps)?;
    let (mut pop, mut pop_double) = (Vec::with_capacity(b.trials), Vec::with_capacity(b.trials));
    for t in 0..(WARMUP + b.trials) as u64 {
        let (x, y) = (single.trial(t)?, double.trial(t)?);
        if t as usize >= WARMUP {
            pop.push(x);
            pop_double.push(y);
        }
    }
    let (pop, pop_double) = (median_ns(pop), median_ns(pop_double));

    let mut attempts = 0u64;
    let mut pow = Vec::with_capacity(b.trials);
    for t in 0..b.trials as u64 {
        let data = BlockData {
            device_id: DeviceId::truncate(NODE_ID_BASE),
            seq: t,
            t_init: t,
            payload: vec![b'x'; b.payload_bytes],
        };
        let start = Instant::now();
        let sol = pow_mine_baseline(&data, config.pow_difficulty_bits)?;
        pow.push(start.elapsed());
        attempts += sol.attempts;
    }
    let pow = median_ns(pow);
    Ok(BenchReport {
        non_deterministic: true,
        difficulty_bits: config.pow_difficulty_bits,
        trials: b.trials,
        payload_bytes: b.payload_bytes,
        crps: b.crps,
        pop_median_ns: pop,
        pow_median_ns: pow,
        speedup: pow as f64 / pop.max(1) as f64,
        pop_median_ns_double_crps: pop_double,
        crp_scaling: pop_double as f64 / pop.max(1) as f64,
        pow_mean_attempts: attempts as f64 / b.trials as f64,
    })
}

/// A trusted node and a client holding `crps` enrolled responses that
/// always answers with the last one, so every scan is worst case.
struct PopRig {
    registry: Registry,
    client: NodeState,
    trusted: NodeState,
    last: usize,
    payload_bytes: usize,
}

impl PopRig {
    fn new(config: &ScenarioConfig, crps: usize) -> Result<Self> {
        let s = config.seed;
        let puf = PufConfig { rng_seed: seed::derive_u64("harness/puf", &[s]), ..config.puf.clone() };
        let trusted_id = DeviceId::truncate(NODE_ID_BASE);
        let client_id = DeviceId::truncate(NODE_ID_BASE + 1);
        let trusted_dev = manufacture(&puf, trusted_id, seed::derive_u64("harness/bench-device", &[s, 0]))?;
        let client_dev = manufacture(&puf, client_id, seed::derive_u64("harness/bench-device", &[s, 1]))?;
        let mut registry = Registry::new([trusted_id]);
        let params = Enrollment {
            n_candidates: crps,
            policy: ScreeningPolicy::permissive(RESPONSE_BITS),
            seed: seed::derive_u64("harness/bench-enroll", &[s, crps as u64]),
            enrolled_at: 0,
        };
        registry.enroll(&trusted_dev, &params)?;
        let n = registry.enroll(&client_dev, &params)?.len();
        Ok(Self {
            client: NodeState::new(Role::Client, client_dev, registry.enrolled_challenges(client_id)?),
            trusted: NodeState::new(Role::Trusted, trusted_dev, registry.enrolled_challenges(trusted_id)?),
            registry,
            last: n - 1,
            payload_bytes: config.bench.payload_bytes,
        })
    }

    fn trial(&mut self, t: u64) -> Result<Duration> {
        let block = self.client.initiate(vec![b'x'; self.payload_bytes], self.last, t)?;
        let start = Instant::now();
        let outcome = self.trusted.authenticate(&block, &self.registry, t)?;
        let took = start.elapsed();
        if !matches!(outcome, AuthOutcome::Accepted { .. }) {
            return Err(Error::Scenario("benchmark block was not accepted".into()));
        }
        Ok(took)
    }
}

fn median_ns(mut xs: Vec<Duration>) -> u64 {
    xs.sort();
    xs[xs.len() / 2].as_nanos() as u64
}
