//! End-to-end runs: build a world from one seed, simulate it, measure it and
//! write the artefacts.
//!
//! Seed derivation (all from [`ScenarioConfig::seed`]):
//!
//! | stream                    | domain              | parts              |
//! |---------------------------|---------------------|--------------------|
//! | manufacturing root        | `harness/puf`       | seed               |
//! | per-node device           | `harness/device`    | seed, roster index |
//! | enrolment                 | `harness/enroll`    | seed               |
//! | network, costs, attacks   | `harness/sim`       | seed               |
//! | payloads                  | `harness/payload`   | seed               |

mod bench;
mod calibration;
pub mod config;
mod metrics;

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;

pub use bench::{run_benchmark, BenchReport};
pub use calibration::{run_fom_calibration, DeviceFom, FomCalibration};
pub use config::{BenchSettings, FomSettings, NodeSpec, ScenarioConfig, TimingTarget, NODE_ID_BASE, SLOW_CLIENT_SCALE};
pub use metrics::{MetricsReport, NodeMetrics, Stats, TxTiming, CSV_HEADER};

use crate::error::{Error, Result};
use crate::ledger::chain_to_jsonl;
use crate::netsim::{Initiation, Network, RunOutcome, Scenario, SimConfig};
use crate::puf::{devices_from_jsonl, devices_to_jsonl, manufacture, PufConfig, PufDevice};
use crate::registry::{Enrollment, Registry};
use crate::seed;

/// Everything a run needs, derived from a [`ScenarioConfig`].
#[derive(Clone, Debug)]
pub struct World {
    /// The PUF parameters actually used, with the derived manufacturing seed.
    pub puf: PufConfig,
    /// One device per roster node, in roster order.
    pub devices: Vec<PufDevice>,
    pub registry: Registry,
    pub sim: SimConfig,
    pub scenario: Scenario,
}

pub fn build_world(config: &ScenarioConfig) -> Result<World> {
    config.validate()?;
    let s = config.seed;
    let puf = PufConfig { rng_seed: seed::derive_u64("harness/puf", &[s]), ..config.puf.clone() };
    let trusted = config.trusted();

    let devices = match &config.devices_file {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let mut pool = devices_from_jsonl(&text)?;
            config
                .nodes
                .iter()
                .map(|n| {
                    let at = pool.iter().position(|d| d.device_id() == n.node_id).ok_or_else(|| {
                        Error::Config(format!("{}: no device {}", path.display(), n.node_id))
                    })?;
                    Ok(pool.swap_remove(at))
                })
                .collect::<Result<Vec<_>>>()?
        }
        None => config
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| manufacture(&puf, n.node_id, seed::derive_u64("harness/device", &[s, i as u64])))
            .collect::<Result<Vec<_>>>()?,
    };

    let registry = match &config.registry_file {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            Registry::from_jsonl(&text, [trusted])?
        }
        None => {
            let mut registry = Registry::new([trusted]);
            let params = Enrollment {
                n_candidates: config.n_candidates,
                policy: config.policy.clone(),
                seed: seed::derive_u64("harness/enroll", &[s]),
                enrolled_at: 0,
            };
            for d in &devices {
                registry.enroll(d, &params)?;
            }
            registry
        }
    };

    let sim = config.sim_config(seed::derive_u64("harness/sim", &[s]));
    let clients = config.clients();
    let mut payload_rng = seed::rng("harness/payload", &[s]);
    let mut scenario = Scenario::new(config.horizon_ms());
    scenario.adversaries = config.adversaries.clone();
    for k in 0..config.n_transactions {
        scenario.initiations.push(Initiation {
            t_ms: k as u64 * config.tx_interval_ms,
            node: clients[k % clients.len()],
            payload: sensor_payload(&mut payload_rng, k, config.payload_bytes),
            challenge_index: None,
        });
    }
    scenario.validate(&sim)?;
    Ok(World { puf, devices, registry, sim, scenario })
}

/// A printable sensor reading padded or cut to `len` bytes.
fn sensor_payload<R: Rng>(rng: &mut R, k: usize, len: usize) -> Vec<u8> {
    let t: f64 = rng.random_range(15.0..35.0);
    let h: f64 = rng.random_range(20.0..80.0);
    let mut p = format!("{{\"k\":{k},\"temp_c\":{t:.2},\"rh\":{h:.1}}}").into_bytes();
    p.resize(len, b' ');
    p
}

/// A finished simulation held in memory.
#[derive(Debug)]
pub struct ScenarioRun {
    pub world: World,
    pub outcome: RunOutcome,
    pub metrics: MetricsReport,
}

/// Builds and runs a scenario without touching the filesystem (apart from
/// optional input files).
pub fn simulate(config: &ScenarioConfig) -> Result<ScenarioRun> {
    let world = build_world(config)?;
    let network = Network::new(world.sim.clone(), world.registry.clone(), world.devices.clone(), world.puf.clone())?;
    let outcome = network.run(&world.scenario)?;
    let metrics = MetricsReport::from_run(config, &world, &outcome);
    Ok(ScenarioRun { world, outcome, metrics })
}

/// Paths written by [`write_outputs`].
#[derive(Clone, Debug)]
pub struct OutputFiles {
    pub chains: Vec<PathBuf>,
    pub registry: PathBuf,
    pub devices: PathBuf,
    pub events: PathBuf,
    pub metrics: PathBuf,
    pub timings: PathBuf,
}

pub fn chain_file_name(node: crate::NodeId) -> String {
    format!("chain-{node}.jsonl")
}

pub fn write_outputs(run: &ScenarioRun, dir: &Path) -> Result<OutputFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, body: &str| -> Result<PathBuf> {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    };
    let chains = run
        .outcome
        .nodes
        .iter()
        .map(|n| write(&chain_file_name(n.node_id()), &chain_to_jsonl(n.chain())))
        .collect::<Result<Vec<_>>>()?;
    Ok(OutputFiles {
        chains,
        registry: write("registry.jsonl", &run.world.registry.to_jsonl())?,
        devices: write("devices.jsonl", &devices_to_jsonl(&run.world.devices))?,
        events: write("events.jsonl", &run.outcome.log.to_jsonl())?,
        metrics: write("metrics.json", &run.metrics.to_json())?,
        timings: write("timings.csv", &run.metrics.to_csv())?,
    })
}

/// Simulates `config` and writes every artefact under `config.output_dir`.
/// Nothing is written if the configuration or scenario is invalid.
pub fn run_scenario(config: &ScenarioConfig) -> Result<MetricsReport> {
    let run = simulate(config)?;
    write_outputs(&run, &config.output_dir)?;
    Ok(run.metrics)
}
