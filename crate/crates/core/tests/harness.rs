mod common;

use std::fs;
use std::process::Command;

use pufchain::harness::{run_benchmark, run_scenario, simulate, write_outputs, ScenarioConfig, ScenarioRun, CSV_HEADER};
use pufchain::ledger::verify_jsonl;
use pufchain::netsim::{Adversary, AdversaryKind, CostModel, LatencyModel, Target, Verdict};
use pufchain::registry::Registry;

fn small(seed: u64, n_transactions: usize) -> ScenarioConfig {
    ScenarioConfig { seed, n_transactions, n_candidates: 150, ..ScenarioConfig::default() }
}

fn accepted_deliveries(run: &ScenarioRun, tx: usize) -> (u64, u64) {
    let trusted = run.world.sim.trusted().unwrap().node_id;
    let record = &run.outcome.transactions[tx];
    let find = |from, to| {
        run.outcome
            .deliveries
            .iter()
            .find(|d| d.tx == Some(tx) && d.adversarial.is_none() && d.from == from && d.to == to)
            .unwrap()
    };
    (find(record.origin, trusted).cost_ms, find(trusted, record.origin).cost_ms)
}

#[test]
fn without_latency_transaction_time_is_handler_cost() {
    let config = ScenarioConfig { latency: LatencyModel::zero(), ..small(3, 25) };
    let run = simulate(&config).unwrap();
    assert_eq!(run.metrics.accepted_transactions, 25);
    for t in &run.metrics.transactions {
        let record = &run.outcome.transactions[t.tx];
        let (auth, append) = accepted_deliveries(&run, t.tx);
        let initiate = record.t_sent - record.t_i;
        assert_eq!(t.dt_tx_ms, Some(initiate + auth + append), "tx {}", t.tx);
        assert_eq!(t.dt_sa_ms, Some(auth));
        assert_eq!(t.dt_ca_ms, Some(append));
    }

    let instant = ScenarioConfig { costs: CostModel::zero(), ..config };
    let run = simulate(&instant).unwrap();
    assert!(run.metrics.transactions.iter().all(|t| t.dt_tx_ms == Some(0)));
}

#[test]
fn timing_decomposition_sums_exactly() {
    let run = simulate(&small(4, 40)).unwrap();
    for t in run.metrics.transactions.iter().filter(|t| t.result == "accepted") {
        let (t_sr, t_sv, t_cr, t_cv) = (t.t_sr.unwrap(), t.t_sv.unwrap(), t.t_cr.unwrap(), t.t_cv.unwrap());
        assert!(t.t_i <= t_sr && t_sr <= t_sv && t_sv <= t_cr && t_cr <= t_cv);
        assert_eq!(t.dt_tx_ms.unwrap(), (t_cv - t_cr) + (t_cr - t_sv) + (t_sv - t_sr) + (t_sr - t.t_i));
        assert!(t.dt_tx_ms >= t.dt_sa_ms);
    }
}

#[test]
fn outcome_counts_cover_every_message() {
    let mut config = small(5, 60);
    let trusted = config.trusted();
    let client = config.clients()[0];
    config.adversaries = vec![
        Adversary::tamper(Target::ToNode(trusted), 10_000, 20_000, 2),
        Adversary::replay(Target::ToNode(trusted), vec![15_000, 30_000, 45_000]),
        Adversary::fake_device(9, vec![5_000, 25_000]),
        Adversary::forge_validator(trusted, Target::FromNode(client), 30_000, 50_000),
    ];
    let run = simulate(&config).unwrap();
    let m = &run.metrics;
    assert!(m.injected_to_trusted >= 5);
    assert_eq!(m.trusted_outcomes.values().sum::<u64>(), m.n_transactions as u64 + m.injected_to_trusted);
    let mut tally = common::SoundnessTally::default();
    common::audit(&run, &mut tally);
    assert!(tally.adversarial > 0);
    assert!(tally.mismatched_verdicts.is_empty(), "{:?}", tally.mismatched_verdicts);
    assert!(tally.false_accepts.is_empty(), "{:?}", tally.false_accepts);
    let corrupted = |d: &&pufchain::netsim::Delivery| {
        d.to == trusted && matches!(d.adversarial, Some(AdversaryKind::Tamper | AdversaryKind::FakeDevice))
    };
    assert!(run.outcome.deliveries.iter().filter(corrupted).count() > 0);
    assert!(run.outcome.deliveries.iter().filter(corrupted).all(|d| matches!(d.verdict, Verdict::Rejected(_))));
}

#[test]
fn honest_chains_replicate_and_persist() {
    let run = simulate(&small(6, 30)).unwrap();
    let tips: Vec<_> = run.outcome.nodes.iter().map(|n| n.chain().tip_hash()).collect();
    assert!(tips.windows(2).all(|w| w[0] == w[1]));
    assert!(run.outcome.nodes.iter().all(|n| n.chain().len() == 30));

    let dir = tempfile::tempdir().unwrap();
    let files = write_outputs(&run, dir.path()).unwrap();
    let bodies: Vec<Vec<u8>> = files.chains.iter().map(|p| fs::read(p).unwrap()).collect();
    assert!(bodies.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(verify_jsonl(&bodies[0]).unwrap().len(), 30);

    let registry = fs::read_to_string(&files.registry).unwrap();
    let back = Registry::from_jsonl(&registry, run.world.registry.trusted_nodes()).unwrap();
    assert_eq!(back, run.world.registry);

    let csv = fs::read_to_string(&files.timings).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    assert_eq!(lines.count(), 30);
    let metrics: serde_json::Value = serde_json::from_str(&fs::read_to_string(&files.metrics).unwrap()).unwrap();
    assert_eq!(metrics["accepted_transactions"], 30);
}

#[test]
fn same_seed_same_bytes() {
    let a = simulate(&small(7, 20)).unwrap();
    let b = simulate(&small(7, 20)).unwrap();
    assert_eq!(a.metrics.to_json(), b.metrics.to_json());
    assert_eq!(a.outcome.log.to_jsonl(), b.outcome.log.to_jsonl());
    let c = simulate(&small(8, 20)).unwrap();
    assert_ne!(a.outcome.log.to_jsonl(), c.outcome.log.to_jsonl());
}

#[test]
fn invalid_config_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut config = ScenarioConfig { output_dir: out.clone(), ..small(1, 5) };
    config.adversaries = vec![Adversary::replay(Target::Any, vec![10_000_000])];
    assert!(run_scenario(&config).is_err());
    assert!(!out.exists());

    let missing = ScenarioConfig { output_dir: out.clone(), registry_file: Some(dir.path().join("nope.jsonl")), ..small(1, 5) };
    let err = run_scenario(&missing).unwrap_err();
    assert!(err.to_string().contains("nope.jsonl"), "{err}");
    assert!(!out.exists());
}

#[test]
fn zero_difficulty_bench_is_a_wash() {
    let mut config = ScenarioConfig { pow_difficulty_bits: 0, ..ScenarioConfig::default() };
    config.bench.crps = 1;
    config.bench.trials = 200;
    let report = run_benchmark(&config).unwrap();
    assert!(report.non_deterministic);
    assert!((0.1..=10.0).contains(&report.speedup), "{}", report.speedup);
    assert_eq!(report.pow_mean_attempts, 1.0);
}

#[test]
fn cli_runs_and_verifies_a_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let config = dir.path().join("scenario.conf");
    fs::write(&config, format!("n_transactions = 12\nn_candidates = 120\noutput_dir = {}\n", out.display())).unwrap();
    let bin = env!("CARGO_BIN_EXE_pufchain");

    let status = Command::new(bin).args(["scenario", "--config"]).arg(&config).args(["--seed", "3"]).output().unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    assert!(out.join("metrics.json").exists());

    let verify = Command::new(bin).args(["verify-chain", "--config"]).arg(&config).output().unwrap();
    assert!(verify.status.success(), "{}", String::from_utf8_lossy(&verify.stderr));

    let chain = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.file_name().unwrap().to_string_lossy().starts_with("chain-"))
        .unwrap();
    let mut bytes = fs::read(&chain).unwrap();
    let k = bytes.len() / 2;
    bytes[k] ^= 0x01;
    fs::write(&chain, bytes).unwrap();
    let broken = Command::new(bin).arg("verify-chain").arg(&chain).output().unwrap();
    assert_eq!(broken.status.code(), Some(1));

    fs::write(&config, "no_such_key = 1\n").unwrap();
    let bad = Command::new(bin).args(["scenario", "--config"]).arg(&config).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn shipped_configs_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let defaults = ScenarioConfig::from_file(&dir.join("default.conf")).unwrap();
    assert_eq!(defaults, ScenarioConfig::default());
    let attacks = ScenarioConfig::from_file(&dir.join("attacks.conf")).unwrap();
    assert_eq!(attacks.adversaries.len(), 4);
}
