use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::bench::BenchReport;
use super::config::ScenarioConfig;
use super::World;
use crate::consensus::Role;
use crate::ids::{DeviceId, Hash256, NodeId};
use crate::netsim::{AdversaryKind, Delivery, RunOutcome, Verdict};

pub const CSV_HEADER: &str = "tx,seq,device_id,dt_sa_ms,dt_ca_ms,dt_tx_ms,result,reason";

/// Timestamps of one transaction. `t_sr`/`t_sv` are receipt and completion
/// at the trusted node; `t_cr`/`t_cv` are receipt and completion of the
/// validated block back at the originating client.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TxTiming {
    pub tx: usize,
    pub seq: u64,
    pub device_id: DeviceId,
    pub t_i: u64,
    pub t_sr: Option<u64>,
    pub t_sv: Option<u64>,
    pub t_cr: Option<u64>,
    pub t_cv: Option<u64>,
    pub dt_sa_ms: Option<u64>,
    pub dt_ca_ms: Option<u64>,
    pub dt_tx_ms: Option<u64>,
    /// `accepted`, `rejected`, `dropped`, `lost` or `pending`.
    pub result: String,
    pub reason: String,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Stats {
    pub n: usize,
    pub mean_ms: f64,
    /// Sample standard deviation; 0 for fewer than two values.
    pub sd_ms: f64,
}

impl Stats {
    pub fn of(xs: impl IntoIterator<Item = u64>) -> Self {
        let xs: Vec<f64> = xs.into_iter().map(|x| x as f64).collect();
        let n = xs.len();
        if n == 0 {
            return Self::default();
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sd = if n < 2 { 0.0 } else { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() };
        Self { n, mean_ms: mean, sd_ms: sd }
    }
}

/// Handler time per node: authentication at the trusted node, appends at
/// clients. Receipt to completion, so queueing is included.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NodeMetrics {
    pub node_id: NodeId,
    pub role: Role,
    pub handled: Stats,
    pub chain_len: usize,
    pub chain_tip: Hash256,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub seed: u64,
    pub n_transactions: usize,
    pub accepted_transactions: usize,
    pub dt_sa: Stats,
    pub dt_ca: Stats,
    pub dt_tx: Stats,
    pub dt_tx_target_ms: f64,
    pub dt_tx_tolerance: f64,
    pub dt_tx_within_target: bool,
    pub nodes: Vec<NodeMetrics>,
    /// Disposition of every message addressed to the trusted node, by
    /// verdict or reason code, plus `lost`.
    pub trusted_outcomes: BTreeMap<String, u64>,
    pub client_outcomes: BTreeMap<String, u64>,
    /// Replayed and fake-device messages addressed to the trusted node; the
    /// trusted outcomes sum to this plus `n_transactions`.
    pub injected_to_trusted: u64,
    /// Verdicts on adversarial messages, keyed by attack kind.
    pub adversarial_outcomes: BTreeMap<String, BTreeMap<String, u64>>,
    pub transactions: Vec<TxTiming>,
    /// Wall-clock measurements; never reproducible, never compared.
    pub benchmark: Option<BenchReport>,
}

impl MetricsReport {
    pub fn from_run(config: &ScenarioConfig, world: &World, out: &RunOutcome) -> Self {
        let trusted = world.sim.trusted().expect("validated roster").node_id;
        let transactions: Vec<TxTiming> = out.transactions.iter().map(|tx| tx_timing(tx, trusted, out)).collect();
        let accepted: Vec<&TxTiming> = transactions.iter().filter(|t| t.result == "accepted").collect();

        let mut trusted_outcomes = BTreeMap::new();
        let mut client_outcomes = BTreeMap::new();
        let mut adversarial_outcomes: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
        let mut injected_to_trusted = 0;
        let injected = |k: Option<AdversaryKind>| matches!(k, Some(AdversaryKind::Replay | AdversaryKind::FakeDevice));
        for d in &out.deliveries {
            let bucket = if d.to == trusted { &mut trusted_outcomes } else { &mut client_outcomes };
            *bucket.entry(d.verdict.code().to_string()).or_default() += 1;
            if let Some(k) = d.adversarial {
                *adversarial_outcomes.entry(k.to_string()).or_default().entry(d.verdict.code().to_string()).or_default() += 1;
            }
            injected_to_trusted += u64::from(d.to == trusted && injected(d.adversarial));
        }
        for l in &out.lost {
            let bucket = if l.to == trusted { &mut trusted_outcomes } else { &mut client_outcomes };
            *bucket.entry("lost".to_string()).or_default() += 1;
            if let Some(k) = l.adversarial {
                *adversarial_outcomes.entry(k.to_string()).or_default().entry("lost".to_string()).or_default() += 1;
            }
            injected_to_trusted += u64::from(l.to == trusted && injected(l.adversarial));
        }

        let nodes = out
            .nodes
            .iter()
            .map(|n| {
                let id = n.node_id();
                let done = |d: &&Delivery| d.to == id && matches!(d.verdict, Verdict::Accepted | Verdict::Appended);
                NodeMetrics {
                    node_id: id,
                    role: n.role(),
                    handled: Stats::of(out.deliveries.iter().filter(done).map(|d| d.t_done - d.t_recv)),
                    chain_len: n.chain().len(),
                    chain_tip: n.chain().tip_hash(),
                }
            })
            .collect();

        let dt_tx = Stats::of(accepted.iter().filter_map(|t| t.dt_tx_ms));
        let band = config.timing.mean_ms * config.timing.tolerance;
        Self {
            seed: config.seed,
            n_transactions: config.n_transactions,
            accepted_transactions: accepted.len(),
            dt_sa: Stats::of(accepted.iter().filter_map(|t| t.dt_sa_ms)),
            dt_ca: Stats::of(accepted.iter().filter_map(|t| t.dt_ca_ms)),
            dt_tx,
            dt_tx_target_ms: config.timing.mean_ms,
            dt_tx_tolerance: config.timing.tolerance,
            dt_tx_within_target: dt_tx.n > 0 && (dt_tx.mean_ms - config.timing.mean_ms).abs() <= band,
            nodes,
            trusted_outcomes,
            client_outcomes,
            injected_to_trusted,
            adversarial_outcomes,
            transactions,
            benchmark: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("metrics serialize");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        let opt = |x: Option<u64>| x.map(|v| v.to_string()).unwrap_or_default();
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for t in &self.transactions {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                t.tx,
                t.seq,
                t.device_id,
                opt(t.dt_sa_ms),
                opt(t.dt_ca_ms),
                opt(t.dt_tx_ms),
                t.result,
                t.reason
            );
        }
        s
    }
}

/// Follows one initiation: its first non-replayed copy at the trusted node,
/// then the validated copy back at the origin.
fn tx_timing(tx: &crate::netsim::TxRecord, trusted: NodeId, out: &RunOutcome) -> TxTiming {
    let ours = |t: Option<usize>, k: Option<AdversaryKind>| t == Some(tx.tx) && k != Some(AdversaryKind::Replay);
    let mut timing = TxTiming {
        tx: tx.tx,
        seq: tx.seq,
        device_id: tx.origin,
        t_i: tx.t_i,
        t_sr: None,
        t_sv: None,
        t_cr: None,
        t_cv: None,
        dt_sa_ms: None,
        dt_ca_ms: None,
        dt_tx_ms: None,
        result: "pending".into(),
        reason: String::new(),
    };
    let lost = |from: NodeId, to: NodeId| out.lost.iter().any(|l| l.from == from && l.to == to && ours(l.tx, l.adversarial));
    let Some(at_trusted) = out.deliveries.iter().find(|d| d.from == tx.origin && d.to == trusted && ours(d.tx, d.adversarial)) else {
        if lost(tx.origin, trusted) {
            (timing.result, timing.reason) = ("lost".into(), "to-trusted".into());
        }
        return timing;
    };
    timing.t_sr = Some(at_trusted.t_recv);
    timing.t_sv = Some(at_trusted.t_done);
    match at_trusted.verdict {
        Verdict::Accepted => {}
        v => {
            (timing.result, timing.reason) = ("rejected".into(), v.code().into());
            return timing;
        }
    }
    let Some(back) = out.deliveries.iter().find(|d| d.from == trusted && d.to == tx.origin && ours(d.tx, d.adversarial)) else {
        if lost(trusted, tx.origin) {
            (timing.result, timing.reason) = ("lost".into(), "to-origin".into());
        }
        return timing;
    };
    timing.t_cr = Some(back.t_recv);
    timing.t_cv = Some(back.t_done);
    if let Verdict::Dropped(r) = back.verdict {
        (timing.result, timing.reason) = ("dropped".into(), r.code().into());
        return timing;
    }
    timing.dt_sa_ms = Some(at_trusted.t_done - at_trusted.t_recv);
    timing.dt_ca_ms = Some(back.t_done - back.t_recv);
    timing.dt_tx_ms = Some(back.t_done - tx.t_i);
    timing.result = "accepted".into();
    timing
}
