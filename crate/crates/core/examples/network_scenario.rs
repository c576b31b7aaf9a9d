//! Run the six-node topology (one trusted node, five clients) for 300
//! transactions, write every artefact to a directory and print the timing
//! summary.
//!
//! ```text
//! cargo run --release --example network_scenario [output_dir]
//! ```

use std::path::PathBuf;

use pufchain::harness::{simulate, write_outputs, ScenarioConfig};

fn main() -> pufchain::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("pufchain-scenario"));
    let config = ScenarioConfig { seed: 42, ..ScenarioConfig::default() };
    let run = simulate(&config)?;
    let files = write_outputs(&run, &dir)?;
    let m = &run.metrics;

    println!("{}/{} transactions accepted", m.accepted_transactions, m.n_transactions);
    println!("dt_sa  {:7.1} ± {:5.1} ms", m.dt_sa.mean_ms, m.dt_sa.sd_ms);
    println!("dt_ca  {:7.1} ± {:5.1} ms", m.dt_ca.mean_ms, m.dt_ca.sd_ms);
    println!("dt_tx  {:7.1} ± {:5.1} ms  (target {} ms ± {:.0}%)", m.dt_tx.mean_ms, m.dt_tx.sd_ms, m.dt_tx_target_ms, 100.0 * m.dt_tx_tolerance);
    for n in &m.nodes {
        println!("  {} {:7?} {:6.1} ms/block over {:3} blocks, chain tip {}", n.node_id, n.role, n.handled.mean_ms, n.handled.n, n.chain_tip);
    }
    println!("trusted outcomes {:?}", m.trusted_outcomes);
    println!("client outcomes  {:?}", m.client_outcomes);
    println!("wrote {} chains, events, registry, metrics and {}", files.chains.len(), files.timings.display());
    Ok(())
}
