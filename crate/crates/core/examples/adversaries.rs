//! Attack a running network with each adversary kind and tabulate how the
//! nodes disposed of the adversarial messages.
//!
//! ```text
//! cargo run --release --example adversaries
//! ```

use pufchain::harness::{simulate, ScenarioConfig};
use pufchain::netsim::{Adversary, Target};

fn main() -> pufchain::Result<()> {
    let base = ScenarioConfig { seed: 3, n_transactions: 60, ..ScenarioConfig::default() };
    let horizon = base.horizon_ms();
    let trusted = base.trusted();
    let clients = base.clients();

    let attacks = [
        ("tamper one bit in flight", Adversary::tamper(Target::ToNode(trusted), 0, horizon, 1)),
        ("replay to the trusted node", Adversary::replay(Target::ToNode(trusted), (1..60).map(|k| k * 1000 - 10).collect())),
        ("unenrolled device", Adversary::fake_device(11, (0..60).map(|k| k * 1000 + 500).collect())),
        ("forged validator mark", Adversary::forge_validator(trusted, Target::ToNode(clients[0]), 0, horizon)),
    ];
    for (name, adversary) in attacks {
        let config = ScenarioConfig { adversaries: vec![adversary], ..base.clone() };
        let run = simulate(&config)?;
        let m = &run.metrics;
        println!("{name}:");
        for (kind, verdicts) in &m.adversarial_outcomes {
            println!("  {kind:16} {verdicts:?}");
        }
        println!(
            "  honest transactions accepted {}/{}, chains of {} entries",
            m.accepted_transactions,
            m.n_transactions,
            m.nodes[0].chain_len
        );
    }
    Ok(())
}
