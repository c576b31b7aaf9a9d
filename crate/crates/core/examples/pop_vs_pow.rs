//! Time PUF authentication against a toy proof-of-work miner.
//!
//! ```text
//! cargo run --release --example pop_vs_pow [difficulty_bits]
//! ```

use pufchain::harness::{run_benchmark, ScenarioConfig};

fn main() -> pufchain::Result<()> {
    let difficulty = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(16);
    let mut config = ScenarioConfig { pow_difficulty_bits: difficulty, ..ScenarioConfig::default() };
    config.bench.trials = 50;
    let r = run_benchmark(&config)?;
    println!("authenticate, {} CRPs, worst case  {:>12} ns", r.crps, r.pop_median_ns);
    println!("authenticate, {} CRPs, worst case  {:>12} ns", 2 * r.crps, r.pop_median_ns_double_crps);
    println!("proof of work, {} bits            {:>12} ns  ({:.0} hashes on average)", r.difficulty_bits, r.pow_median_ns, r.pow_mean_attempts);
    println!("speedup {:.0}x, doubling the CRP set costs {:.2}x", r.speedup, r.crp_scaling);
    Ok(())
}
