//! Characterise a population of simulated PUFs: per-device uniqueness,
//! reliability, randomness and screening yield, laid out one column per
//! device.
//!
//! ```text
//! cargo run --release --example figures_of_merit [n_devices]
//! ```

use pufchain::harness::{run_fom_calibration, ScenarioConfig};

fn main() -> pufchain::Result<()> {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(6);
    let mut config = ScenarioConfig::default();
    config.fom.n_devices = n;

    let cal = run_fom_calibration(&config)?;
    print!("{}", cal.table());

    let mut quiet = config.clone();
    quiet.puf.noise_sigma = 0.0;
    let noiseless = run_fom_calibration(&quiet)?;
    println!("\nwith noise_sigma = 0 the reliability is {:.2}%", noiseless.population.reliability_pct);
    Ok(())
}
