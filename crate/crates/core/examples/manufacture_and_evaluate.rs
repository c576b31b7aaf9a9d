//! Manufacture two PUF devices, ask both the same challenge, and watch the
//! noisy re-evaluations of one device wobble around its reference response.
//!
//! ```text
//! cargo run --example manufacture_and_evaluate
//! ```

use pufchain::puf::{devices_from_jsonl, devices_to_jsonl, manufacture, Challenge, PufConfig};
use pufchain::{seed, DeviceId};

fn main() -> pufchain::Result<()> {
    let config = PufConfig::default();
    let a = manufacture(&config, DeviceId::new(0xb827_eb00_0001)?, 1)?;
    let b = manufacture(&config, DeviceId::new(0xb827_eb00_0002)?, 2)?;
    println!(
        "{} oscillators per bank, first SET1 frequencies: {:.6} {:.6} MHz",
        a.bank_size(),
        a.set1_freqs()[0],
        a.set1_freqs()[1]
    );

    let mut rng = seed::rng("example/challenge", &[7]);
    let challenge = Challenge::random(&mut rng, a.bank_size(), config.response_bits)?;

    let ra = a.evaluate_reference(&challenge)?;
    let rb = b.evaluate_reference(&challenge)?;
    println!("device A reference  {}", ra.to_hex());
    println!("device B reference  {}", rb.to_hex());
    println!("A vs B: {} of {} bits differ", ra.hamming(&rb)?, ra.len());

    for eval_seed in 0..5 {
        let noisy = a.evaluate(&challenge, eval_seed)?;
        println!("A, eval seed {eval_seed}:     {}  ({} flipped)", noisy.to_hex(), noisy.hamming(&ra)?);
    }

    let file = devices_to_jsonl(&[a.clone(), b]);
    let back = devices_from_jsonl(&file)?;
    assert_eq!(back[0], a);
    println!("device file: {} bytes, round-trips exactly", file.len());
    Ok(())
}
