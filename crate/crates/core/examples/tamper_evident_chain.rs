//! Build a ten-entry chain, persist it as JSON lines, then flip one byte at
//! a time and report where verification first fails.
//!
//! ```text
//! cargo run --example tamper_evident_chain
//! ```

use pufchain::ledger::{chain_to_jsonl, make_auth_tag, verify_jsonl, BlockData, Chain};
use pufchain::puf::Response;
use pufchain::DeviceId;

fn main() -> pufchain::Result<()> {
    let device = DeviceId::truncate(0xb827_eb00_0001);
    let trusted = DeviceId::truncate(0xb827_eb00_0000);
    let response = Response::from_bits((0..128).map(|i| i % 3 == 0).collect());

    let mut chain = Chain::new();
    for seq in 0..10 {
        let data = BlockData { device_id: device, seq, t_init: seq * 1000, payload: format!("reading {seq}").into_bytes() };
        let tag = make_auth_tag(&data, &response)?;
        chain = chain.append(data, tag, trusted, seq * 1000 + 130)?;
    }
    let file = chain_to_jsonl(&chain);
    println!("{} entries, {} bytes, tip {}", chain.len(), file.len(), chain.tip_hash());
    println!("intact file verifies: {}", verify_jsonl(file.as_bytes()).is_ok());

    let line_starts: Vec<usize> =
        std::iter::once(0).chain(file.match_indices('\n').map(|(i, _)| i + 1)).collect();
    for pos in [10, line_starts[4] + 40, line_starts[9] + 3, file.len() - 1] {
        let mut bytes = file.clone().into_bytes();
        bytes[pos] ^= 0x01;
        let line = line_starts.iter().rposition(|s| *s <= pos).unwrap();
        match verify_jsonl(&bytes) {
            Err(fault) => println!("byte {pos:5} (line {line}) flipped -> {fault}"),
            Ok(_) => println!("byte {pos:5} flipped -> still verifies?!"),
        }
    }
    Ok(())
}
