//! Enrol a trusted node and a client, then walk one block through the
//! protocol by hand: the client tags it, the trusted node authenticates it
//! against the secure database, and a second client checks the trusted
//! node's attestation before appending.
//!
//! ```text
//! cargo run --example enroll_and_authenticate
//! ```

use pufchain::consensus::{AuthOutcome, ClientOutcome, NodeState, Role};
use pufchain::fom::ScreeningPolicy;
use pufchain::puf::{manufacture, PufConfig};
use pufchain::registry::{Enrollment, Registry};
use pufchain::DeviceId;

fn main() -> pufchain::Result<()> {
    let puf = PufConfig::default();
    let ids = [0xb827_eb00_0000, 0xb827_eb00_0001, 0xb827_eb00_0002].map(DeviceId::truncate);
    let devices = ids.iter().enumerate().map(|(i, id)| manufacture(&puf, *id, i as u64)).collect::<Result<Vec<_>, _>>()?;

    let mut registry = Registry::new([ids[0]]);
    let params = Enrollment { n_candidates: 500, policy: ScreeningPolicy::default(), seed: 1, enrolled_at: 0 };
    for d in &devices {
        let record = registry.enroll(d, &params)?;
        println!("enrolled {}: {} of 500 challenges passed screening", d.device_id(), record.len());
    }

    let node = |i: usize, role| -> pufchain::Result<NodeState> {
        Ok(NodeState::new(role, devices[i].clone(), registry.enrolled_challenges(ids[i])?))
    };
    let (mut trusted, mut sensor, mut peer) = (node(0, Role::Trusted)?, node(1, Role::Client)?, node(2, Role::Client)?);

    let block = sensor.initiate(b"{\"temp_c\":21.5}".to_vec(), 3, 100)?;
    println!("\nblock seq {} tag {}", block.data.seq, block.auth_tag.0);

    let AuthOutcome::Accepted { entry, rebroadcast } = trusted.authenticate(&block, &registry, 220)? else {
        panic!("genuine block rejected");
    };
    println!("trusted node accepted it at height {} after {} hash evaluations", entry.height, trusted.hash_evals());

    match peer.accept_validated(&rebroadcast, &registry, 270)? {
        ClientOutcome::Appended(e) => println!("peer appended entry {}", e.entry_hash),
        ClientOutcome::Dropped(r) => println!("peer dropped it: {r}"),
    }

    let mut forged = block.clone();
    forged.data.payload = b"{\"temp_c\":99.9}".to_vec();
    match trusted.authenticate(&forged, &registry, 300)? {
        AuthOutcome::Rejected(r) => println!("edited payload rejected: {r}"),
        AuthOutcome::Accepted { .. } => unreachable!(),
    }

    match registry.lookup(ids[1], ids[2]) {
        Err(e) => println!("client reading the database: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
