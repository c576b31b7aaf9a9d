use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ids::Hash256;
use crate::ledger::{canonical_bytes, BlockData};

/// Desk-scale cap on the toy miner.
pub const MAX_POW_DIFFICULTY: u32 = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PowSolution {
    pub nonce: u64,
    pub digest: Hash256,
    /// Hashes computed, i.e. `nonce + 1`.
    pub attempts: u64,
}

pub fn leading_zero_bits(digest: &Hash256) -> u32 {
    let mut n = 0;
    for b in digest.as_bytes() {
        if *b == 0 {
            n += 8;
        } else {
            return n + b.leading_zeros();
        }
    }
    n
}

/// Smallest nonce such that `SHA-256(canonical(data) || nonce (8 BE))` has at
/// least `difficulty_bits` leading zero bits.
pub fn pow_mine_baseline(data: &BlockData, difficulty_bits: u32) -> Result<PowSolution> {
    if difficulty_bits > MAX_POW_DIFFICULTY {
        return Err(Error::Argument(format!(
            "difficulty {difficulty_bits} exceeds the desk-scale cap of {MAX_POW_DIFFICULTY}"
        )));
    }
    let mut prefix = Sha256::new();
    prefix.update(canonical_bytes(data)?);
    for nonce in 0u64.. {
        let mut h = prefix.clone();
        h.update(nonce.to_be_bytes());
        let digest = Hash256(h.finalize().into());
        if leading_zero_bits(&digest) >= difficulty_bits {
            return Ok(PowSolution { nonce, digest, attempts: nonce + 1 });
        }
    }
    unreachable!("2^64 nonces exhausted")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::DeviceId;
    use crate::ledger::sha256;

    fn data(seq: u64) -> BlockData {
        BlockData { device_id: DeviceId::truncate(3), seq, t_init: 0, payload: b"pow".to_vec() }
    }

    #[test]
    fn zero_difficulty_takes_nonce_zero() {
        let s = pow_mine_baseline(&data(0), 0).unwrap();
        assert_eq!(s.nonce, 0);
        assert_eq!(s.attempts, 1);
    }

    #[test]
    fn solution_is_minimal_and_correct() {
        let d = data(1);
        let s = pow_mine_baseline(&d, 6).unwrap();
        let enc = canonical_bytes(&d).unwrap();
        let check = |n: u64| leading_zero_bits(&sha256(&[&enc, &n.to_be_bytes()]));
        assert_eq!(sha256(&[&enc, &s.nonce.to_be_bytes()]), s.digest);
        assert!(check(s.nonce) >= 6);
        assert!((0..s.nonce).all(|n| check(n) < 6));
    }

    #[test]
    fn difficulty_cap() {
        assert!(pow_mine_baseline(&data(0), 33).is_err());
    }

    #[test]
    fn leading_zero_count() {
        let mut h = [0u8; 32];
        assert_eq!(leading_zero_bits(&Hash256(h)), 256);
        h[1] = 0x10;
        assert_eq!(leading_zero_bits(&Hash256(h)), 11);
    }
}
