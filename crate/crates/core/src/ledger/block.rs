use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::RESPONSE_BITS;
use crate::error::{Error, Result};
use crate::ids::{lower_hex, DeviceId, Hash256};
use crate::puf::Response;

/// Largest sensor payload a block may carry (64 KiB).
pub const MAX_PAYLOAD: usize = 64 * 1024;

const HEADER_LEN: usize = 6 + 8 + 8 + 4;

/// Sensor payload plus the identity fields it is bound to.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockData {
    pub device_id: DeviceId,
    /// Per-device counter; accepted blocks carry strictly increasing values.
    pub seq: u64,
    /// Collection time, simulated milliseconds.
    pub t_init: u64,
    #[serde(with = "lower_hex")]
    pub payload: Vec<u8>,
}

/// `SHA-256(canonical(data) || response)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AuthTag(pub Hash256);

pub fn sha256(parts: &[&[u8]]) -> Hash256 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    Hash256(h.finalize().into())
}

/// `device_id (6 BE) || seq (8 BE) || t_init (8 BE) || payload_len (4 BE) || payload`
pub fn canonical_bytes(data: &BlockData) -> Result<Vec<u8>> {
    if data.payload.len() > MAX_PAYLOAD {
        return Err(Error::PayloadTooLarge { len: data.payload.len(), max: MAX_PAYLOAD });
    }
    let mut out = Vec::with_capacity(HEADER_LEN + data.payload.len());
    out.extend_from_slice(&data.device_id.to_be_bytes());
    out.extend_from_slice(&data.seq.to_be_bytes());
    out.extend_from_slice(&data.t_init.to_be_bytes());
    out.extend_from_slice(&(data.payload.len() as u32).to_be_bytes());
    out.extend_from_slice(&data.payload);
    Ok(out)
}

/// Inverse of [`canonical_bytes`]; trailing bytes are an error.
pub fn parse_canonical(bytes: &[u8]) -> Result<BlockData> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Parse(format!("{} bytes is shorter than the block header", bytes.len())));
    }
    let device_id = DeviceId::from_be_bytes(bytes[0..6].try_into().unwrap());
    let seq = u64::from_be_bytes(bytes[6..14].try_into().unwrap());
    let t_init = u64::from_be_bytes(bytes[14..22].try_into().unwrap());
    let len = u32::from_be_bytes(bytes[22..26].try_into().unwrap()) as usize;
    if len > MAX_PAYLOAD {
        return Err(Error::PayloadTooLarge { len, max: MAX_PAYLOAD });
    }
    if bytes.len() != HEADER_LEN + len {
        return Err(Error::Parse(format!(
            "declared payload of {len} bytes but {} follow the header",
            bytes.len() - HEADER_LEN
        )));
    }
    Ok(BlockData { device_id, seq, t_init, payload: bytes[HEADER_LEN..].to_vec() })
}

/// Binds block data to a PUF response. The response is packed MSB-first
/// into 16 bytes and appended after the canonical data.
pub fn make_auth_tag(data: &BlockData, response: &Response) -> Result<AuthTag> {
    TagHasher::new(data)?.tag(response)
}

/// Hash state with the canonical data already absorbed, for trying many
/// responses against one block.
#[derive(Clone)]
pub struct TagHasher {
    prefix: Sha256,
}

impl TagHasher {
    pub fn new(data: &BlockData) -> Result<Self> {
        let mut prefix = Sha256::new();
        prefix.update(canonical_bytes(data)?);
        Ok(Self { prefix })
    }

    pub fn tag(&self, response: &Response) -> Result<AuthTag> {
        if response.len() != RESPONSE_BITS {
            return Err(Error::Argument(format!(
                "auth tags bind {RESPONSE_BITS}-bit responses, got {} bits",
                response.len()
            )));
        }
        let mut h = self.prefix.clone();
        h.update(response.to_bytes());
        Ok(AuthTag(Hash256(h.finalize().into())))
    }
}
