//! Software model of a hybrid ring-oscillator / arbiter PUF.
//!
//! The oscillators are split into two equal banks. A challenge names, for
//! each response bit, one oscillator from each bank; the arbiter emits `1`
//! when the first oscillator runs faster. Manufacturing variation is a
//! one-shot Gaussian draw per oscillator, and every evaluation adds fresh
//! Gaussian jitter on top of it.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::DeviceId;
use crate::seed;

/// Frequencies are stored on a 1 Hz grid (six fractional MHz digits) so the
/// device file format reproduces them exactly.
const FREQ_QUANTUM_PER_MHZ: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PufConfig {
    pub n_oscillators: usize,
    pub response_bits: usize,
    /// MHz
    pub freq_mean: f64,
    /// Process variation, MHz.
    pub freq_sigma: f64,
    /// Per-evaluation jitter, MHz.
    pub noise_sigma: f64,
    pub rng_seed: u64,
}

impl Default for PufConfig {
    /// 512 oscillators around 250 MHz. The variation/jitter pair
    /// (2.5 MHz / 0.125 MHz) was calibrated so that about a quarter of random
    /// challenges survive the default screening policy (median ≈133 of 500)
    /// with intra-device distance around 1.6 %.
    fn default() -> Self {
        Self {
            n_oscillators: 512,
            response_bits: 128,
            freq_mean: 250.0,
            freq_sigma: 2.5,
            noise_sigma: 0.125,
            rng_seed: 0,
        }
    }
}

impl PufConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_oscillators < 2 || !self.n_oscillators.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "n_oscillators must be even and at least 2, got {}",
                self.n_oscillators
            )));
        }
        if self.n_oscillators / 2 > u32::MAX as usize {
            return Err(Error::Config("too many oscillators".into()));
        }
        if self.response_bits == 0 {
            return Err(Error::Config("response_bits must be at least 1".into()));
        }
        let bank = (self.n_oscillators / 2) as u128;
        if (self.response_bits as u128) > bank * bank {
            return Err(Error::Config(format!(
                "{} response bits need more distinct oscillator pairs than {bank}x{bank}",
                self.response_bits
            )));
        }
        if !(self.freq_mean.is_finite() && self.freq_mean > 0.0) {
            return Err(Error::Config("freq_mean must be positive".into()));
        }
        if !(self.freq_sigma.is_finite() && self.freq_sigma > 0.0) {
            return Err(Error::Config("freq_sigma must be positive".into()));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Config("noise_sigma must be non-negative".into()));
        }
        Ok(())
    }

    pub fn bank_size(&self) -> usize {
        self.n_oscillators / 2
    }
}

/// One manufactured chip. Frequencies are fixed at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct PufDevice {
    device_id: DeviceId,
    set1_freqs: Vec<f64>,
    set2_freqs: Vec<f64>,
    noise_sigma: f64,
}

/// Draws a device's oscillator frequencies.
///
/// The generator is keyed by `(config.rng_seed, device_seed)`; the device id
/// is a label only and does not influence the draw.
pub fn manufacture(config: &PufConfig, device_id: DeviceId, device_seed: u64) -> Result<PufDevice> {
    config.validate()?;
    let mut rng = seed::rng("puf/manufacture", &[config.rng_seed, device_seed]);
    let dist = Normal::new(config.freq_mean, config.freq_sigma)
        .map_err(|e| Error::Config(e.to_string()))?;
    let mut draw = |n: usize| -> Vec<f64> {
        (0..n)
            .map(|_| loop {
                let f = quantize(dist.sample(&mut rng));
                if f > 0.0 {
                    break f;
                }
            })
            .collect()
    };
    let set1_freqs = draw(config.bank_size());
    let set2_freqs = draw(config.bank_size());
    Ok(PufDevice { device_id, set1_freqs, set2_freqs, noise_sigma: config.noise_sigma })
}

fn quantize(mhz: f64) -> f64 {
    (mhz * FREQ_QUANTUM_PER_MHZ).round() / FREQ_QUANTUM_PER_MHZ
}

impl PufDevice {
    /// Builds a device from explicit frequency tables, e.g. a file import.
    pub fn from_parts(
        device_id: DeviceId,
        set1_freqs: Vec<f64>,
        set2_freqs: Vec<f64>,
        noise_sigma: f64,
    ) -> Result<Self> {
        if set1_freqs.len() != set2_freqs.len() || set1_freqs.is_empty() {
            return Err(Error::Config(format!(
                "oscillator banks must be equal and non-empty ({} vs {})",
                set1_freqs.len(),
                set2_freqs.len()
            )));
        }
        if set1_freqs.iter().chain(&set2_freqs).any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::Config("all frequencies must be positive".into()));
        }
        if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
            return Err(Error::Config("noise_sigma must be non-negative".into()));
        }
        Ok(Self { device_id, set1_freqs, set2_freqs, noise_sigma })
    }

    pub fn device_id(&self) -> DeviceId {
        self.device_id
    }

    pub fn set1_freqs(&self) -> &[f64] {
        &self.set1_freqs
    }

    pub fn set2_freqs(&self) -> &[f64] {
        &self.set2_freqs
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn bank_size(&self) -> usize {
        self.set1_freqs.len()
    }

    /// The same silicon under a different jitter level (temperature or
    /// supply sweeps are expressed this way).
    pub fn with_noise_sigma(&self, noise_sigma: f64) -> Result<Self> {
        Self::from_parts(self.device_id, self.set1_freqs.clone(), self.set2_freqs.clone(), noise_sigma)
    }

    fn check(&self, challenge: &Challenge) -> Result<()> {
        let n = self.bank_size();
        if let Some((k, &(i, j))) = challenge
            .selectors
            .iter()
            .enumerate()
            .find(|(_, &(i, j))| i as usize >= n || j as usize >= n)
        {
            return Err(Error::Challenge(format!(
                "selector {k} = ({i}, {j}) out of range for banks of {n}"
            )));
        }
        Ok(())
    }

    /// Evaluates with jitter. Selector `k` draws its two jitter terms from a
    /// generator keyed by `(eval_seed, k)`.
    pub fn evaluate(&self, challenge: &Challenge, eval_seed: u64) -> Result<Response> {
        self.check(challenge)?;
        let sigma = self.noise_sigma;
        let bits = challenge
            .selectors
            .iter()
            .enumerate()
            .map(|(k, &(i, j))| {
                let (mut f1, mut f2) = (self.set1_freqs[i as usize], self.set2_freqs[j as usize]);
                if sigma > 0.0 {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed::mix(eval_seed, k as u64));
                    let e1: f64 = rng.sample(StandardNormal);
                    let e2: f64 = rng.sample(StandardNormal);
                    f1 += sigma * e1;
                    f2 += sigma * e2;
                }
                f1 > f2
            })
            .collect();
        Ok(Response { bits })
    }

    /// Jitter-free evaluation: a pure function of the silicon and challenge.
    pub fn evaluate_reference(&self, challenge: &Challenge) -> Result<Response> {
        self.check(challenge)?;
        let bits = challenge
            .selectors
            .iter()
            .map(|&(i, j)| self.set1_freqs[i as usize] > self.set2_freqs[j as usize])
            .collect();
        Ok(Response { bits })
    }

    /// One line of the device file: `{device_id, set1_freqs, set2_freqs, noise_sigma}`
    /// with frequencies printed to six fractional digits.
    pub fn to_json_line(&self) -> String {
        fn list(out: &mut String, freqs: &[f64]) {
            out.push('[');
            for (n, f) in freqs.iter().enumerate() {
                if n > 0 {
                    out.push(',');
                }
                write!(out, "{f:.6}").unwrap();
            }
            out.push(']');
        }
        let mut out = String::with_capacity(24 * (self.set1_freqs.len() * 2 + 4));
        write!(out, "{{\"device_id\":\"{}\",\"set1_freqs\":", self.device_id).unwrap();
        list(&mut out, &self.set1_freqs);
        out.push_str(",\"set2_freqs\":");
        list(&mut out, &self.set2_freqs);
        write!(out, ",\"noise_sigma\":{:.6}}}", self.noise_sigma).unwrap();
        out
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            device_id: DeviceId,
            set1_freqs: Vec<f64>,
            set2_freqs: Vec<f64>,
            noise_sigma: f64,
        }
        let raw: Raw = serde_json::from_str(line).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_parts(raw.device_id, raw.set1_freqs, raw.set2_freqs, raw.noise_sigma)
    }
}

pub fn devices_to_jsonl(devices: &[PufDevice]) -> String {
    devices.iter().map(|d| d.to_json_line() + "\n").collect()
}

pub fn devices_from_jsonl(text: &str) -> Result<Vec<PufDevice>> {
    text.lines()
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(n, l)| PufDevice::from_json_line(l).map_err(|e| Error::Parse(format!("line {}: {e}", n + 1))))
        .collect()
}

/// Oscillator-pair selectors, one `(SET1 index, SET2 index)` per response bit.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct Challenge {
    selectors: Vec<(u32, u32)>,
}

impl Challenge {
    /// Rejects empty challenges and repeated pairs.
    pub fn new(selectors: Vec<(u32, u32)>) -> Result<Self> {
        if selectors.is_empty() {
            return Err(Error::Challenge("challenge has no selectors".into()));
        }
        let mut seen = HashSet::with_capacity(selectors.len());
        if let Some(dup) = selectors.iter().find(|p| !seen.insert(**p)) {
            return Err(Error::Challenge(format!("selector pair {dup:?} repeats")));
        }
        Ok(Self { selectors })
    }

    /// Uniformly random distinct pairs.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, bank_size: usize, bits: usize) -> Result<Self> {
        if bank_size == 0 || (bits as u128) > (bank_size as u128).pow(2) {
            return Err(Error::Argument(format!(
                "cannot draw {bits} distinct pairs from banks of {bank_size}"
            )));
        }
        let mut seen = HashSet::with_capacity(bits);
        let mut selectors = Vec::with_capacity(bits);
        while selectors.len() < bits {
            let pair = (rng.random_range(0..bank_size) as u32, rng.random_range(0..bank_size) as u32);
            if seen.insert(pair) {
                selectors.push(pair);
            }
        }
        Ok(Self { selectors })
    }

    pub fn selectors(&self) -> &[(u32, u32)] {
        &self.selectors
    }

    pub fn len(&self) -> usize {
        self.selectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selectors.is_empty()
    }
}

impl<'de> Deserialize<'de> for Challenge {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let selectors = Vec::<(u32, u32)>::deserialize(d)?;
        Challenge::new(selectors).map_err(serde::de::Error::custom)
    }
}

/// A PUF response as a bit vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Response {
    bits: Vec<bool>,
}

impl Response {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    /// Unpacks MSB-first bytes, keeping `len` bits.
    pub fn from_bytes(bytes: &[u8], len: usize) -> Result<Self> {
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::Argument(format!("{} bytes cannot hold exactly {len} bits", bytes.len())));
        }
        let bits = (0..len).map(|i| bytes[i / 8] >> (7 - i % 8) & 1 == 1).collect();
        Ok(Self { bits })
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Packs MSB-first; a trailing partial byte is zero-padded.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.bits
            .chunks(8)
            .map(|byte| byte.iter().enumerate().fold(0u8, |acc, (i, b)| acc | (u8::from(*b) << (7 - i))))
            .collect()
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    pub fn complement(&self) -> Self {
        Self { bits: self.bits.iter().map(|b| !b).collect() }
    }

    /// Number of differing positions. Lengths must match.
    pub fn hamming(&self, other: &Response) -> Result<usize> {
        if self.len() != other.len() {
            return Err(Error::Dimension(format!(
                "responses of {} and {} bits",
                self.len(),
                other.len()
            )));
        }
        Ok(self.bits.iter().zip(&other.bits).filter(|(a, b)| a != b).count())
    }
}
