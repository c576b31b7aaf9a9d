//! Figures of merit and the enrolment screening filter.
//!
//! All percentages are Hamming distances (or 1-bit fractions) normalised by
//! the response width and scaled to `[0, 100]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::puf::{Challenge, PufDevice, Response};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FomReport {
    /// Mean pairwise inter-device Hamming distance.
    pub uniqueness_pct: f64,
    /// Mean pairwise intra-device Hamming distance across noisy re-evaluations.
    pub reliability_pct: f64,
    /// Mean fraction of 1-bits.
    pub randomness_pct: f64,
    /// Mean absolute Pearson correlation between the bit streams of every
    /// device pair. Informational; not a screening criterion.
    pub correlation: f64,
    pub n_devices: usize,
    pub n_challenges: usize,
    pub n_reevaluations: usize,
}

impl FomReport {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("uniqueness_pct", self.uniqueness_pct),
            ("reliability_pct", self.reliability_pct),
            ("randomness_pct", self.randomness_pct),
        ] {
            if !(0.0..=100.0).contains(&v) {
                return Err(Error::Argument(format!("{name} = {v} outside [0, 100]")));
            }
        }
        if self.n_devices < 2 || self.n_challenges == 0 || self.n_reevaluations == 0 {
            return Err(Error::Argument("report counts below their minimum".into()));
        }
        Ok(())
    }
}

/// Thresholds for "PUF requirements met" during enrolment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreeningPolicy {
    /// Inclusive band for the reference response's 1-bit percentage.
    pub randomness_band: (f64, f64),
    /// Largest tolerated distance between any noisy re-evaluation and the
    /// noiseless reference.
    pub max_unreliable_bits: usize,
    pub n_screen_reevals: usize,
}

impl Default for ScreeningPolicy {
    fn default() -> Self {
        Self { randomness_band: (45.0, 55.0), max_unreliable_bits: 3, n_screen_reevals: 11 }
    }
}

impl ScreeningPolicy {
    /// Accepts everything; useful for isolating one criterion in tests.
    pub fn permissive(response_bits: usize) -> Self {
        Self {
            randomness_band: (0.0, 100.0),
            max_unreliable_bits: response_bits.saturating_sub(1),
            n_screen_reevals: 1,
        }
    }

    pub fn validate(&self, response_bits: usize) -> Result<()> {
        let (lo, hi) = self.randomness_band;
        if !(0.0 <= lo && lo <= hi && hi <= 100.0) {
            return Err(Error::Config(format!("randomness band [{lo}, {hi}] not within [0, 100]")));
        }
        if self.max_unreliable_bits >= response_bits {
            return Err(Error::Config(format!(
                "max_unreliable_bits {} must be below the response width {response_bits}",
                self.max_unreliable_bits
            )));
        }
        if self.n_screen_reevals == 0 {
            return Err(Error::Config("n_screen_reevals must be at least 1".into()));
        }
        Ok(())
    }
}

/// Outcome of screening one challenge.
#[derive(Clone, Debug, PartialEq)]
pub struct Screening {
    pub accepted: bool,
    /// Noiseless response; this is what enrolment stores.
    pub reference: Response,
    pub randomness_pct: f64,
    /// Largest distance from the reference seen across the re-evaluations.
    pub worst_unreliable_bits: usize,
    /// Mean distance from the reference, as a percentage.
    pub mean_unreliable_pct: f64,
}

pub fn hamming_pct(a: &Response, b: &Response) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::Dimension("empty response".into()));
    }
    Ok(100.0 * a.hamming(b)? as f64 / a.len() as f64)
}

fn check_matrix(responses: &[Vec<Response>]) -> Result<(usize, usize)> {
    if responses.len() < 2 {
        return Err(Error::Dimension(format!("need at least 2 devices, got {}", responses.len())));
    }
    let n_ch = responses[0].len();
    if n_ch == 0 {
        return Err(Error::Dimension("need at least 1 challenge".into()));
    }
    let width = responses[0][0].len();
    if width == 0 {
        return Err(Error::Dimension("empty response".into()));
    }
    for (d, row) in responses.iter().enumerate() {
        if row.len() != n_ch {
            return Err(Error::Dimension(format!("device {d} has {} responses, expected {n_ch}", row.len())));
        }
        if let Some(c) = row.iter().position(|r| r.len() != width) {
            return Err(Error::Dimension(format!("device {d} challenge {c} width differs from {width}")));
        }
    }
    Ok((n_ch, width))
}

/// Mean pairwise inter-device distance over a `[device][challenge]` matrix.
pub fn uniqueness(responses: &[Vec<Response>]) -> Result<f64> {
    let (n_ch, width) = check_matrix(responses)?;
    let mut total = 0usize;
    let mut pairs = 0usize;
    for a in 0..responses.len() {
        for b in a + 1..responses.len() {
            for (x, y) in responses[a].iter().zip(&responses[b]) {
                total += x.hamming(y)?;
            }
            pairs += 1;
        }
    }
    Ok(100.0 * total as f64 / (pairs * n_ch * width) as f64)
}

/// Uniqueness of one device: its mean distance to every other device.
pub fn device_uniqueness(responses: &[Vec<Response>], device: usize) -> Result<f64> {
    let (n_ch, width) = check_matrix(responses)?;
    if device >= responses.len() {
        return Err(Error::Argument(format!("device index {device} out of range")));
    }
    let mut total = 0usize;
    for (_, row) in responses.iter().enumerate().filter(|(o, _)| *o != device) {
        for c in 0..n_ch {
            total += responses[device][c].hamming(&row[c])?;
        }
    }
    Ok(100.0 * total as f64 / ((responses.len() - 1) * n_ch * width) as f64)
}

/// Mean pairwise distance among noisy re-evaluations, one per seed.
pub fn reliability(device: &PufDevice, challenge: &Challenge, seeds: &[u64]) -> Result<f64> {
    if seeds.len() < 2 {
        return Err(Error::Argument(format!("reliability needs at least 2 re-evaluations, got {}", seeds.len())));
    }
    let rs = seeds
        .iter()
        .map(|s| device.evaluate(challenge, *s))
        .collect::<Result<Vec<_>>>()?;
    let mut total = 0usize;
    let mut pairs = 0usize;
    for a in 0..rs.len() {
        for b in a + 1..rs.len() {
            total += rs[a].hamming(&rs[b])?;
            pairs += 1;
        }
    }
    Ok(100.0 * total as f64 / (pairs * challenge.len()) as f64)
}

pub fn randomness(response: &Response) -> f64 {
    if response.is_empty() {
        return 0.0;
    }
    100.0 * response.count_ones() as f64 / response.len() as f64
}

/// Mean |Pearson r| between the concatenated bit streams of each device pair.
/// A constant stream has no defined correlation and contributes 0.
pub fn mean_abs_correlation(responses: &[Vec<Response>]) -> Result<f64> {
    check_matrix(responses)?;
    let streams: Vec<Vec<f64>> = responses
        .iter()
        .map(|row| row.iter().flat_map(|r| r.bits().iter().map(|b| *b as u8 as f64)).collect())
        .collect();
    let corr = |x: &[f64], y: &[f64]| {
        let n = x.len() as f64;
        let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (a, b) in x.iter().zip(y) {
            sxy += (a - mx) * (b - my);
            sxx += (a - mx) * (a - mx);
            syy += (b - my) * (b - my);
        }
        if sxx == 0.0 || syy == 0.0 {
            0.0
        } else {
            (sxy / (sxx * syy).sqrt()).abs()
        }
    };
    let mut total = 0.0;
    let mut pairs = 0usize;
    for a in 0..streams.len() {
        for b in a + 1..streams.len() {
            total += corr(&streams[a], &streams[b]);
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

/// Decides whether a challenge may be enrolled.
///
/// Accepts iff the noiseless response's randomness lies inside the band and
/// none of the first `policy.n_screen_reevals` noisy evaluations (seeded by
/// `seeds`) differs from it by more than `policy.max_unreliable_bits`.
pub fn screen_challenge(
    device: &PufDevice,
    challenge: &Challenge,
    policy: &ScreeningPolicy,
    seeds: &[u64],
) -> Result<Screening> {
    if seeds.len() < policy.n_screen_reevals {
        return Err(Error::Argument(format!(
            "screening needs {} seeds, got {}",
            policy.n_screen_reevals,
            seeds.len()
        )));
    }
    let reference = device.evaluate_reference(challenge)?;
    let randomness_pct = randomness(&reference);
    let (lo, hi) = policy.randomness_band;
    let balanced = (lo..=hi).contains(&randomness_pct);

    let mut worst = 0usize;
    let mut total = 0usize;
    for s in &seeds[..policy.n_screen_reevals] {
        let d = device.evaluate(challenge, *s)?.hamming(&reference)?;
        worst = worst.max(d);
        total += d;
    }
    Ok(Screening {
        accepted: balanced && worst <= policy.max_unreliable_bits,
        randomness_pct,
        worst_unreliable_bits: worst,
        mean_unreliable_pct: 100.0 * total as f64 / (policy.n_screen_reevals * reference.len()).max(1) as f64,
        reference,
    })
}
