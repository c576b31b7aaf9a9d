use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ScenarioConfig, NODE_ID_BASE};
use crate::error::{Error, Result};
use crate::fom::{self, screen_challenge, FomReport};
use crate::ids::DeviceId;
use crate::ledger::RESPONSE_BITS;
use crate::puf::{manufacture, Challenge, PufConfig, PufDevice, Response};
use crate::registry::{Enrollment, Registry};
use crate::seed;

/// Figures of merit of one device.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeviceFom {
    pub device_id: DeviceId,
    /// Mean distance to every other device over the common challenges.
    pub uniqueness_pct: f64,
    /// Over the device's own screened challenges.
    pub reliability_pct: f64,
    /// Mean 1-bit fraction of the device's screened responses.
    pub randomness_pct: f64,
    /// Challenges that passed screening out of `candidates`.
    pub crps_accepted: usize,
    pub candidates: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FomCalibration {
    pub seed: u64,
    pub puf: PufConfig,
    pub devices: Vec<DeviceFom>,
    pub population: FomReport,
    pub mean_crps_accepted: f64,
}

/// Manufactures `fom.n_devices` devices, enrols each against
/// `n_candidates` random challenges and measures them.
///
/// Inter-device metrics use `fom.n_challenges` challenges screened on the
/// first device and answered noiselessly by all. Reliability uses each
/// device's own screened challenges (at most `fom.n_challenges`), falling
/// back to the common set for a device whose enrolment accepted nothing.
pub fn run_fom_calibration(config: &ScenarioConfig) -> Result<FomCalibration> {
    config.validate()?;
    let s = config.seed;
    let puf = PufConfig { rng_seed: seed::derive_u64("harness/puf", &[s]), ..config.puf.clone() };
    let n = config.fom.n_devices;
    let devices = (0..n)
        .map(|i| manufacture(&puf, DeviceId::truncate(NODE_ID_BASE + i as u64), seed::derive_u64("harness/fom-device", &[s, i as u64])))
        .collect::<Result<Vec<_>>>()?;

    let common = common_challenges(config, &devices[0])?;
    let params = Enrollment {
        n_candidates: config.n_candidates,
        policy: config.policy.clone(),
        seed: seed::derive_u64("harness/enroll", &[s]),
        enrolled_at: 0,
    };

    struct Row {
        refs: Vec<Response>,
        own: Vec<(Challenge, Response)>,
        reliability: f64,
    }
    let rows = devices
        .par_iter()
        .enumerate()
        .map(|(d, device)| -> Result<Row> {
            let refs = common.iter().map(|c| device.evaluate_reference(c)).collect::<Result<Vec<_>>>()?;
            let own = match Registry::new([]).enroll(device, &params) {
                Ok(record) => record.pairs().to_vec(),
                Err(Error::EnrollmentFailed(_)) => Vec::new(),
                Err(e) => return Err(e),
            };
            let probe: Vec<&Challenge> = if own.is_empty() {
                common.iter().collect()
            } else {
                own.iter().take(config.fom.n_challenges).map(|p| &p.0).collect()
            };
            let mut total = 0.0;
            let n_probe = probe.len();
            for (c, challenge) in probe.into_iter().enumerate() {
                let seeds: Vec<u64> = (0..config.fom.n_reevals as u64)
                    .map(|r| seed::derive_u64("harness/fom-eval", &[s, d as u64, c as u64, r]))
                    .collect();
                total += fom::reliability(device, challenge, &seeds)?;
            }
            let reliability = total / n_probe as f64;
            Ok(Row { refs, own, reliability })
        })
        .collect::<Result<Vec<_>>>()?;

    let matrix: Vec<Vec<Response>> = rows.iter().map(|r| r.refs.clone()).collect();
    let screened = |r: &Row| -> Vec<Response> {
        if r.own.is_empty() { r.refs.clone() } else { r.own.iter().map(|p| p.1.clone()).collect() }
    };
    let mean_randomness = |rs: &[Response]| rs.iter().map(fom::randomness).sum::<f64>() / rs.len() as f64;

    let mut per_device = Vec::with_capacity(n);
    for (d, row) in rows.iter().enumerate() {
        per_device.push(DeviceFom {
            device_id: devices[d].device_id(),
            uniqueness_pct: fom::device_uniqueness(&matrix, d)?,
            reliability_pct: row.reliability,
            randomness_pct: mean_randomness(&screened(row)),
            crps_accepted: row.own.len(),
            candidates: config.n_candidates,
        });
    }
    let all_screened: Vec<Response> = rows.iter().flat_map(screened).collect();
    let population = FomReport {
        uniqueness_pct: fom::uniqueness(&matrix)?,
        reliability_pct: per_device.iter().map(|d| d.reliability_pct).sum::<f64>() / n as f64,
        randomness_pct: mean_randomness(&all_screened),
        correlation: fom::mean_abs_correlation(&matrix)?,
        n_devices: n,
        n_challenges: common.len(),
        n_reevaluations: config.fom.n_reevals,
    };
    population.validate()?;
    Ok(FomCalibration {
        seed: s,
        puf,
        mean_crps_accepted: per_device.iter().map(|d| d.crps_accepted as f64).sum::<f64>() / n as f64,
        devices: per_device,
        population,
    })
}

/// Draws random challenges until `fom.n_challenges` pass screening on
/// `reference`.
fn common_challenges(config: &ScenarioConfig, reference: &PufDevice) -> Result<Vec<Challenge>> {
    let want = config.fom.n_challenges;
    let mut rng = seed::rng("harness/fom-challenges", &[config.seed]);
    let mut out: Vec<Challenge> = Vec::with_capacity(want);
    let budget = want * 100;
    for k in 0..budget as u64 {
        let c = Challenge::random(&mut rng, reference.bank_size(), RESPONSE_BITS)?;
        let seeds: Vec<u64> = (0..config.policy.n_screen_reevals as u64)
            .map(|r| seed::derive_u64("harness/fom-screen", &[config.seed, k, r]))
            .collect();
        if screen_challenge(reference, &c, &config.policy, &seeds)?.accepted && !out.contains(&c) {
            out.push(c);
            if out.len() == want {
                return Ok(out);
            }
        }
    }
    Err(Error::Config(format!("only {} of {want} common challenges passed screening in {budget} draws", out.len())))
}

impl FomCalibration {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One column per device, one row per metric, plus a population column.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "{:<16}", "metric");
        for k in 0..self.devices.len() {
            let _ = write!(s, "{:>9}", format!("PUF{}", k + 1));
        }
        let _ = writeln!(s, "{:>11}", "population");
        type Row = (&'static str, fn(&DeviceFom) -> f64, f64);
        let rows: [Row; 4] = [
            ("uniqueness %", |d| d.uniqueness_pct, self.population.uniqueness_pct),
            ("reliability %", |d| d.reliability_pct, self.population.reliability_pct),
            ("randomness %", |d| d.randomness_pct, self.population.randomness_pct),
            ("accepted CRPs", |d| d.crps_accepted as f64, self.mean_crps_accepted),
        ];
        for (name, f, pop) in rows {
            let _ = write!(s, "{name:<16}");
            for d in &self.devices {
                let _ = write!(s, "{:>9.2}", f(d));
            }
            let _ = writeln!(s, "{pop:>11.2}");
        }
        let _ = writeln!(s, "mean |correlation| {:.4}", self.population.correlation);
        s
    }
}
