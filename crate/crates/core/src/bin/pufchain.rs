use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use pufchain::harness::{self, ScenarioConfig};
use pufchain::ledger::verify_jsonl;

#[derive(Parser)]
#[command(name = "pufchain", version, about = "PUF-authenticated blockchain simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat key = value scenario file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the file's `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Clone)]
struct Sweep {
    /// Seeds to sweep, as `a..b` or `a,b,c`; each run writes to
    /// `<output_dir>/seed-<n>`.
    #[arg(long)]
    seeds: Option<String>,
    /// Worker threads for a sweep.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run a network scenario and write chains, registry, events and metrics.
    Scenario {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sweep: Sweep,
    },
    /// Characterise a device population (uniqueness, reliability, randomness).
    Fom {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sweep: Sweep,
    },
    /// Time authentication against a toy proof of work.
    Bench {
        #[command(flatten)]
        common: Common,
    },
    /// Check persisted chain files; defaults to every chain in the output directory.
    VerifyChain {
        #[command(flatten)]
        common: Common,
        files: Vec<PathBuf>,
    },
}

fn load(common: &Common) -> pufchain::Result<ScenarioConfig> {
    let mut config = match &common.config {
        Some(p) => ScenarioConfig::from_file(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = common.seed {
        config.seed = s;
    }
    Ok(config)
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>, String> {
    let bad = || format!("bad seed list {spec:?}");
    if let Some((a, b)) = spec.split_once("..") {
        let (a, b): (u64, u64) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
        return Ok((a..b).collect());
    }
    spec.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

/// Expands a sweep into one config per seed.
fn sweep_configs(base: ScenarioConfig, sweep: &Sweep) -> Result<Vec<ScenarioConfig>, String> {
    let Some(spec) = &sweep.seeds else {
        return Ok(vec![base]);
    };
    Ok(parse_seeds(spec)?
        .into_iter()
        .map(|s| ScenarioConfig { seed: s, output_dir: base.output_dir.join(format!("seed-{s}")), ..base.clone() })
        .collect())
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, String> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build().map_err(|e| e.to_string())?;
    Ok(pool.install(f))
}

fn scenario(config: &ScenarioConfig) -> pufchain::Result<String> {
    let m = harness::run_scenario(config)?;
    Ok(format!(
        "seed {}: {}/{} accepted, dt_tx {:.1} ± {:.1} ms (target {} ± {:.0}%: {}), output {}",
        m.seed,
        m.accepted_transactions,
        m.n_transactions,
        m.dt_tx.mean_ms,
        m.dt_tx.sd_ms,
        m.dt_tx_target_ms,
        m.dt_tx_tolerance * 100.0,
        if m.dt_tx_within_target { "within" } else { "outside" },
        config.output_dir.display()
    ))
}

fn fom(config: &ScenarioConfig) -> pufchain::Result<String> {
    let cal = harness::run_fom_calibration(config)?;
    std::fs::create_dir_all(&config.output_dir).map_err(|e| io_err(&config.output_dir, e))?;
    let path = config.output_dir.join("fom.json");
    std::fs::write(&path, cal.to_json()).map_err(|e| io_err(&path, e))?;
    Ok(format!("seed {}\n{}report {}", cal.seed, cal.table(), path.display()))
}

fn io_err(path: &Path, source: std::io::Error) -> pufchain::Error {
    pufchain::Error::Io { path: path.to_path_buf(), source }
}

fn verify(config: &ScenarioConfig, files: Vec<PathBuf>) -> Result<bool, String> {
    let files = if files.is_empty() {
        let dir = &config.output_dir;
        let mut found: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| format!("{}: {e}", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("chain-") && n.ends_with(".jsonl")))
            .collect();
        found.sort();
        found
    } else {
        files
    };
    if files.is_empty() {
        return Err("no chain files found".into());
    }
    let mut ok = true;
    let mut tips = Vec::new();
    for f in &files {
        let bytes = std::fs::read(f).map_err(|e| format!("{}: {e}", f.display()))?;
        match verify_jsonl(&bytes) {
            Ok(chain) => {
                println!("{}: ok, {} entries, tip {}", f.display(), chain.len(), chain.tip_hash());
                tips.push(chain.tip_hash());
            }
            Err(fault) => {
                println!("{}: FAILED {fault}", f.display());
                ok = false;
            }
        }
    }
    if ok && tips.windows(2).any(|w| w[0] != w[1]) {
        println!("chains verify but their tips differ");
        ok = false;
    }
    Ok(ok)
}

fn run_sweep(
    common: &Common,
    sweep: &Sweep,
    job: fn(&ScenarioConfig) -> pufchain::Result<String>,
) -> Result<bool, String> {
    let configs = sweep_configs(load(common).map_err(|e| e.to_string())?, sweep)?;
    let results = in_pool(sweep.parallel, || configs.par_iter().map(job).collect::<Vec<_>>())?;
    let mut ok = true;
    for r in results {
        match r {
            Ok(line) => println!("{line}"),
            Err(e) => {
                eprintln!("error: {e}");
                ok = false;
            }
        }
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Scenario { common, sweep } => run_sweep(&common, &sweep, scenario),
        Command::Fom { common, sweep } => run_sweep(&common, &sweep, fom),
        Command::Bench { common } => load(&common).and_then(|c| harness::run_benchmark(&c)).map_err(|e| e.to_string()).map(|r| {
            println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
            true
        }),
        Command::VerifyChain { common, files } => load(&common).map_err(|e| e.to_string()).and_then(|c| verify(&c, files)),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
