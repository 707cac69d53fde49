//! `ucmec`: run episodes, sweeps and the oracle check from scenario files.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ucmec_core::error::{Error, Result};
use ucmec_core::harness::{
    emit_outputs, prepare_out_dir, run_seeds, run_sweep, run_verify, verify::write_verify, verify_scenario,
    with_thread_pool, Algorithm, Scenario, SweepAxis,
};

#[derive(Parser)]
#[command(name = "ucmec", version, about = "Joint BS clustering and service caching experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run episodes of one algorithm and write the CSV outputs.
    Run {
        /// Scenario TOML; built-in defaults when omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// jo_cdsd, instant, uplink or block; the scenario's choice when omitted.
        #[arg(long)]
        algorithm: Option<Algorithm>,
        /// Seed range `a..b` (end exclusive) or a single seed.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep one parameter across values and algorithms.
    Sweep {
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// cost_th or cluster_b.
        #[arg(long)]
        axis: SweepAxis,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "jo_cdsd")]
        algorithms: Vec<Algorithm>,
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the main algorithm with exhaustive search on small instances.
    /// Exits nonzero when any slot is flagged.
    Verify {
        /// Scenario TOML; a five-BS instance when omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value = "0..20")]
        seeds: String,
        /// Directory for verify.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a scenario file with every default filled in.
    Scenario {
        /// Three users sharing one cluster.
        #[arg(long)]
        multi_user: bool,
    },
}

fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = || Error::Invalid(format!("seed range {text:?}; expected a..b or a single seed"));
    match text.split_once("..") {
        Some((a, b)) => {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b.trim().parse().map_err(|_| bad())?;
            if a >= b {
                return Err(bad());
            }
            Ok((a..b).collect())
        }
        None => Ok(vec![text.trim().parse().map_err(|_| bad())?]),
    }
}

fn load(path: Option<&Path>, fallback: Scenario) -> Result<Scenario> {
    match path {
        Some(p) => Scenario::load(p),
        None => Ok(fallback),
    }
}

fn seeds_or_default(seeds: Option<&str>, scenario: &Scenario) -> Result<Vec<u64>> {
    seeds.map_or_else(|| Ok(vec![scenario.seed]), parse_seeds)
}

fn execute(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run { scenario, algorithm, seeds, out } => {
            prepare_out_dir(&out)?;
            let s = load(scenario.as_deref(), Scenario::default())?;
            let seeds = seeds_or_default(seeds.as_deref(), &s)?;
            let alg = algorithm.unwrap_or(s.algorithm);
            let results = with_thread_pool(|| run_seeds(&s, alg, &seeds))??;
            emit_outputs(&results, None, &out)?;
            for r in &results {
                let m = &r.summary;
                println!(
                    "{} seed {}: total delay {:.6} s, uplink {:.6} s, cost {:.6}, final queue {:.6}, flagged slots {}",
                    alg, m.seed, m.mean_total_delay, m.mean_uplink_delay, m.mean_cost, m.final_queue, m.flagged_slots
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { scenario, axis, values, algorithms, seeds, out } => {
            prepare_out_dir(&out)?;
            let s = load(scenario.as_deref(), Scenario::default())?;
            let seeds = seeds_or_default(seeds.as_deref(), &s)?;
            let (rows, episodes) = with_thread_pool(|| run_sweep(&s, axis, &values, &algorithms, &seeds))??;
            emit_outputs(&episodes, Some(&rows), &out)?;
            for r in &rows {
                println!(
                    "{}={} {}: total delay {:.6} +/- {:.6} s, uplink {:.6} s, cost {:.6}",
                    r.axis, r.value, r.algorithm, r.mean_total_delay, r.ci95_total_delay, r.mean_uplink_delay, r.mean_cost
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { scenario, seeds, out } => {
            if let Some(dir) = &out {
                prepare_out_dir(dir)?;
            }
            let s = load(scenario.as_deref(), verify_scenario())?;
            let seeds = parse_seeds(&seeds)?;
            let rows = with_thread_pool(|| run_verify(&s, &seeds))??;
            if let Some(dir) = &out {
                write_verify(&rows, &dir.join("verify.csv"))?;
            }
            let flagged = rows.iter().filter(|r| r.flagged).count();
            let worst = rows.iter().map(|r| r.rel_gap).fold(f64::NEG_INFINITY, f64::max);
            println!("verify: {} slots, {} flagged, worst relative gap {:.3e}", rows.len(), flagged, worst);
            Ok(if flagged == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Scenario { multi_user } => {
            let s = if multi_user { Scenario::multi_user() } else { Scenario::default() };
            print!("{}", s.to_toml()?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
