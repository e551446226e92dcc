//! Command-line front end: parse a TOML config, dispatch a subcommand, and
//! emit reproducible JSON-lines and CSV artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use dirlattice::config::RunConfig;
use dirlattice::counterexample;
use dirlattice::diagnostics::classify;
use dirlattice::env::EnvironmentSpec;
use dirlattice::rng::{self, tags, Stream};
use dirlattice::verifiers::run_verifiers;
use dirlattice::walk::{run_and_count_returns, LatticePoint};

#[derive(Parser)]
#[command(name = "dirlattice", version, about = "Random walks on directed lattices: simulation, classification, and semi-analytic verification")]
struct Cli {
    /// Path to the TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results are independent of this setting.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory (default: current directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run full-walk simulations and write return statistics.
    Simulate,
    /// Run a Green-partial-sum campaign and label the evidence.
    Classify,
    /// Run the registered identity and distribution verifiers.
    Verify {
        /// Comma-separated subset of verifier names.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
        /// Corrupt the waiting-time keying (negative control).
        #[arg(long)]
        inject_fault: bool,
    },
    /// Build and check a sparse-defect certificate.
    Counterexample,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    let path = cli.config.as_ref().ok_or("--config is required")?;
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let config = RunConfig::parse(&text).map_err(|e| e.to_string())?;
    let hash = RunConfig::hash_of(&text);
    let master_seed = cli.seed.unwrap_or(config.master_seed);
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out).map_err(|e| format!("cannot create {}: {e}", out.display()))?;

    match cli.command {
        Command::Simulate => simulate(&config, &hash, master_seed, &out),
        Command::Classify => run_classify(&config, &hash, master_seed, &out),
        Command::Verify { only, inject_fault } => {
            let mut failed = false;
            for outcome in run_verifiers(master_seed, &only, inject_fault) {
                let verdict = if outcome.pass { "PASS" } else { "FAIL" };
                println!("{verdict} {} | {}", outcome.name, outcome.detail);
                failed |= !outcome.pass;
            }
            Ok(if failed {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Counterexample => run_counterexample(&config, master_seed, &out),
    }
}

fn header(hash: &str, master_seed: u64, subcommand: &str) -> String {
    format!(
        "{{\"config_hash\":\"{hash}\",\"master_seed\":{master_seed},\"subcommand\":\"{subcommand}\"}}\n"
    )
}

fn write_file(path: PathBuf, contents: &str) -> Result<(), String> {
    fs::write(&path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

#[derive(Serialize)]
struct SimRecord {
    replica: u32,
    env_seed: u64,
    walk_seed: u64,
    steps: u64,
    returns_to_start: u64,
    first_return_time: Option<u64>,
    final_x: i64,
    final_y: i64,
}

fn replica_env_seed(spec: &EnvironmentSpec, master_seed: u64, replica: u32) -> u64 {
    if spec.variant.is_random() {
        rng::derive_key(&[master_seed, tags::ENV, replica as u64])
    } else {
        spec.seed
    }
}

fn simulate(
    config: &RunConfig,
    hash: &str,
    master_seed: u64,
    out: &PathBuf,
) -> Result<ExitCode, String> {
    let spec = config.environment_spec().map_err(|e| e.to_string())?;
    let budget = config.campaign_budget().map_err(|e| e.to_string())?;
    let records: Vec<SimRecord> = (0..budget.replicas)
        .into_par_iter()
        .map(|replica| {
            let env_seed = replica_env_seed(&spec, master_seed, replica);
            let field = spec.with_seed(env_seed).field();
            let walk_seed = rng::derive_key(&[master_seed, tags::WALK, replica as u64]);
            let mut stream = Stream::new(&[walk_seed, tags::WALK]);
            let stats =
                run_and_count_returns(LatticePoint::ORIGIN, &field, budget.steps, &mut stream);
            SimRecord {
                replica,
                env_seed,
                walk_seed,
                steps: stats.steps,
                returns_to_start: stats.returns_to_start,
                first_return_time: stats.first_return_time,
                final_x: stats.final_position.x,
                final_y: stats.final_position.y,
            }
        })
        .collect();

    let mut jsonl = header(hash, master_seed, "simulate");
    for record in &records {
        jsonl.push_str(&serde_json::to_string(record).expect("record serializes"));
        jsonl.push('\n');
    }
    write_file(out.join("simulate_records.jsonl"), &jsonl)?;

    let mut csv = format!("# config_hash={hash} master_seed={master_seed}\n");
    csv.push_str("replica,env_seed,steps,returns_to_start,first_return_time,final_x,final_y\n");
    for r in &records {
        let first = r
            .first_return_time
            .map(|t| t.to_string())
            .unwrap_or_default();
        let _ = writeln!(
            csv,
            "{},{},{},{},{first},{},{}",
            r.replica, r.env_seed, r.steps, r.returns_to_start, r.final_x, r.final_y
        );
    }
    write_file(out.join("simulate_summary.csv"), &csv)?;
    let total: u64 = records.iter().map(|r| r.returns_to_start).sum();
    println!(
        "simulate: {} replicas x {} steps, {} total returns",
        budget.replicas, budget.steps, total
    );
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct ClassifyRecord<'a> {
    replica: u32,
    env_seed: u64,
    variant: &'a str,
    steps: u64,
    partial_sum: f64,
    returns: u64,
    a1: bool,
    a2: bool,
    b: bool,
}

fn run_classify(
    config: &RunConfig,
    hash: &str,
    master_seed: u64,
    out: &PathBuf,
) -> Result<ExitCode, String> {
    let spec = config.environment_spec().map_err(|e| e.to_string())?;
    let budget = config.campaign_budget().map_err(|e| e.to_string())?;
    let report = classify(
        &spec,
        &budget,
        &config.event_thresholds(),
        &config.classify_thresholds(),
        master_seed,
    )
    .map_err(|e| e.to_string())?;

    let variant = spec.variant.name();
    let mut jsonl = header(hash, master_seed, "classify");
    for replica in &report.campaign.replicas {
        for checkpoint in &replica.checkpoints {
            let record = ClassifyRecord {
                replica: replica.replica,
                env_seed: replica.env_seed,
                variant,
                steps: checkpoint.steps,
                partial_sum: checkpoint.partial_sum,
                returns: checkpoint.returns,
                a1: replica.events.a1,
                a2: replica.events.a2,
                b: replica.events.b,
            };
            jsonl.push_str(&serde_json::to_string(&record).expect("record serializes"));
            jsonl.push('\n');
        }
    }
    write_file(out.join("classify_records.jsonl"), &jsonl)?;

    let mut csv = format!("# config_hash={hash} master_seed={master_seed}\n");
    csv.push_str("replica,env_seed,final_partial_sum,final_decade_growth\n");
    for (replica, growth) in report.campaign.replicas.iter().zip(&report.growths) {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            replica.replica,
            replica.env_seed,
            replica.final_partial_sum(),
            growth
        );
    }
    write_file(out.join("classify_summary.csv"), &csv)?;
    write_file(
        out.join("classify_report.json"),
        &format!(
            "{}\n",
            serde_json::to_string_pretty(&report).expect("report serializes")
        ),
    )?;
    let frequencies = report.campaign.event_frequencies();
    println!(
        "classify: evidence={} median_growth={:.4} median_final={:.4} freq(A)={:.3} freq(B)={:.3}",
        report.evidence, report.median_growth, report.median_final, frequencies.a, frequencies.b
    );
    Ok(ExitCode::SUCCESS)
}

fn run_counterexample(
    config: &RunConfig,
    master_seed: u64,
    out: &PathBuf,
) -> Result<ExitCode, String> {
    let spec = config.environment_spec().map_err(|e| e.to_string())?;
    let targets = config.counterexample_targets();
    let budget = config.estimator_budget();
    let cert = counterexample::build(&targets, &budget, spec.seed, master_seed)
        .map_err(|e| e.to_string())?;
    write_file(
        out.join("certificate.json"),
        &format!("{}\n", cert.to_json()),
    )?;
    for stage in &cert.stages {
        println!(
            "stage {}: target {} cleared at horizon {} (partial sum {:.3} +- {:.3})",
            stage.index, stage.target, stage.horizon, stage.partial_sum, stage.standard_error
        );
    }
    if let Some(failure) = &cert.failure {
        println!(
            "stage {}: FAILED to clear target {} within budget (last estimate {:.3} +- {:.3} at horizon {})",
            failure.stage,
            failure.target,
            failure.last_partial_sum,
            failure.last_standard_error,
            failure.last_horizon
        );
        return Ok(ExitCode::FAILURE);
    }
    let fresh_seed = rng::derive_key(&[master_seed, tags::RESAMPLE, u64::MAX]);
    let verification = counterexample::verify(&cert, fresh_seed).map_err(|e| e.to_string())?;
    let stable = counterexample::prefix_stability_holds(&cert).map_err(|e| e.to_string())?;
    println!(
        "verify: fresh re-estimate {}; prefix stability {}",
        if verification.ok { "ok" } else { "FAILED" },
        if stable { "exact" } else { "BROKEN" }
    );
    Ok(if verification.ok && stable {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
