//! `dbn`: generate models and evidence, run smoothers, compare them against
//! exact marginals and time them.
//!
//! Data goes to files; stdout carries one summary line; diagnostics go to
//! stderr. Exit codes: 0 success (non-convergence included), 2 usage or
//! input errors, 3 resource caps.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use dbn_smooth::approx::{bk_smoother, ff_smoother, iterated_bk, ClusterSpec};
use dbn_smooth::exact::{brute_force_joint, flat_smoother, frontier_smoother};
use dbn_smooth::lbp::{lbp_smoother, unrolled_network, LbpConfig, LbpOptions, LbpRun, Schedule};
use dbn_smooth::metrics::{
    exact_reference, run_error_experiment, run_timing_experiment, write_error_csv, AlgorithmSpec, ErrorCell,
    ErrorExperiment, ModelSpec, TimingConfig,
};
use dbn_smooth::model::io::{load_model, save_model};
use dbn_smooth::model::{sample_evidence, CptRole, DiscreteDbn, EvidenceSequence};
use dbn_smooth::{Caps, DbnError, SmoothedMarginals};

#[derive(Parser, Debug)]
#[command(name = "dbn", version, about = "Smoothing in discrete dynamic Bayesian networks")]
struct Cli {
    /// Raise diagnostic verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a seeded model and write it as JSON.
    GenModel(GenModelArgs),
    /// Sample an evidence sequence from a model.
    GenEvidence(GenEvidenceArgs),
    /// Run one smoother and write per-node marginals.
    Smooth(SmoothArgs),
    /// L1 error of several algorithms against exact marginals.
    Compare(CompareArgs),
    /// Time smoothers on a sweep of coupled HMMs.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct GenModelArgs {
    /// chmm:N:Q, fhmm:N:Q, hmm:Q:O, water or water:K
    spec: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ModelSource {
    /// Model file, or a builder spec such as chmm:5:2 (built with --seed).
    #[arg(long)]
    model: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct GenEvidenceArgs {
    #[command(flatten)]
    source: ModelSource,
    #[arg(long)]
    horizon: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Copy)]
struct CapArgs {
    #[arg(long, default_value_t = Caps::default().flat_states)]
    max_flat_states: usize,
    #[arg(long, default_value_t = Caps::default().brute_force_assignments)]
    max_brute_force: u128,
    #[arg(long, default_value_t = Caps::default().frontier_joint)]
    max_frontier_joint: usize,
    #[arg(long, default_value_t = Caps::default().cluster_states)]
    max_cluster_states: usize,
    #[arg(long, default_value_t = Caps::default().elimination_factor)]
    max_elimination_factor: usize,
}

impl CapArgs {
    fn caps(&self) -> Caps {
        Caps {
            flat_states: self.max_flat_states,
            brute_force_assignments: self.max_brute_force,
            frontier_joint: self.max_frontier_joint,
            cluster_states: self.max_cluster_states,
            elimination_factor: self.max_elimination_factor,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Algorithm {
    /// Flattened forwards-backwards, or the frontier algorithm beyond the state cap.
    Exact,
    Flat,
    Frontier,
    Brute,
    Ff,
    Bk,
    Lbp,
    IteratedBk,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ScheduleArg {
    Fb,
    Flooding,
}

#[derive(Args, Debug)]
struct SmoothArgs {
    #[command(flatten)]
    source: ModelSource,
    /// Evidence file, or sample:T[:SEED] (SEED defaults to --seed).
    #[arg(long)]
    evidence: String,
    #[arg(long, value_enum, default_value_t = Algorithm::Exact)]
    algorithm: Algorithm,
    #[arg(long, default_value_t = LbpConfig::default().max_iterations)]
    iters: usize,
    #[arg(long, default_value_t = 0.0)]
    damping: f64,
    #[arg(long, value_enum, default_value_t = ScheduleArg::Fb)]
    schedule: ScheduleArg,
    #[arg(long, default_value_t = LbpConfig::default().tol)]
    tol: f64,
    /// per-node, whole-slice, or a JSON list of node lists.
    #[arg(long, default_value = "per-node")]
    clusters: String,
    /// Marginals CSV.
    #[arg(long)]
    out: PathBuf,
    /// Iteration trace (lbp, iterated-bk) or frontier schedule (frontier).
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    caps: CapArgs,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    source: ModelSource,
    /// Evidence file, or sample:T[:SEED].
    #[arg(long)]
    evidence: String,
    /// Comma-separated: exact, ff, bk, lbp:K[:MU], flood:K[:MU], iterated-bk:K[:MU].
    #[arg(long, value_delimiter = ',', required = true)]
    algorithms: Vec<String>,
    /// Seed range A..B or list; needs a builder spec and sampled evidence.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long, default_value_t = LbpConfig::default().tol)]
    tol: f64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    caps: CapArgs,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 3, 5, 7, 9, 11])]
    ns: Vec<usize>,
    #[arg(long, default_value_t = 2)]
    q: usize,
    #[arg(long, default_value_t = 50)]
    horizon: usize,
    #[arg(long, value_delimiter = ',', default_values_t = ["exact".to_string(), "ff".to_string(), "lbp:1".to_string(), "lbp:3".to_string()])]
    algorithms: Vec<String>,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Shortest batch per measurement, in milliseconds.
    #[arg(long, default_value_t = 5)]
    min_batch_ms: u64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    caps: CapArgs,
}

fn exit_code(e: &DbnError) -> u8 {
    if e.is_cap_exceeded() {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::GenModel(a) => gen_model(a),
        Command::GenEvidence(a) => gen_evidence(a),
        Command::Smooth(a) => smooth(a),
        Command::Compare(a) => compare(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, DbnError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn load_source(source: &ModelSource) -> Result<(DiscreteDbn, String), DbnError> {
    match source.model.parse::<ModelSpec>() {
        Ok(spec) => Ok((spec.build(source.seed)?, spec.to_string())),
        Err(_) if Path::new(&source.model).exists() => Ok((load_model(&source.model)?, source.model.clone())),
        Err(e) => Err(DbnError::InvalidConfig(format!("--model {:?} is neither a file nor a builder spec ({e})", source.model))),
    }
}

fn load_evidence(dbn: &DiscreteDbn, text: &str, default_seed: u64) -> Result<EvidenceSequence, DbnError> {
    let Some(rest) = text.strip_prefix("sample:") else {
        return EvidenceSequence::load(dbn, text);
    };
    let bad = || DbnError::InvalidConfig(format!("--evidence {text:?}: expected sample:T or sample:T:SEED"));
    let mut parts = rest.split(':');
    let horizon: usize = parts.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
    let seed = match parts.next() {
        Some(s) => s.parse().map_err(|_| bad())?,
        None => default_seed,
    };
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok(sample_evidence(dbn, horizon, seed)?.0)
}

fn gen_model(a: GenModelArgs) -> Result<String, DbnError> {
    let spec: ModelSpec = a.spec.parse()?;
    let dbn = spec.build(a.seed)?;
    dbn.require_regular()?;
    save_model(&dbn, &a.out)?;
    let entries: usize = (0..dbn.num_nodes())
        .map(|i| dbn.cpt(i, CptRole::Prior).table.values().len() + dbn.cpt(i, CptRole::Transition).table.values().len())
        .sum();
    Ok(format!(
        "{spec} seed {}: {} hidden and {} observed nodes, {} inter-slice and {} intra-slice edges, {entries} CPT entries -> {}",
        a.seed,
        dbn.num_hidden(),
        dbn.observed().len(),
        dbn.inter_edges().len(),
        dbn.intra_edges().len(),
        a.out.display()
    ))
}

fn gen_evidence(a: GenEvidenceArgs) -> Result<String, DbnError> {
    let (dbn, name) = load_source(&a.source)?;
    let (evidence, _) = sample_evidence(&dbn, a.horizon, a.source.seed)?;
    evidence.save(&a.out)?;
    Ok(format!("{name}: sampled T={} with seed {} ({} observations) -> {}", a.horizon, a.source.seed, evidence.observations().count(), a.out.display()))
}

fn lbp_summary(run: &LbpRun) -> String {
    let iterations = run.trace.iterations();
    let delta = run.trace.records.last().map_or(0.0, |r| r.max_delta);
    if run.trace.converged {
        format!("converged after {iterations} iterations (max delta {delta:.3e})")
    } else {
        format!("non-converged after {iterations} iterations (max delta {delta:.3e})")
    }
}

fn algorithm_name(a: Algorithm) -> String {
    a.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
}

fn smooth(a: SmoothArgs) -> Result<String, DbnError> {
    let (dbn, name) = load_source(&a.source)?;
    let evidence = load_evidence(&dbn, &a.evidence, a.source.seed)?;
    let caps = a.caps.caps();
    let schedule = match a.schedule {
        ScheduleArg::Fb => Schedule::ForwardBackward,
        ScheduleArg::Flooding => Schedule::Flooding,
    };
    let config = LbpConfig { schedule, max_iterations: a.iters, damping: a.damping, tol: a.tol };
    let iterative = matches!(a.algorithm, Algorithm::Lbp | Algorithm::IteratedBk);
    if iterative {
        config.validate()?;
    }
    let mut note = String::new();
    let marginals: SmoothedMarginals = match a.algorithm {
        Algorithm::Exact => exact_reference(&dbn, &evidence, &caps)?,
        Algorithm::Flat => flat_smoother(&dbn, &evidence, &caps)?,
        Algorithm::Brute => brute_force_joint(&dbn, &evidence, &caps)?,
        Algorithm::Frontier => {
            let run = frontier_smoother(&dbn, &evidence, &caps)?;
            if let Some(path) = &a.trace {
                create(path)?.write_all(run.trace_text().as_bytes())?;
            }
            note = format!(", max frontier joint {}", run.schedule.max_joint_size());
            run.marginals
        }
        Algorithm::Ff => ff_smoother(&dbn, &evidence)?,
        Algorithm::Bk => bk_smoother(&dbn, &evidence, &ClusterSpec::parse(&dbn, &a.clusters, &caps)?, &caps)?,
        Algorithm::Lbp | Algorithm::IteratedBk => {
            let run = if a.algorithm == Algorithm::Lbp {
                let net = unrolled_network(&dbn, &evidence, &caps)?;
                lbp_smoother(&net, &config, LbpOptions::default())?
            } else {
                let clusters = ClusterSpec::parse(&dbn, &a.clusters, &caps)?;
                iterated_bk(&dbn, &evidence, &clusters, &config, LbpOptions::default(), &caps)?
            };
            if let Some(path) = &a.trace {
                run.trace.write_csv(create(path)?)?;
            }
            if !run.trace.converged {
                warn!("message passing did not converge within {} iterations", a.iters);
            }
            note = format!(", {}", lbp_summary(&run));
            run.marginals
        }
    };
    if a.trace.is_some() && !iterative && a.algorithm != Algorithm::Frontier {
        warn!("--trace is ignored for {}", algorithm_name(a.algorithm));
    }
    marginals.write_csv(&dbn, create(&a.out)?)?;
    if let Some(ll) = marginals.log_evidence {
        note.push_str(&format!(", log P(y) = {ll:.10}"));
    }
    Ok(format!(
        "{name}: {} smoothing over T={} for {} hidden nodes{note} -> {}",
        algorithm_name(a.algorithm),
        evidence.horizon(),
        dbn.num_hidden(),
        a.out.display()
    ))
}

fn parse_seeds(text: &str) -> Result<Vec<u64>, DbnError> {
    let bad = || DbnError::InvalidConfig(format!("--seeds {text:?}: expected A..B or a comma-separated list"));
    if let Some((lo, hi)) = text.split_once("..") {
        let lo: u64 = lo.parse().map_err(|_| bad())?;
        let hi: u64 = hi.parse().map_err(|_| bad())?;
        return Ok((lo..hi).collect());
    }
    text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

fn compare(a: CompareArgs) -> Result<String, DbnError> {
    let caps = a.caps.caps();
    let algorithms = a.algorithms.iter().map(|s| s.parse()).collect::<Result<Vec<AlgorithmSpec>, _>>()?;
    let rows = if let Some(seeds) = &a.seeds {
        let model: ModelSpec = a.source.model.parse()?;
        let horizon = a
            .evidence
            .strip_prefix("sample:")
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| DbnError::InvalidConfig("--seeds needs --evidence sample:T".into()))?;
        let exp = ErrorExperiment { model, seeds: parse_seeds(seeds)?, horizon, algorithms, tol: a.tol, caps };
        run_error_experiment(&exp)?
    } else {
        let (dbn, name) = load_source(&a.source)?;
        let evidence = load_evidence(&dbn, &a.evidence, a.source.seed)?;
        let reference = exact_reference(&dbn, &evidence, &caps)?;
        let cell = ErrorCell {
            run_id: format!("{name}/seed{}", a.source.seed),
            seed: a.source.seed,
            model: name,
            dbn: &dbn,
            evidence: &evidence,
            reference: &reference,
        };
        let mut rows = Vec::new();
        for algorithm in &algorithms {
            match cell.rows(algorithm, a.tol, &caps) {
                Ok(r) => rows.extend(r),
                Err(e) if e.is_cap_exceeded() => warn!("{algorithm}: skipped: {e}"),
                Err(e) => return Err(e),
            }
        }
        rows
    };
    write_error_csv(&rows, create(&a.out)?)?;
    Ok(format!("compare: {} rows over {} algorithms -> {}", rows.len(), a.algorithms.len(), a.out.display()))
}

fn bench(a: BenchArgs) -> Result<String, DbnError> {
    let algorithms = a.algorithms.iter().map(|s| s.parse()).collect::<Result<Vec<AlgorithmSpec>, _>>()?;
    let config = TimingConfig {
        ns: a.ns,
        q: a.q,
        horizon: a.horizon,
        algorithms,
        repeats: a.repeats,
        seed: a.seed,
        caps: a.caps.caps(),
        min_measurement: Duration::from_millis(a.min_batch_ms),
    };
    let report = run_timing_experiment(&config)?;
    for (algorithm, n, reason) in &report.skipped {
        info!("omitted {algorithm} at N={n}: {reason}");
    }
    report.write_csv(create(&a.out)?)?;
    Ok(format!(
        "bench: {} timing records, {} points omitted -> {}",
        report.records.len(),
        report.skipped.len(),
        a.out.display()
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("2..5").unwrap(), vec![2, 3, 4]);
        assert_eq!(parse_seeds("7, 1").unwrap(), vec![7, 1]);
        assert!(parse_seeds("a..b").is_err());
    }

    #[test]
    fn cap_errors_exit_three() {
        let e = DbnError::CapExceeded { what: "x".into(), size: 2, cap: 1 };
        assert_eq!(exit_code(&e), 3);
        assert_eq!(exit_code(&DbnError::InvalidConfig("bad".into())), 2);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
