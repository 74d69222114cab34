//! Seeded error experiments: sample evidence, compute an exact reference,
//! and record per-iteration, per-timestep L1 errors for each algorithm.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use log::warn;
use rayon::prelude::*;

use super::l1::l1_error;
use crate::approx::{bk_smoother, ff_smoother, iterated_bk, ClusterSpec};
use crate::error::{Caps, DbnError, Result};
use crate::exact::{flat_smoother, frontier_smoother};
use crate::lbp::{lbp_smoother, unrolled_network, LbpConfig, LbpOptions, Schedule};
use crate::marginals::SmoothedMarginals;
use crate::model::{
    build_chmm, build_factorial_hmm, build_hmm, build_water_network, build_water_network_truncated, sample_evidence,
    DiscreteDbn, EvidenceSequence,
};

/// A seeded model family: `chmm:N:Q`, `fhmm:N:Q`, `hmm:Q:O`, `water` or `water:K`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelSpec {
    Chmm { chains: usize, arity: usize },
    Factorial { chains: usize, arity: usize },
    Hmm { arity: usize, observed_arity: usize },
    Water { keep_hidden: Option<usize> },
}

impl ModelSpec {
    pub fn build(&self, seed: u64) -> Result<DiscreteDbn> {
        match *self {
            ModelSpec::Chmm { chains, arity } => build_chmm(chains, arity, seed),
            ModelSpec::Factorial { chains, arity } => build_factorial_hmm(chains, arity, seed),
            ModelSpec::Hmm { arity, observed_arity } => build_hmm(arity, observed_arity, seed),
            ModelSpec::Water { keep_hidden: None } => build_water_network(seed),
            ModelSpec::Water { keep_hidden: Some(k) } => build_water_network_truncated(seed, k),
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Chmm { chains, arity } => write!(f, "chmm:{chains}:{arity}"),
            ModelSpec::Factorial { chains, arity } => write!(f, "fhmm:{chains}:{arity}"),
            ModelSpec::Hmm { arity, observed_arity } => write!(f, "hmm:{arity}:{observed_arity}"),
            ModelSpec::Water { keep_hidden: None } => write!(f, "water"),
            ModelSpec::Water { keep_hidden: Some(k) } => write!(f, "water:{k}"),
        }
    }
}

fn parse_usize(part: &str, what: &str, text: &str) -> Result<usize> {
    part.parse()
        .map_err(|_| DbnError::InvalidConfig(format!("{text:?}: {what} must be a non-negative integer, got {part:?}")))
}

impl FromStr for ModelSpec {
    type Err = DbnError;

    fn from_str(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        let spec = match parts.as_slice() {
            ["chmm", n, q] => ModelSpec::Chmm { chains: parse_usize(n, "N", text)?, arity: parse_usize(q, "Q", text)? },
            ["fhmm", n, q] => ModelSpec::Factorial { chains: parse_usize(n, "N", text)?, arity: parse_usize(q, "Q", text)? },
            ["hmm", q, o] => ModelSpec::Hmm { arity: parse_usize(q, "Q", text)?, observed_arity: parse_usize(o, "O", text)? },
            ["water"] => ModelSpec::Water { keep_hidden: None },
            ["water", k] => ModelSpec::Water { keep_hidden: Some(parse_usize(k, "K", text)?) },
            _ => {
                return Err(DbnError::InvalidConfig(format!(
                    "unknown model spec {text:?} (expected chmm:N:Q, fhmm:N:Q, hmm:Q:O, water or water:K)"
                )))
            }
        };
        match spec {
            ModelSpec::Chmm { chains: 0, .. } | ModelSpec::Factorial { chains: 0, .. } => {
                Err(DbnError::InvalidConfig(format!("{text:?}: N must be at least 1")))
            }
            ModelSpec::Chmm { arity, .. } | ModelSpec::Factorial { arity, .. } | ModelSpec::Hmm { arity, .. } if arity < 2 => {
                Err(DbnError::InvalidConfig(format!("{text:?}: Q must be at least 2")))
            }
            ModelSpec::Hmm { observed_arity, .. } if observed_arity < 2 => {
                Err(DbnError::InvalidConfig(format!("{text:?}: O must be at least 2")))
            }
            ModelSpec::Water { keep_hidden: Some(k) } if !(1..=8).contains(&k) => {
                Err(DbnError::InvalidConfig(format!("{text:?}: K must lie in 1..=8")))
            }
            ok => Ok(ok),
        }
    }
}

/// An algorithm and its settings: `exact`, `ff`, `bk`, `lbp:K[:MU]`,
/// `flood:K[:MU]` (flooding schedule) or `iterated-bk:K[:MU]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlgorithmSpec {
    Exact,
    Ff,
    Bk,
    Lbp { iterations: usize, damping: f64, schedule: Schedule },
    IteratedBk { iterations: usize, damping: f64 },
}

impl AlgorithmSpec {
    pub fn damping(&self) -> Option<f64> {
        match *self {
            AlgorithmSpec::Lbp { damping, .. } | AlgorithmSpec::IteratedBk { damping, .. } => Some(damping),
            _ => None,
        }
    }

    pub fn iterations(&self) -> usize {
        match *self {
            AlgorithmSpec::Lbp { iterations, .. } | AlgorithmSpec::IteratedBk { iterations, .. } => iterations,
            _ => 1,
        }
    }
}

impl fmt::Display for AlgorithmSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlgorithmSpec::Exact => write!(f, "exact"),
            AlgorithmSpec::Ff => write!(f, "ff"),
            AlgorithmSpec::Bk => write!(f, "bk"),
            AlgorithmSpec::Lbp { iterations, damping, schedule: Schedule::ForwardBackward } => write!(f, "lbp:{iterations}:{damping}"),
            AlgorithmSpec::Lbp { iterations, damping, schedule: Schedule::Flooding } => write!(f, "flood:{iterations}:{damping}"),
            AlgorithmSpec::IteratedBk { iterations, damping } => write!(f, "iterated-bk:{iterations}:{damping}"),
        }
    }
}

impl FromStr for AlgorithmSpec {
    type Err = DbnError;

    fn from_str(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        let bad = |m: &str| DbnError::InvalidConfig(format!("algorithm {text:?}: {m}"));
        let iterative = |parts: &[&str]| -> Result<(usize, f64)> {
            let iterations = match parts.first() {
                Some(k) => k.parse::<usize>().map_err(|_| bad("iteration count must be a positive integer"))?,
                None => LbpConfig::default().max_iterations,
            };
            let damping = match parts.get(1) {
                Some(mu) => mu.parse::<f64>().map_err(|_| bad("damping must be a number"))?,
                None => 0.0,
            };
            if parts.len() > 2 {
                return Err(bad("too many fields"));
            }
            if iterations == 0 {
                return Err(bad("iteration count must be at least 1"));
            }
            if !(0.0..=1.0).contains(&damping) {
                return Err(bad("damping must lie in [0, 1]"));
            }
            Ok((iterations, damping))
        };
        match parts[0] {
            "exact" | "ff" | "bk" if parts.len() > 1 => Err(bad("takes no parameters")),
            "exact" => Ok(AlgorithmSpec::Exact),
            "ff" => Ok(AlgorithmSpec::Ff),
            "bk" => Ok(AlgorithmSpec::Bk),
            "lbp" | "flood" => {
                let (iterations, damping) = iterative(&parts[1..])?;
                let schedule = if parts[0] == "lbp" { Schedule::ForwardBackward } else { Schedule::Flooding };
                Ok(AlgorithmSpec::Lbp { iterations, damping, schedule })
            }
            "iterated-bk" => {
                let (iterations, damping) = iterative(&parts[1..])?;
                Ok(AlgorithmSpec::IteratedBk { iterations, damping })
            }
            _ => Err(bad("expected exact, ff, bk, lbp:K[:MU], flood:K[:MU] or iterated-bk:K[:MU]")),
        }
    }
}

/// Exact marginals by the cheapest feasible route: flattened forwards-backwards
/// within the state cap, the frontier algorithm otherwise.
pub fn exact_reference(dbn: &DiscreteDbn, evidence: &EvidenceSequence, caps: &Caps) -> Result<SmoothedMarginals> {
    match flat_smoother(dbn, evidence, caps) {
        Err(e) if e.is_cap_exceeded() => Ok(frontier_smoother(dbn, evidence, caps)?.marginals),
        other => other,
    }
}

/// Per-iteration marginals (one entry for non-iterative algorithms).
pub fn run_algorithm(
    dbn: &DiscreteDbn,
    evidence: &EvidenceSequence,
    algorithm: &AlgorithmSpec,
    tol: f64,
    caps: &Caps,
) -> Result<Vec<SmoothedMarginals>> {
    match *algorithm {
        AlgorithmSpec::Exact => Ok(vec![exact_reference(dbn, evidence, caps)?]),
        AlgorithmSpec::Ff => Ok(vec![ff_smoother(dbn, evidence)?]),
        AlgorithmSpec::Bk => Ok(vec![bk_smoother(dbn, evidence, &ClusterSpec::per_node(dbn), caps)?]),
        AlgorithmSpec::Lbp { iterations, damping, schedule } => {
            let net = unrolled_network(dbn, evidence, caps)?;
            let config = LbpConfig { schedule, max_iterations: iterations, damping, tol };
            Ok(lbp_smoother(&net, &config, LbpOptions { record_history: true, ..LbpOptions::default() })?.history)
        }
        AlgorithmSpec::IteratedBk { iterations, damping } => {
            let config = LbpConfig { max_iterations: iterations, damping, tol, ..LbpConfig::default() };
            let opts = LbpOptions { record_history: true, ..LbpOptions::default() };
            Ok(iterated_bk(dbn, evidence, &ClusterSpec::per_node(dbn), &config, opts, caps)?.history)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorExperiment {
    pub model: ModelSpec,
    pub seeds: Vec<u64>,
    pub horizon: usize,
    pub algorithms: Vec<AlgorithmSpec>,
    pub tol: f64,
    pub caps: Caps,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRow {
    pub run_id: String,
    pub seed: u64,
    pub model: String,
    pub algorithm: String,
    pub mu: Option<f64>,
    pub iteration: usize,
    pub t: usize,
    pub l1: f64,
}

/// One instance with its exact reference.
#[derive(Clone, Debug)]
pub struct ErrorCell<'a> {
    pub run_id: String,
    pub seed: u64,
    pub model: String,
    pub dbn: &'a DiscreteDbn,
    pub evidence: &'a EvidenceSequence,
    pub reference: &'a SmoothedMarginals,
}

impl ErrorCell<'_> {
    /// Per-iteration, per-timestep L1 rows of one algorithm against the reference.
    pub fn rows(&self, algorithm: &AlgorithmSpec, tol: f64, caps: &Caps) -> Result<Vec<ErrorRow>> {
        let history = run_algorithm(self.dbn, self.evidence, algorithm, tol, caps)?;
        let mut out = Vec::new();
        for (k, m) in history.iter().enumerate() {
            let report = l1_error(self.reference, m)?;
            for (t, &l1) in report.per_t.iter().enumerate() {
                out.push(ErrorRow {
                    run_id: self.run_id.clone(),
                    seed: self.seed,
                    model: self.model.clone(),
                    algorithm: algorithm.to_string(),
                    mu: algorithm.damping(),
                    iteration: k + 1,
                    t: t + 1,
                    l1,
                });
            }
        }
        Ok(out)
    }
}

/// Runs every (seed, algorithm) cell, in parallel, and returns rows sorted by
/// seed, algorithm, iteration and timestep. Cells whose model, reference or
/// algorithm exceeds a cap are skipped with a logged reason.
pub fn run_error_experiment(exp: &ErrorExperiment) -> Result<Vec<ErrorRow>> {
    if exp.algorithms.is_empty() {
        return Ok(Vec::new());
    }
    let model_name = exp.model.to_string();
    let references: Vec<Option<(u64, DiscreteDbn, EvidenceSequence, SmoothedMarginals)>> = exp
        .seeds
        .par_iter()
        .map(|&seed| {
            let dbn = exp.model.build(seed)?;
            let (evidence, _) = sample_evidence(&dbn, exp.horizon, seed)?;
            match exact_reference(&dbn, &evidence, &exp.caps) {
                Ok(reference) => Ok(Some((seed, dbn, evidence, reference))),
                Err(e) if e.is_cap_exceeded() => {
                    warn!("seed {seed}: exact reference skipped: {e}");
                    Ok(None)
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let cells: Vec<(&(u64, DiscreteDbn, EvidenceSequence, SmoothedMarginals), &AlgorithmSpec)> = references
        .iter()
        .flatten()
        .flat_map(|r| exp.algorithms.iter().map(move |a| (r, a)))
        .collect();
    let mut rows: Vec<ErrorRow> = cells
        .par_iter()
        .map(|&((seed, dbn, evidence, reference), algorithm)| {
            let cell = ErrorCell {
                run_id: format!("{model_name}/seed{seed}"),
                seed: *seed,
                model: model_name.clone(),
                dbn,
                evidence,
                reference,
            };
            match cell.rows(algorithm, exp.tol, &exp.caps) {
                Err(e) if e.is_cap_exceeded() => {
                    warn!("seed {seed}, {algorithm}: skipped: {e}");
                    Ok(Vec::new())
                }
                other => other,
            }
        })
        .collect::<Result<Vec<Vec<ErrorRow>>>>()?
        .into_iter()
        .flatten()
        .collect();
    rows.sort_by(|a, b| {
        (a.seed, &a.algorithm, a.iteration, a.t).cmp(&(b.seed, &b.algorithm, b.iteration, b.t))
    });
    Ok(rows)
}

pub fn write_error_csv<W: Write>(rows: &[ErrorRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["run_id", "seed", "model", "algorithm", "mu", "iteration", "t", "l1"])?;
    for r in rows {
        w.write_record([
            r.run_id.clone(),
            r.seed.to_string(),
            r.model.clone(),
            r.algorithm.clone(),
            r.mu.map(|m| m.to_string()).unwrap_or_default(),
            r.iteration.to_string(),
            r.t.to_string(),
            format!("{:e}", r.l1),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_round_trips() {
        for s in ["chmm:3:2", "fhmm:2:3", "hmm:4:2", "water", "water:4"] {
            assert_eq!(s.parse::<ModelSpec>().unwrap().to_string(), s);
        }
        for s in ["exact", "ff", "bk", "lbp:20:0.1", "flood:5:0", "iterated-bk:3:0.2"] {
            assert_eq!(s.parse::<AlgorithmSpec>().unwrap().to_string(), s);
        }
        assert_eq!("lbp:3".parse::<AlgorithmSpec>().unwrap().to_string(), "lbp:3:0");
        for bad in ["chmm:0:2", "chmm:2:1", "chmm:2", "grid", "water:9"] {
            assert!(bad.parse::<ModelSpec>().is_err(), "{bad}");
        }
        for bad in ["lbp:0", "lbp:2:1.5", "ff:2", "gibbs"] {
            assert!(bad.parse::<AlgorithmSpec>().is_err(), "{bad}");
        }
    }

    fn experiment(algorithms: Vec<AlgorithmSpec>) -> ErrorExperiment {
        ErrorExperiment {
            model: ModelSpec::Chmm { chains: 3, arity: 2 },
            seeds: vec![1, 2, 3],
            horizon: 6,
            algorithms,
            tol: 1e-9,
            caps: Caps::default(),
        }
    }

    #[test]
    fn empty_algorithm_list_gives_empty_dataset() {
        let rows = run_error_experiment(&experiment(vec![])).unwrap();
        assert!(rows.is_empty());
        let mut buf = Vec::new();
        write_error_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "run_id,seed,model,algorithm,mu,iteration,t,l1\n");
    }

    #[test]
    fn dataset_is_deterministic_and_sorted() {
        let algs = vec!["lbp:4:0.1".parse().unwrap(), AlgorithmSpec::Ff, AlgorithmSpec::Exact];
        let a = run_error_experiment(&experiment(algs.clone())).unwrap();
        let b = run_error_experiment(&experiment(algs)).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().filter(|r| r.algorithm == "exact").all(|r| r.l1 == 0.0));
        assert!(a.windows(2).all(|w| (w[0].seed, &w[0].algorithm) <= (w[1].seed, &w[1].algorithm)));
        assert_eq!(a.iter().filter(|r| r.algorithm == "ff").count(), 3 * 6);
    }
}
