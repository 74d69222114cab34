//! Wall-clock timing of smoothers on seeded CHMMs.

use std::io::Write;
use std::time::{Duration, Instant};

use log::warn;

use super::experiment::{AlgorithmSpec, ModelSpec};
use crate::approx::{bk_smoother, ff_smoother, ClusterSpec};
use crate::error::{Caps, DbnError, Result};
use crate::exact::flat_smoother;
use crate::lbp::{lbp_smoother, unrolled_network, LbpConfig, LbpOptions};
use crate::marginals::SmoothedMarginals;
use crate::model::{sample_evidence, DiscreteDbn, EvidenceSequence};

#[derive(Clone, Debug, PartialEq)]
pub struct TimingConfig {
    pub ns: Vec<usize>,
    pub q: usize,
    pub horizon: usize,
    pub algorithms: Vec<AlgorithmSpec>,
    pub repeats: usize,
    pub seed: u64,
    pub caps: Caps,
    /// Runs are batched until one measurement lasts at least this long.
    pub min_measurement: Duration,
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig {
            ns: vec![1, 3, 5, 7, 9, 11],
            q: 2,
            horizon: 50,
            algorithms: vec![AlgorithmSpec::Exact, AlgorithmSpec::Ff],
            repeats: 3,
            seed: 0,
            caps: Caps::default(),
            min_measurement: Duration::from_millis(5),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimingRecord {
    pub model: String,
    pub algorithm: String,
    pub n: usize,
    pub q: usize,
    pub t: usize,
    pub iterations: usize,
    pub repeat: usize,
    pub seconds: f64,
    pub seconds_per_slice: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimingReport {
    pub records: Vec<TimingRecord>,
    /// `(algorithm, N, reason)` for omitted points.
    pub skipped: Vec<(String, usize, String)>,
}

impl TimingReport {
    fn per_slice(&self, algorithm: &str, n: usize) -> Option<Vec<f64>> {
        let mut v: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.algorithm == algorithm && r.n == n)
            .map(|r| r.seconds_per_slice)
            .collect();
        v.sort_by(f64::total_cmp);
        (!v.is_empty()).then_some(v)
    }

    /// Median seconds-per-slice for one (algorithm, N) point.
    pub fn median_per_slice(&self, algorithm: &str, n: usize) -> Option<f64> {
        self.per_slice(algorithm, n).map(|v| v[v.len() / 2])
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["model", "algorithm", "N", "Q", "T", "repeat", "seconds", "seconds_per_slice"])?;
        for r in &self.records {
            w.write_record([
                r.model.clone(),
                r.algorithm.clone(),
                r.n.to_string(),
                r.q.to_string(),
                r.t.to_string(),
                r.repeat.to_string(),
                format!("{:e}", r.seconds),
                format!("{:e}", r.seconds_per_slice),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// The timed smoother. Exact timing uses the flattened route.
fn timed_run(dbn: &DiscreteDbn, evidence: &EvidenceSequence, algorithm: &AlgorithmSpec, caps: &Caps) -> Result<SmoothedMarginals> {
    match *algorithm {
        AlgorithmSpec::Exact => flat_smoother(dbn, evidence, caps),
        AlgorithmSpec::Ff => ff_smoother(dbn, evidence),
        AlgorithmSpec::Bk => bk_smoother(dbn, evidence, &ClusterSpec::per_node(dbn), caps),
        AlgorithmSpec::Lbp { iterations, damping, schedule } => {
            let net = unrolled_network(dbn, evidence, caps)?;
            // fixed iteration count: never stop early on convergence
            let config = LbpConfig { schedule, max_iterations: iterations, damping, tol: f64::MIN_POSITIVE };
            Ok(lbp_smoother(&net, &config, LbpOptions::default())?.marginals)
        }
        AlgorithmSpec::IteratedBk { iterations, damping } => {
            let config = LbpConfig { max_iterations: iterations, damping, tol: f64::MIN_POSITIVE, ..LbpConfig::default() };
            Ok(crate::approx::iterated_bk(dbn, evidence, &ClusterSpec::per_node(dbn), &config, LbpOptions::default(), caps)?.marginals)
        }
    }
}

/// For each N, builds a seeded CHMM and samples evidence, then times each
/// algorithm: one discarded warm-up run, then `repeats` measurements, each
/// the mean over a batch long enough to reach `min_measurement`. Repeats
/// are interleaved across the whole sweep so slow spells on the machine
/// spread over all points. Points beyond a cap are omitted and listed in
/// `skipped`.
pub fn run_timing_experiment(config: &TimingConfig) -> Result<TimingReport> {
    if config.repeats == 0 {
        return Err(DbnError::InvalidConfig("repeats must be at least 1".into()));
    }
    struct Point<'a> {
        model: String,
        dbn: DiscreteDbn,
        evidence: EvidenceSequence,
        algorithm: &'a AlgorithmSpec,
        n: usize,
        batch: usize,
    }
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for &n in &config.ns {
        let spec = ModelSpec::Chmm { chains: n, arity: config.q };
        let dbn = spec.build(config.seed)?;
        let (evidence, _) = sample_evidence(&dbn, config.horizon, config.seed)?;
        for algorithm in &config.algorithms {
            let warm = Instant::now();
            match timed_run(&dbn, &evidence, algorithm, &config.caps) {
                Ok(m) => std::hint::black_box(m),
                Err(e) if e.is_cap_exceeded() => {
                    warn!("{algorithm} at N={n} omitted: {e}");
                    skipped.push((algorithm.to_string(), n, e.to_string()));
                    continue;
                }
                Err(e) => return Err(e),
            };
            let once = warm.elapsed().max(Duration::from_nanos(1));
            let batch = (config.min_measurement.as_secs_f64() / once.as_secs_f64()).ceil().clamp(1.0, 1e6) as usize;
            points.push(Point { model: spec.to_string(), dbn: dbn.clone(), evidence: evidence.clone(), algorithm, n, batch });
        }
    }
    let mut records = Vec::new();
    for repeat in 1..=config.repeats {
        for p in &points {
            let start = Instant::now();
            for _ in 0..p.batch {
                std::hint::black_box(timed_run(&p.dbn, &p.evidence, p.algorithm, &config.caps)?);
            }
            let seconds = start.elapsed().as_secs_f64() / p.batch as f64;
            records.push(TimingRecord {
                model: p.model.clone(),
                algorithm: p.algorithm.to_string(),
                n: p.n,
                q: config.q,
                t: config.horizon,
                iterations: p.algorithm.iterations(),
                repeat,
                seconds,
                seconds_per_slice: seconds / config.horizon as f64,
            });
        }
    }
    // group by point, then repeat
    let rank = |r: &TimingRecord| {
        let a = config.algorithms.iter().position(|a| a.to_string() == r.algorithm);
        (config.ns.iter().position(|&n| n == r.n), a, r.repeat)
    };
    records.sort_by_key(rank);
    Ok(TimingReport { records, skipped })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y ≈ slope * x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LinearFit { slope, intercept, r_squared })
}
