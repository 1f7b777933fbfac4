//! Repetition loop, recall accounting and the R ⋈ S reduction.
//!
//! A run sketches the dataset once under `derive_seed(master, SKETCH_STREAM)`;
//! repetition `i` draws everything else from `derive_seed(master, i)`. Results
//! of all repetitions are merged into one deduplicated set and recall is
//! measured against a stored exact join. An empty ground truth counts as
//! recall 1.0.

mod groundtruth;
mod report;

use std::collections::HashSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use groundtruth::GroundTruth;
pub use report::{
    read_csv_rows, read_json_report, write_report, CsvRow, RepetitionRow, ReportFormat, RunReport, CSV_HEADER,
};

use crate::baselines::{exact_join, naive_join, LshParams, ResolvedLsh};
use crate::cpsjoin::{CpsJoinConfig, JoinOutcome, Pair};
use crate::dataset::{Dataset, SimilarityThreshold};
use crate::error::{Error, Result};
use crate::hashing::derive_seed;
use crate::sketching::Sketch;

/// Index passed to [`derive_seed`] for the per-run sketch scheme.
pub const SKETCH_STREAM: u64 = u64::MAX;

/// A join algorithm with all of its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "lowercase")]
pub enum Algorithm {
    CpsJoin(CpsJoinConfig),
    MinHash(LshParams),
    AllPairs { lambda: f64 },
    Naive { lambda: f64 },
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::CpsJoin(_) => "cpsjoin",
            Algorithm::MinHash(_) => "minhash",
            Algorithm::AllPairs { .. } => "allpairs",
            Algorithm::Naive { .. } => "naive",
        }
    }

    pub fn lambda(&self) -> f64 {
        match self {
            Algorithm::CpsJoin(c) => c.params.lambda,
            Algorithm::MinHash(p) => p.lambda,
            Algorithm::AllPairs { lambda } | Algorithm::Naive { lambda } => *lambda,
        }
    }

    /// Exact algorithms find every pair in a single pass.
    pub fn is_exact(&self) -> bool {
        matches!(self, Algorithm::AllPairs { .. } | Algorithm::Naive { .. })
    }

    /// Checks every parameter without touching any data.
    pub fn validate(&self) -> Result<()> {
        match self {
            Algorithm::CpsJoin(config) => {
                config.params.validate()?;
                if config.embedding_size == 0 || config.sketch_words == 0 {
                    return Err(Error::InvalidParam("embedding and sketch sizes must be positive".into()));
                }
                Ok(())
            }
            Algorithm::MinHash(params) => params.validate(),
            Algorithm::AllPairs { lambda } | Algorithm::Naive { lambda } => {
                SimilarityThreshold::new(*lambda).map(|_| ())
            }
        }
    }

    /// One self-contained repetition under `seed`, sketches included.
    pub fn execute(&self, dataset: &Dataset, seed: u64) -> Result<(JoinOutcome, Option<ResolvedLsh>)> {
        match self {
            Algorithm::CpsJoin(config) => Ok((config.run(dataset, seed)?, None)),
            Algorithm::MinHash(params) => {
                let (outcome, resolved) = params.run(dataset, seed)?;
                Ok((outcome, Some(resolved)))
            }
            Algorithm::AllPairs { lambda } => Ok((exact_join(dataset, *lambda)?, None)),
            Algorithm::Naive { lambda } => Ok((naive_join(dataset, *lambda)?, None)),
        }
    }

    pub fn run(&self, dataset: &Dataset, seed: u64) -> Result<JoinOutcome> {
        self.execute(dataset, seed).map(|(outcome, _)| outcome)
    }

    /// Builds the per-dataset state shared by all repetitions of a run.
    pub fn prepare<'a>(&'a self, dataset: &'a Dataset, master_seed: u64) -> Result<PreparedRun<'a>> {
        let seed = derive_seed(master_seed, SKETCH_STREAM);
        let sketches = match self {
            Algorithm::CpsJoin(config) => {
                config.params.validate()?;
                config.sketch_scheme(seed)?.sketch_all(dataset.records())
            }
            Algorithm::MinHash(params) => match params.sketch_scheme(seed)? {
                Some(scheme) => scheme.sketch_all(dataset.records()),
                None => Vec::new(),
            },
            Algorithm::AllPairs { .. } | Algorithm::Naive { .. } => Vec::new(),
        };
        Ok(PreparedRun { algorithm: self, dataset, sketches })
    }

    fn params_echo(&self, resolved: Option<ResolvedLsh>) -> Result<serde_json::Value> {
        let mut value = serde_json::to_value(self)?;
        if let (Some(r), Some(obj)) = (resolved, value.as_object_mut()) {
            obj.insert("resolved_k".into(), r.k.into());
            obj.insert("resolved_repetitions".into(), r.repetitions.into());
        }
        Ok(value)
    }
}

/// An algorithm bound to a dataset and its sketches.
#[derive(Debug)]
pub struct PreparedRun<'a> {
    algorithm: &'a Algorithm,
    dataset: &'a Dataset,
    sketches: Vec<Sketch>,
}

impl PreparedRun<'_> {
    /// One repetition under `seed`.
    pub fn execute(&self, seed: u64) -> Result<(JoinOutcome, Option<ResolvedLsh>)> {
        let ds = self.dataset;
        match self.algorithm {
            Algorithm::CpsJoin(config) => Ok((config.run_with_sketches(ds, &self.sketches, seed)?, None)),
            Algorithm::MinHash(params) => {
                let (outcome, resolved) = params.run_with_sketches(ds, &self.sketches, seed)?;
                Ok((outcome, Some(resolved)))
            }
            Algorithm::AllPairs { lambda } => Ok((exact_join(ds, *lambda)?, None)),
            Algorithm::Naive { lambda } => Ok((naive_join(ds, *lambda)?, None)),
        }
    }
}

/// `|found ∩ truth| / |truth|`, with 1.0 for an empty truth.
pub fn recall(found: &HashSet<Pair>, truth: &[Pair]) -> f64 {
    if truth.is_empty() {
        return 1.0;
    }
    let hits = truth.iter().filter(|p| found.contains(p)).count();
    hits as f64 / truth.len() as f64
}

#[derive(Debug, Clone, Copy)]
pub struct RecallTarget {
    pub phi: f64,
    pub max_repetitions: u32,
}

/// Accumulates repetition outcomes into a report.
struct Accumulator<'t> {
    truth: Option<&'t [Pair]>,
    found: HashSet<Pair>,
    rows: Vec<RepetitionRow>,
    resolved: Option<ResolvedLsh>,
}

impl<'t> Accumulator<'t> {
    fn new(truth: Option<&'t [Pair]>) -> Self {
        Accumulator { truth, found: HashSet::new(), rows: Vec::new(), resolved: None }
    }

    fn push(
        &mut self,
        rep: u32,
        seed: u64,
        outcome: JoinOutcome,
        resolved: Option<ResolvedLsh>,
    ) -> Option<f64> {
        self.found.extend(outcome.pairs.iter().copied());
        self.resolved = self.resolved.or(resolved);
        let cum_recall = self.truth.map(|t| recall(&self.found, t));
        let m = outcome.metrics;
        self.rows.push(RepetitionRow {
            rep,
            seed,
            pre_candidates: m.pre_candidates,
            candidates: m.candidates,
            results: m.results,
            cum_results: self.found.len() as u64,
            cum_recall,
            max_depth: m.max_depth,
            seconds: m.wall_time,
        });
        cum_recall
    }

    fn finish(
        self,
        algorithm: &Algorithm,
        master_seed: u64,
        phi_target: Option<f64>,
        started: Instant,
        exact_without_truth: bool,
    ) -> Result<RunReport> {
        let final_recall = match self.rows.last() {
            Some(row) => row.cum_recall.or(exact_without_truth.then_some(1.0)),
            None => None,
        };
        let reached_target = match (phi_target, final_recall) {
            (Some(phi), Some(r)) => r >= phi,
            (None, _) => true,
            _ => false,
        };
        Ok(RunReport {
            algorithm: algorithm.name().into(),
            lambda: algorithm.lambda(),
            params: algorithm.params_echo(self.resolved)?,
            master_seed,
            phi_target,
            ground_truth_pairs: self.truth.map(|t| t.len() as u64),
            repetitions_used: self.rows.len() as u32,
            final_results: self.found.len() as u64,
            final_recall,
            reached_target,
            repetitions: self.rows,
            total_seconds: started.elapsed().as_secs_f64(),
        })
    }
}

fn checked_truth<'t>(
    truth: Option<&'t GroundTruth>,
    dataset: &Dataset,
    lambda: f64,
) -> Result<Option<&'t [Pair]>> {
    match truth {
        Some(gt) => {
            gt.check(dataset, lambda)?;
            Ok(Some(&gt.pairs))
        }
        None => Ok(None),
    }
}

/// Runs independent repetitions until the accumulated recall reaches
/// `target.phi` or `target.max_repetitions` have run.
///
/// With `threads > 1` repetitions execute in batches of that size; rows are
/// merged in repetition order and anything after the first repetition that
/// reaches the target is discarded, so the report does not depend on
/// scheduling.
pub fn run_until_recall(
    algorithm: &Algorithm,
    dataset: &Dataset,
    truth: Option<&GroundTruth>,
    target: RecallTarget,
    master_seed: u64,
    threads: usize,
) -> Result<RunReport> {
    if target.max_repetitions == 0 {
        return Err(Error::InvalidParam("max repetitions must be at least 1".into()));
    }
    if !(target.phi > 0.0 && target.phi <= 1.0) {
        return Err(Error::InvalidParam(format!("phi must lie in (0, 1], got {}", target.phi)));
    }
    let truth = checked_truth(truth, dataset, algorithm.lambda())?.ok_or(Error::MissingGroundTruth)?;
    let started = Instant::now();
    let threads = threads.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParam(format!("cannot start {threads} threads: {e}")))?;
    let prepared = algorithm.prepare(dataset, master_seed)?;
    let mut acc = Accumulator::new(Some(truth));
    let mut next = 0u32;
    'outer: while next < target.max_repetitions {
        let batch: Vec<u32> = (next..target.max_repetitions.min(next + threads as u32)).collect();
        next += batch.len() as u32;
        let outcomes: Vec<Result<(JoinOutcome, Option<ResolvedLsh>)>> = if threads == 1 {
            batch.iter().map(|&i| prepared.execute(derive_seed(master_seed, i as u64))).collect()
        } else {
            use rayon::prelude::*;
            pool.install(|| {
                batch.par_iter().map(|&i| prepared.execute(derive_seed(master_seed, i as u64))).collect()
            })
        };
        for (&i, result) in batch.iter().zip(outcomes) {
            let (outcome, resolved) = result?;
            let recall = acc.push(i, derive_seed(master_seed, i as u64), outcome, resolved);
            if recall.is_some_and(|r| r >= target.phi) || algorithm.is_exact() {
                break 'outer;
            }
        }
    }
    acc.finish(algorithm, master_seed, Some(target.phi), started, false)
}

/// A single repetition; recall is reported when ground truth is supplied
/// (and is 1.0 for exact algorithms regardless).
pub fn run_single(
    algorithm: &Algorithm,
    dataset: &Dataset,
    truth: Option<&GroundTruth>,
    master_seed: u64,
) -> Result<RunReport> {
    let truth = checked_truth(truth, dataset, algorithm.lambda())?;
    let started = Instant::now();
    let seed = derive_seed(master_seed, 0);
    let (outcome, resolved) = algorithm.prepare(dataset, master_seed)?.execute(seed)?;
    let mut acc = Accumulator::new(truth);
    acc.push(0, seed, outcome, resolved);
    acc.finish(algorithm, master_seed, None, started, algorithm.is_exact())
}

/// Joins `r` against `s` by running the self-join on their concatenation and
/// keeping only cross pairs, reported as `(index in r, index in s)`.
pub fn rs_join(r: &Dataset, s: &Dataset, algorithm: &Algorithm, seed: u64) -> Result<JoinOutcome> {
    let union = Dataset::concat(r, s);
    let split = r.len() as u32;
    let mut outcome = algorithm.run(&union, seed)?;
    outcome.pairs = outcome
        .pairs
        .into_iter()
        .filter(|&(a, b)| a < split && b >= split)
        .map(|(a, b)| (a, b - split))
        .collect();
    outcome.pairs.sort_unstable();
    outcome.metrics.results = outcome.pairs.len() as u64;
    Ok(outcome)
}
