//! MinHash LSH join: `L` repetitions, each bucketing records by a
//! concatenation of `k` fresh MinHash values and brute-forcing every bucket
//! through the shared filter/verify pipeline.

use std::collections::HashMap;
use std::ops::RangeInclusive;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cpsjoin::{CandidatePipeline, JoinOutcome};
use crate::dataset::{Dataset, SimilarityThreshold};
use crate::error::{Error, Result};
use crate::hashing::{MinHashFn, RandomSource};
use crate::sketching::{pass_threshold, Sketch, SketchScheme, DEFAULT_DELTA, DEFAULT_SKETCH_WORDS};

pub const MAX_K: usize = 32;
pub const TUNE_K_RANGE: RangeInclusive<usize> = 2..=10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LshParams {
    /// Number of concatenated MinHash values per bucket key; 0 tunes it.
    pub k: usize,
    /// Number of repetitions `L`; 0 derives it from `phi_target`.
    pub repetitions: usize,
    pub phi_target: f64,
    pub lambda: f64,
    pub seed: u64,
    pub use_sketch_filter: bool,
    pub delta: f64,
    pub sketch_words: usize,
}

impl Default for LshParams {
    fn default() -> Self {
        LshParams {
            k: 0,
            repetitions: 1,
            phi_target: 0.9,
            lambda: 0.5,
            seed: 1,
            use_sketch_filter: true,
            delta: DEFAULT_DELTA,
            sketch_words: DEFAULT_SKETCH_WORDS,
        }
    }
}

impl LshParams {
    pub fn validate(&self) -> Result<()> {
        SimilarityThreshold::new(self.lambda)?;
        if self.k > MAX_K {
            return Err(Error::InvalidParam(format!("k must be at most {MAX_K}, got {}", self.k)));
        }
        if self.repetitions == 0 && !(self.phi_target > 0.0 && self.phi_target < 1.0) {
            return Err(Error::InvalidParam(format!("phi must lie in (0, 1), got {}", self.phi_target)));
        }
        if self.use_sketch_filter && !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParam(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.sketch_words == 0 {
            return Err(Error::InvalidParam("sketch length must be positive".into()));
        }
        Ok(())
    }

    /// Draws a sketch scheme from `seed`, sketches the dataset and runs the join.
    pub fn run(&self, dataset: &Dataset, seed: u64) -> Result<(JoinOutcome, ResolvedLsh)> {
        self.validate()?;
        let started = Instant::now();
        let sketches = match self.sketch_scheme(seed)? {
            Some(scheme) => scheme.sketch_all(dataset.records()),
            None => Vec::new(),
        };
        let (mut outcome, resolved) = self.run_with_sketches(dataset, &sketches, seed)?;
        outcome.metrics.wall_time = started.elapsed().as_secs_f64();
        Ok((outcome, resolved))
    }

    /// The sketch scheme [`LshParams::run`] draws for `seed`, if filtering.
    pub fn sketch_scheme(&self, seed: u64) -> Result<Option<SketchScheme>> {
        self.validate()?;
        Ok(self
            .use_sketch_filter
            .then(|| SketchScheme::new(self.sketch_words, &mut RandomSource::new(seed).fork(2))))
    }

    /// Runs the join over sketches built once for the dataset; MinHash
    /// functions and `k` tuning draw from `seed`.
    pub fn run_with_sketches(
        &self,
        dataset: &Dataset,
        sketches: &[Sketch],
        seed: u64,
    ) -> Result<(JoinOutcome, ResolvedLsh)> {
        let mut rng = RandomSource::new(seed).fork(3);
        minhash_lsh_join_resolved(dataset, self, sketches, &mut rng)
    }
}

/// The `k` and `L` actually used by a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedLsh {
    pub k: usize,
    pub repetitions: usize,
}

/// `L = ⌈ln(1/(1−φ)) / λ^k⌉`, at least 1.
pub fn derive_repetitions(lambda: f64, k: usize, phi: f64) -> Result<usize> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidParam(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    if !(phi > 0.0 && phi < 1.0) {
        return Err(Error::InvalidParam(format!("phi must lie in (0, 1), got {phi}")));
    }
    if k == 0 {
        return Err(Error::InvalidParam("k must be at least 1".into()));
    }
    let reps = -(-phi).ln_1p() / lambda.powi(k as i32);
    Ok((reps.ceil() as usize).max(1))
}

/// Estimated running time of one splitting pass given its bucket sizes.
pub trait SplitCostModel {
    fn cost(&self, records: usize, k: usize, bucket_sizes: &[usize]) -> f64;
}

/// One unit per MinHash lookup (`n·k`) plus one per comparison
/// (`Σ |B|(|B|−1)/2`).
#[derive(Debug, Clone, Copy, Default)]
pub struct UnitCost;

impl SplitCostModel for UnitCost {
    fn cost(&self, records: usize, k: usize, bucket_sizes: &[usize]) -> f64 {
        let comparisons: usize = bucket_sizes.iter().map(|&b| b * b.saturating_sub(1) / 2).sum();
        (records * k + comparisons) as f64
    }
}

fn signatures(dataset: &Dataset, hashers: &[MinHashFn]) -> Vec<u32> {
    let mut sig = Vec::with_capacity(dataset.len() * hashers.len());
    for x in dataset.records() {
        sig.extend(hashers.iter().map(|h| h.minhash(x)));
    }
    sig
}

fn bucket_by_prefix(sig: &[u32], width: usize, k: usize) -> Vec<Vec<u32>> {
    let mut index: HashMap<&[u32], usize> = HashMap::new();
    let mut buckets: Vec<Vec<u32>> = Vec::new();
    for (i, row) in sig.chunks_exact(width).enumerate() {
        let slot = *index.entry(&row[..k]).or_insert_with(|| {
            buckets.push(Vec::new());
            buckets.len() - 1
        });
        buckets[slot].push(i as u32);
    }
    buckets
}

/// Estimated cost of every `k` in `2..=hashers.len()`, splitting on the first
/// `k` of the given MinHash functions.
pub fn split_costs<M: SplitCostModel + ?Sized>(
    dataset: &Dataset,
    hashers: &[MinHashFn],
    model: &M,
) -> Vec<(usize, f64)> {
    let sig = signatures(dataset, hashers);
    (2..=hashers.len())
        .map(|k| {
            let sizes: Vec<usize> = if dataset.is_empty() {
                Vec::new()
            } else {
                bucket_by_prefix(&sig, hashers.len(), k).iter().map(Vec::len).collect()
            };
            (k, model.cost(dataset.len(), k, &sizes))
        })
        .collect()
}

/// Picks the `k` in 2..=10 with the lowest unit-cost estimate; ties go to the
/// smaller `k`.
pub fn tune_k(dataset: &Dataset, rng: &mut RandomSource) -> usize {
    tune_k_with(dataset, rng, &UnitCost)
}

pub fn tune_k_with<M: SplitCostModel + ?Sized>(
    dataset: &Dataset,
    rng: &mut RandomSource,
    model: &M,
) -> usize {
    let hashers: Vec<MinHashFn> = (0..*TUNE_K_RANGE.end()).map(|_| MinHashFn::from_rng(rng)).collect();
    let mut best = (*TUNE_K_RANGE.start(), f64::INFINITY);
    for (k, cost) in split_costs(dataset, &hashers, model) {
        if cost < best.1 {
            best = (k, cost);
        }
    }
    best.0
}

/// Runs `L` repetitions and merges their results. `sketches` must be aligned
/// with the dataset when the sketch filter is enabled.
pub fn minhash_lsh_join(
    dataset: &Dataset,
    params: &LshParams,
    sketches: &[Sketch],
    rng: &mut RandomSource,
) -> Result<JoinOutcome> {
    minhash_lsh_join_resolved(dataset, params, sketches, rng).map(|(outcome, _)| outcome)
}

fn minhash_lsh_join_resolved(
    dataset: &Dataset,
    params: &LshParams,
    sketches: &[Sketch],
    rng: &mut RandomSource,
) -> Result<(JoinOutcome, ResolvedLsh)> {
    params.validate()?;
    let started = Instant::now();
    let lambda = SimilarityThreshold::new(params.lambda)?;
    let filter = if params.use_sketch_filter {
        if sketches.len() != dataset.len() {
            return Err(Error::Contract(format!(
                "{} sketches for {} records",
                sketches.len(),
                dataset.len()
            )));
        }
        match sketches.first() {
            Some(s) => Some(pass_threshold(params.lambda, params.delta, s.bits() as u32)?),
            None => None,
        }
    } else {
        None
    };
    if dataset.is_empty() {
        let k = params.k.max(1);
        let repetitions = match params.repetitions {
            0 => derive_repetitions(params.lambda, k, params.phi_target)?,
            l => l,
        };
        return Ok((JoinOutcome::default(), ResolvedLsh { k, repetitions }));
    }
    let k = match params.k {
        0 => tune_k(dataset, rng),
        k => k,
    };
    let repetitions = match params.repetitions {
        0 => derive_repetitions(params.lambda, k, params.phi_target)?,
        l => l,
    };

    let mut pipeline = CandidatePipeline::new(dataset, sketches, lambda, filter);
    for _ in 0..repetitions {
        let hashers: Vec<MinHashFn> = (0..k).map(|_| MinHashFn::from_rng(rng)).collect();
        let sig = signatures(dataset, &hashers);
        for bucket in bucket_by_prefix(&sig, k, k) {
            if bucket.len() >= 2 {
                pipeline.brute_force_pairs(&bucket);
            }
        }
    }
    Ok((pipeline.finish(0, started), ResolvedLsh { k, repetitions }))
}
