//! Chosen Path set similarity join.
//!
//! One call performs one independent repetition: starting from all records,
//! each node of an implicit random tree first hands "dense" records to brute
//! force, then splits the remaining records into buckets that agree on a few
//! randomly chosen embedding elements and recurses into every bucket with at
//! least two members. A similar pair is reported whenever it is compared
//! somewhere in the tree and survives sketch filtering and exact verification.
//!
//! Two engines are available:
//!
//! * **reference** (`use_heuristics = false`): the literal procedure. Each node
//!   draws a fresh hash `r` over embedding elements `(i, value)` and a record
//!   joins the bucket of every element with `r < 1/(λt)`. The brute-force rule
//!   keeps an exact count map of elements and removes one record at a time,
//!   rescanning after every removal.
//! * **heuristic** (default): each node samples `Binomial(t, 1/(λt))` distinct
//!   positions and partitions by the MinHash value at each; the brute-force
//!   rule compares every record's sketch with one aggregate sketch sampled from
//!   the node and removes all flagged records in a single batch.
//!
//! The recursion runs on an explicit stack.

use std::collections::HashMap;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{verify_pair, Dataset, SimilarityThreshold};
use crate::embedding::{EmbeddedRecord, EmbeddingScheme, DEFAULT_EMBEDDING_SIZE};
use crate::error::{Error, Result};
use crate::hashing::{RandomSource, TabulationHash};
use crate::sketching::{
    binomial_lower_tail, estimate_similarity, matching_bits, pass_threshold, PassThreshold, Sketch,
    SketchScheme, DEFAULT_DELTA, DEFAULT_SKETCH_WORDS,
};

pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_LIMIT: usize = 250;

/// A verified result pair `(a, b)` with `a < b`.
pub type Pair = (u32, u32);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinParams {
    pub lambda: f64,
    pub epsilon: f64,
    pub limit: usize,
    /// False-negative budget of the sketch filter.
    pub delta: f64,
    pub use_sketch_filter: bool,
    pub use_heuristics: bool,
    pub seed: u64,
}

impl Default for JoinParams {
    fn default() -> Self {
        JoinParams {
            lambda: 0.5,
            epsilon: DEFAULT_EPSILON,
            limit: DEFAULT_LIMIT,
            delta: DEFAULT_DELTA,
            use_sketch_filter: true,
            use_heuristics: true,
            seed: 1,
        }
    }
}

impl JoinParams {
    pub fn with_lambda(lambda: f64) -> Self {
        JoinParams { lambda, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        SimilarityThreshold::new(self.lambda)?;
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::InvalidParam(format!("epsilon must lie in [0, 1), got {}", self.epsilon)));
        }
        if self.limit == 0 {
            return Err(Error::InvalidParam("limit must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParam(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Pairs generated before sketch filtering.
    pub pre_candidates: u64,
    /// Pairs that passed the sketch filter and were verified exactly.
    pub candidates: u64,
    /// Distinct pairs reported.
    pub results: u64,
    pub max_depth: u32,
    /// Wall-clock seconds.
    pub wall_time: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JoinOutcome {
    pub pairs: Vec<Pair>,
    pub metrics: Metrics,
}

/// Records at one node of the recursion tree.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WorkingSet {
    pub members: Vec<u32>,
    pub depth: u32,
}

impl WorkingSet {
    pub fn root(n: usize) -> Self {
        WorkingSet { members: (0..n as u32).collect(), depth: 0 }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Sorts pairs and drops duplicates.
pub fn dedupe_results(mut pairs: Vec<Pair>) -> Vec<Pair> {
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

/// Filter, verify and count pipeline shared by every brute-force routine and
/// by the MinHash LSH join.
#[derive(Debug)]
pub struct CandidatePipeline<'a> {
    dataset: &'a Dataset,
    sketches: &'a [Sketch],
    lambda: SimilarityThreshold,
    filter: Option<PassThreshold>,
    pre_candidates: u64,
    candidates: u64,
    found: Vec<Pair>,
}

impl<'a> CandidatePipeline<'a> {
    /// `filter = None` verifies every generated pair; otherwise `sketches`
    /// must be aligned with the dataset.
    pub fn new(
        dataset: &'a Dataset,
        sketches: &'a [Sketch],
        lambda: SimilarityThreshold,
        filter: Option<PassThreshold>,
    ) -> Self {
        CandidatePipeline {
            dataset,
            sketches,
            lambda,
            filter,
            pre_candidates: 0,
            candidates: 0,
            found: Vec::new(),
        }
    }

    #[inline]
    pub fn consider(&mut self, a: u32, b: u32) {
        self.pre_candidates += 1;
        if let Some(thr) = &self.filter {
            let (sa, sb) = (&self.sketches[a as usize], &self.sketches[b as usize]);
            if matching_bits(sa, sb) < thr.min_matching_bits {
                return;
            }
        }
        self.candidates += 1;
        if verify_pair(self.dataset.record(a), self.dataset.record(b), &self.lambda) {
            self.found.push(if a < b { (a, b) } else { (b, a) });
        }
    }

    /// Every unordered pair of `members`.
    pub fn brute_force_pairs(&mut self, members: &[u32]) {
        for (i, &a) in members.iter().enumerate() {
            for &b in &members[i + 1..] {
                self.consider(a, b);
            }
        }
    }

    /// `x` against every other member.
    pub fn brute_force_point(&mut self, x: u32, members: &[u32]) {
        for &y in members {
            if y != x {
                self.consider(x, y);
            }
        }
    }

    pub fn pre_candidates(&self) -> u64 {
        self.pre_candidates
    }

    pub fn candidates(&self) -> u64 {
        self.candidates
    }

    /// Raw (possibly repeated) verified pairs so far.
    pub fn found(&self) -> &[Pair] {
        &self.found
    }

    pub fn finish(self, max_depth: u32, started: Instant) -> JoinOutcome {
        let pairs = dedupe_results(self.found);
        JoinOutcome {
            metrics: Metrics {
                pre_candidates: self.pre_candidates,
                candidates: self.candidates,
                results: pairs.len() as u64,
                max_depth,
                wall_time: started.elapsed().as_secs_f64(),
            },
            pairs,
        }
    }
}

/// For each member `x`, the brute-force score
/// `(1/(|S|−1)) · Σ_i (count[(i, x_i)] − 1)/t` computed from an element count
/// map. This equals the average Braun-Blanquet similarity of `x` to the other
/// members.
pub fn count_map_scores(members: &[u32], embedded: &[EmbeddedRecord]) -> Vec<f64> {
    let counts = element_counts(members, embedded);
    members.iter().map(|&x| score_from_counts(&embedded[x as usize], &counts, members.len())).collect()
}

#[inline]
fn element_key(pos: usize, value: u32) -> u64 {
    ((pos as u64) << 32) | value as u64
}

fn element_counts(members: &[u32], embedded: &[EmbeddedRecord]) -> HashMap<u64, u32> {
    let mut counts = HashMap::new();
    for &x in members {
        for (i, &v) in embedded[x as usize].values().iter().enumerate() {
            *counts.entry(element_key(i, v)).or_insert(0u32) += 1;
        }
    }
    counts
}

fn score_from_counts(x: &EmbeddedRecord, counts: &HashMap<u64, u32>, set_size: usize) -> f64 {
    if set_size < 2 {
        return 0.0;
    }
    let shared: u64 =
        x.values().iter().enumerate().map(|(i, &v)| (counts[&element_key(i, v)] - 1) as u64).sum();
    shared as f64 / x.size() as f64 / (set_size - 1) as f64
}

/// State of one repetition.
pub struct ChosenPathJoin<'a, 'r> {
    params: JoinParams,
    embedded: &'a [EmbeddedRecord],
    sketches: &'a [Sketch],
    pipeline: CandidatePipeline<'a>,
    rng: &'r mut RandomSource,
    t: usize,
    /// Per-element split probability `min(1, 1/(λt))`.
    split_probability: f64,
    /// `Pr[count <= k]` for the number of positions sampled per split.
    position_count_cdf: Vec<f64>,
    max_depth: u32,
}

impl<'a, 'r> ChosenPathJoin<'a, 'r> {
    pub fn new(
        dataset: &'a Dataset,
        embedded: &'a [EmbeddedRecord],
        sketches: &'a [Sketch],
        params: &JoinParams,
        rng: &'r mut RandomSource,
    ) -> Result<Self> {
        params.validate()?;
        let lambda = SimilarityThreshold::new(params.lambda)?;
        if embedded.len() != dataset.len() {
            return Err(Error::Contract(format!(
                "{} embeddings for {} records",
                embedded.len(),
                dataset.len()
            )));
        }
        let needs_sketches = params.use_sketch_filter || params.use_heuristics;
        if needs_sketches && sketches.len() != dataset.len() {
            return Err(Error::Contract(format!(
                "{} sketches for {} records",
                sketches.len(),
                dataset.len()
            )));
        }
        let t = embedded.first().map_or(DEFAULT_EMBEDDING_SIZE, EmbeddedRecord::size);
        if embedded.iter().any(|e| e.size() != t) {
            return Err(Error::Contract("embeddings of different sizes".into()));
        }
        let bits = sketches.first().map_or(0, Sketch::bits);
        if sketches.iter().any(|s| s.bits() != bits) {
            return Err(Error::Contract("sketches of different lengths".into()));
        }
        let filter = if params.use_sketch_filter && bits > 0 {
            Some(pass_threshold(params.lambda, params.delta, bits as u32)?)
        } else {
            None
        };
        let split_probability = (1.0 / (params.lambda * t as f64)).min(1.0);
        let position_count_cdf = binomial_lower_tail(t as u32, split_probability)[1..].to_vec();
        Ok(ChosenPathJoin {
            params: params.clone(),
            embedded,
            sketches,
            pipeline: CandidatePipeline::new(dataset, sketches, lambda, filter),
            rng,
            t,
            split_probability,
            position_count_cdf,
            max_depth: 0,
        })
    }

    pub fn pipeline(&self) -> &CandidatePipeline<'a> {
        &self.pipeline
    }

    /// Runs the whole tree from `root` and returns the deduplicated outcome.
    pub fn run(mut self, root: WorkingSet, started: Instant) -> JoinOutcome {
        let mut stack = vec![root];
        while let Some(node) = stack.pop() {
            self.max_depth = self.max_depth.max(node.depth);
            let survivors = self.brute_force(node);
            if survivors.len() < 2 {
                continue;
            }
            let mut children = self.split(&survivors);
            children.reverse();
            stack.extend(children);
        }
        self.pipeline.finish(self.max_depth, started)
    }

    /// Brute-force step. Small sets are joined exhaustively and vanish; in
    /// larger sets every record whose average similarity to the rest exceeds
    /// `(1−ε)λ` is compared against the set and removed. Returns the survivors.
    pub fn brute_force(&mut self, set: WorkingSet) -> WorkingSet {
        if set.len() <= self.params.limit {
            self.pipeline.brute_force_pairs(&set.members);
            return WorkingSet { members: Vec::new(), depth: set.depth };
        }
        if self.params.use_heuristics {
            self.brute_force_sketched(set)
        } else {
            self.brute_force_exact(set)
        }
    }

    fn cutoff(&self) -> f64 {
        (1.0 - self.params.epsilon) * self.params.lambda
    }

    fn brute_force_exact(&mut self, set: WorkingSet) -> WorkingSet {
        let WorkingSet { mut members, depth } = set;
        let mut counts = element_counts(&members, self.embedded);
        let cutoff = self.cutoff();
        loop {
            if members.len() <= self.params.limit {
                self.pipeline.brute_force_pairs(&members);
                return WorkingSet { members: Vec::new(), depth };
            }
            let n = members.len();
            let flagged = members
                .iter()
                .position(|&x| score_from_counts(&self.embedded[x as usize], &counts, n) > cutoff);
            let Some(idx) = flagged else {
                return WorkingSet { members, depth };
            };
            let x = members[idx];
            self.pipeline.brute_force_point(x, &members);
            members.remove(idx);
            for (i, &v) in self.embedded[x as usize].values().iter().enumerate() {
                *counts.get_mut(&element_key(i, v)).expect("element was counted") -= 1;
            }
        }
    }

    fn brute_force_sketched(&mut self, set: WorkingSet) -> WorkingSet {
        let WorkingSet { members, depth } = set;
        let n = members.len();
        let bits = self.sketches[0].bits();
        let mut aggregate = vec![0u64; bits / 64];
        for i in 0..bits {
            let sample = members[self.rng.random_range(0..n)];
            aggregate[i / 64] |= self.sketches[sample as usize].bit(i) << (i % 64);
        }
        let aggregate = Sketch::from_words(aggregate);
        let cutoff = self.cutoff();
        let (flagged, mut survivors): (Vec<u32>, Vec<u32>) = members
            .into_iter()
            .partition(|&x| estimate_similarity(&self.sketches[x as usize], &aggregate) > cutoff);
        // Sequential removal: each flagged record meets the survivors and the
        // flagged records not yet removed.
        for (k, &x) in flagged.iter().enumerate() {
            for &y in survivors.iter().chain(&flagged[k + 1..]) {
                self.pipeline.consider(x, y);
            }
        }
        survivors.shrink_to_fit();
        WorkingSet { members: survivors, depth }
    }

    /// Splitting step: buckets of at least two records, one level deeper.
    pub fn split(&mut self, set: &WorkingSet) -> Vec<WorkingSet> {
        let children = if self.params.use_heuristics {
            self.split_by_positions(set)
        } else {
            self.split_by_elements(set)
        };
        // A child equal to its parent whose members all share one embedding can
        // never be separated by further splitting; finish it here.
        if children.iter().any(|c| c.len() == set.len()) && self.all_embeddings_equal(&set.members) {
            self.pipeline.brute_force_pairs(&set.members);
            return Vec::new();
        }
        children
    }

    fn all_embeddings_equal(&self, members: &[u32]) -> bool {
        let first = &self.embedded[members[0] as usize];
        members.iter().all(|&x| self.embedded[x as usize] == *first)
    }

    fn sample_position_count(&mut self) -> usize {
        let u = self.rng.unit();
        self.position_count_cdf.iter().position(|&c| u < c).unwrap_or(self.t)
    }

    fn split_by_positions(&mut self, set: &WorkingSet) -> Vec<WorkingSet> {
        let count = self.sample_position_count();
        let positions = rand::seq::index::sample(&mut *self.rng, self.t, count);
        let mut children = Vec::new();
        for pos in positions.iter() {
            let mut index: HashMap<u32, usize> = HashMap::new();
            let mut buckets: Vec<Vec<u32>> = Vec::new();
            for &x in &set.members {
                let v = self.embedded[x as usize].values()[pos];
                let slot = *index.entry(v).or_insert_with(|| {
                    buckets.push(Vec::new());
                    buckets.len() - 1
                });
                buckets[slot].push(x);
            }
            children.extend(
                buckets
                    .into_iter()
                    .filter(|b| b.len() >= 2)
                    .map(|members| WorkingSet { members, depth: set.depth + 1 }),
            );
        }
        children
    }

    fn split_by_elements(&mut self, set: &WorkingSet) -> Vec<WorkingSet> {
        let r = TabulationHash::from_rng(&mut *self.rng);
        let salts: Vec<u64> = (0..self.t).map(|_| self.rng.random()).collect();
        // r(e) < p  ⇔  top 53 bits of the hash < p·2^53
        let cut = (self.split_probability * (1u64 << 53) as f64) as u64;
        let always = self.split_probability >= 1.0;
        let mut index: HashMap<u64, usize> = HashMap::new();
        let mut buckets: Vec<Vec<u32>> = Vec::new();
        for &x in &set.members {
            for (i, &v) in self.embedded[x as usize].values().iter().enumerate() {
                if !always && ((r.hash(v) ^ salts[i]) >> 11) >= cut {
                    continue;
                }
                let slot = *index.entry(element_key(i, v)).or_insert_with(|| {
                    buckets.push(Vec::new());
                    buckets.len() - 1
                });
                buckets[slot].push(x);
            }
        }
        buckets
            .into_iter()
            .filter(|b| b.len() >= 2)
            .map(|members| WorkingSet { members, depth: set.depth + 1 })
            .collect()
    }
}

/// One repetition of the join over precomputed embeddings and sketches.
///
/// `sketches` may be empty when both the sketch filter and the heuristics are
/// disabled.
pub fn cpsjoin(
    dataset: &Dataset,
    embedded: &[EmbeddedRecord],
    sketches: &[Sketch],
    params: &JoinParams,
    rng: &mut RandomSource,
) -> Result<JoinOutcome> {
    let started = Instant::now();
    let join = ChosenPathJoin::new(dataset, embedded, sketches, params, rng)?;
    if dataset.is_empty() {
        return Ok(JoinOutcome::default());
    }
    Ok(join.run(WorkingSet::root(dataset.len()), started))
}

/// Join parameters plus the sizes of the embedding and sketches that a
/// repetition draws from its seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpsJoinConfig {
    #[serde(flatten)]
    pub params: JoinParams,
    /// Embedding size `t`.
    pub embedding_size: usize,
    /// Sketch length in 64-bit words.
    pub sketch_words: usize,
}

impl Default for CpsJoinConfig {
    fn default() -> Self {
        CpsJoinConfig {
            params: JoinParams::default(),
            embedding_size: DEFAULT_EMBEDDING_SIZE,
            sketch_words: DEFAULT_SKETCH_WORDS,
        }
    }
}

impl CpsJoinConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        CpsJoinConfig { params: JoinParams::with_lambda(lambda), ..Default::default() }
    }

    /// Draws fresh schemes from `seed`, embeds and sketches the dataset and
    /// runs one repetition. The reported wall time covers all of it.
    pub fn run(&self, dataset: &Dataset, seed: u64) -> Result<JoinOutcome> {
        let started = Instant::now();
        let sketches = self.sketch_scheme(seed)?.sketch_all(dataset.records());
        let mut outcome = self.run_with_sketches(dataset, &sketches, seed)?;
        outcome.metrics.wall_time = started.elapsed().as_secs_f64();
        Ok(outcome)
    }

    /// The sketch scheme [`CpsJoinConfig::run`] draws for `seed`.
    pub fn sketch_scheme(&self, seed: u64) -> Result<SketchScheme> {
        if self.sketch_words == 0 {
            return Err(Error::InvalidParam("sketch length must be positive".into()));
        }
        Ok(SketchScheme::new(self.sketch_words, &mut RandomSource::new(seed).fork(2)))
    }

    /// One repetition over sketches built once for the dataset; the embedding
    /// and all splitting randomness are drawn from `seed`.
    pub fn run_with_sketches(
        &self,
        dataset: &Dataset,
        sketches: &[Sketch],
        seed: u64,
    ) -> Result<JoinOutcome> {
        self.params.validate()?;
        if self.embedding_size == 0 {
            return Err(Error::InvalidParam("embedding size must be positive".into()));
        }
        let started = Instant::now();
        let mut root = RandomSource::new(seed);
        let embedding = EmbeddingScheme::new(self.embedding_size, &mut root.fork(1));
        let mut rng = root.fork(3);
        let embedded = embedding.embed_all(dataset.records());
        let mut outcome = cpsjoin(dataset, &embedded, sketches, &self.params, &mut rng)?;
        outcome.metrics.wall_time = started.elapsed().as_secs_f64();
        Ok(outcome)
    }
}
