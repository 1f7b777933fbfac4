//! Synthetic datasets with planted similar pairs.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Zipf};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::hashing::RandomSource;

/// How background tokens are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TokenDistribution {
    Uniform,
    /// Token `k` (1-based rank) has probability proportional to `k^-exponent`.
    Zipf {
        exponent: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub records: usize,
    /// Number of planted pairs; they take `2·planted` of the records.
    pub planted: usize,
    /// Planted pairs have Jaccard similarity in `[min_similarity, max_similarity]`.
    pub min_similarity: f64,
    pub max_similarity: f64,
    pub min_size: usize,
    pub max_size: usize,
    pub universe: u32,
    pub tokens: TokenDistribution,
    pub seed: u64,
}

impl SyntheticConfig {
    /// Uniform tokens over a large universe: almost no accidental similarity.
    pub fn planted_uniform(records: usize, planted: usize, lambda: f64, seed: u64) -> Self {
        SyntheticConfig {
            records,
            planted,
            min_similarity: lambda,
            max_similarity: (lambda + 0.2).min(1.0),
            min_size: 16,
            max_size: 24,
            universe: 1 << 22,
            tokens: TokenDistribution::Uniform,
            seed,
        }
    }

    /// Long records over a Zipf-distributed vocabulary.
    pub fn planted_zipf(records: usize, planted: usize, lambda: f64, avg_size: usize, seed: u64) -> Self {
        SyntheticConfig {
            records,
            planted,
            min_similarity: lambda,
            max_similarity: (lambda + 0.2).min(1.0),
            min_size: avg_size / 2,
            max_size: avg_size + avg_size / 2,
            universe: 100_000,
            tokens: TokenDistribution::Zipf { exponent: 1.0 },
            seed,
        }
    }
}

struct TokenSampler {
    universe: u32,
    zipf: Option<Zipf<f64>>,
}

impl TokenSampler {
    fn sample(&self, rng: &mut RandomSource) -> u32 {
        match &self.zipf {
            Some(z) => z.sample(rng) as u32 - 1,
            None => rng.random_range(0..self.universe),
        }
    }

    /// `size` distinct tokens.
    fn record(&self, rng: &mut RandomSource, size: usize) -> Vec<u32> {
        let mut tokens = Vec::with_capacity(size);
        while tokens.len() < size {
            let t = self.sample(rng);
            if !tokens.contains(&t) {
                tokens.push(t);
            }
        }
        tokens
    }
}

/// Generates the dataset. Planted partners share `o` of their `s` tokens,
/// with `o` drawn uniformly among overlaps whose Jaccard `o/(2s−o)` lies in
/// the requested interval.
pub fn generate(config: &SyntheticConfig) -> Result<Dataset> {
    let c = config;
    if c.min_size < 2 || c.min_size > c.max_size {
        return Err(Error::InvalidParam("record sizes must satisfy 2 <= min <= max".into()));
    }
    if 2 * c.planted > c.records {
        return Err(Error::InvalidParam("planted pairs need two records each".into()));
    }
    if !(0.0 < c.min_similarity && c.min_similarity <= c.max_similarity && c.max_similarity <= 1.0) {
        return Err(Error::InvalidParam("similarity range must satisfy 0 < min <= max <= 1".into()));
    }
    if (c.max_size as u64) * 4 > c.universe as u64 {
        return Err(Error::InvalidParam("universe too small for the record sizes".into()));
    }
    let zipf = match c.tokens {
        TokenDistribution::Uniform => None,
        TokenDistribution::Zipf { exponent } => Some(
            Zipf::new(c.universe as f64, exponent).map_err(|e| Error::InvalidParam(format!("zipf: {e}")))?,
        ),
    };
    let sampler = TokenSampler { universe: c.universe, zipf };
    let mut rng = RandomSource::new(c.seed);
    let mut lists: Vec<Vec<u32>> = Vec::with_capacity(c.records);

    for _ in 0..c.planted {
        let (size, shared) = loop {
            let s = rng.random_range(c.min_size..=c.max_size);
            let overlaps: Vec<usize> = (1..=s)
                .filter(|&o| {
                    let j = o as f64 / (2 * s - o) as f64;
                    j >= c.min_similarity && j <= c.max_similarity
                })
                .collect();
            if let Some(&o) = overlaps.choose(&mut rng) {
                break (s, o);
            }
        };
        let tokens = sampler.record(&mut rng, 2 * size - shared);
        let x: Vec<u32> = tokens[..size].to_vec();
        let y: Vec<u32> = tokens[size - shared..].to_vec();
        lists.push(x);
        lists.push(y);
    }
    while lists.len() < c.records {
        let s = rng.random_range(c.min_size..=c.max_size);
        lists.push(sampler.record(&mut rng, s));
    }
    lists.shuffle(&mut rng);
    Ok(Dataset::from_token_lists(lists))
}
