//! 1-bit minwise sketches and the calibrated pass threshold used to discard
//! candidate pairs before exact verification.
//!
//! Bit `i` of a sketch is `g_i(h_i(x))` for an independent MinHash `h_i` and a
//! 1-bit hash `g_i`. Two sketches agree on a bit with probability `(1 + J)/2`,
//! giving the estimator `Ĵ = 2·(matching / bits) − 1`.

use rand::RngCore;

use crate::dataset::Record;
use crate::error::{Error, Result};
use crate::hashing::{BitHashFn, MinHashFn};

pub const DEFAULT_SKETCH_WORDS: usize = 8;
pub const DEFAULT_DELTA: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct SketchScheme {
    words: usize,
    minhashers: Vec<MinHashFn>,
    bithashers: Vec<BitHashFn>,
}

impl SketchScheme {
    /// Draws `64·words` MinHash and 1-bit hash functions. Panics if `words == 0`.
    pub fn new<R: RngCore + ?Sized>(words: usize, rng: &mut R) -> Self {
        assert!(words >= 1, "sketch length must be at least one word");
        let bits = 64 * words;
        let minhashers = (0..bits).map(|_| MinHashFn::from_rng(rng)).collect();
        let bithashers = (0..bits).map(|_| BitHashFn::from_rng(rng)).collect();
        SketchScheme { words, minhashers, bithashers }
    }

    pub fn words(&self) -> usize {
        self.words
    }

    pub fn bits(&self) -> usize {
        64 * self.words
    }

    pub fn sketch(&self, x: &Record) -> Sketch {
        let mut words = vec![0u64; self.words];
        for (i, (h, g)) in self.minhashers.iter().zip(&self.bithashers).enumerate() {
            words[i / 64] |= g.bit(h.minhash(x)) << (i % 64);
        }
        Sketch { words }
    }

    /// Sketches every record, hasher-major like [`EmbeddingScheme::embed_all`].
    ///
    /// [`EmbeddingScheme::embed_all`]: crate::embedding::EmbeddingScheme::embed_all
    pub fn sketch_all(&self, records: &[Record]) -> Vec<Sketch> {
        let mut words = vec![vec![0u64; self.words]; records.len()];
        for (i, (h, g)) in self.minhashers.iter().zip(&self.bithashers).enumerate() {
            for (x, out) in records.iter().zip(words.iter_mut()) {
                out[i / 64] |= g.bit(h.minhash(x)) << (i % 64);
            }
        }
        words.into_iter().map(|words| Sketch { words }).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sketch {
    words: Vec<u64>,
}

impl Sketch {
    pub fn from_words(words: Vec<u64>) -> Self {
        Sketch { words }
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn bits(&self) -> usize {
        64 * self.words.len()
    }

    #[inline]
    pub fn bit(&self, i: usize) -> u64 {
        (self.words[i / 64] >> (i % 64)) & 1
    }
}

/// Number of agreeing bits. Panics when the sketch lengths differ.
#[inline]
pub fn matching_bits(a: &Sketch, b: &Sketch) -> u32 {
    assert_eq!(a.words.len(), b.words.len(), "sketches of different lengths");
    let differing: u32 = a.words.iter().zip(&b.words).map(|(x, y)| (x ^ y).count_ones()).sum();
    a.bits() as u32 - differing
}

/// `max(0, 2·matching/bits − 1)`.
pub fn estimate_similarity(a: &Sketch, b: &Sketch) -> f64 {
    estimate_from_matches(matching_bits(a, b), a.bits())
}

pub fn estimate_from_matches(matching: u32, bits: usize) -> f64 {
    (2.0 * matching as f64 / bits as f64 - 1.0).max(0.0)
}

/// Minimum number of matching bits a pair needs to pass the sketch filter.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PassThreshold {
    pub min_matching_bits: u32,
    pub lambda: f64,
    pub delta: f64,
    pub bits: u32,
}

impl PassThreshold {
    /// A threshold that lets every pair through.
    pub fn disabled(bits: u32) -> Self {
        PassThreshold { min_matching_bits: 0, lambda: 0.0, delta: 1.0, bits }
    }
}

/// `ln C(n, k)` for every `k` in `0..=n`, by cumulative log sums.
fn ln_binomial_coefficients(n: u32) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut acc = 0.0f64;
    out.push(acc);
    for k in 1..=n {
        acc += ((n - k + 1) as f64).ln() - (k as f64).ln();
        out.push(acc);
    }
    out
}

/// `Pr[X < m]` for `m` in `0..=n+1` where `X ~ Binomial(n, p)`.
pub fn binomial_lower_tail(n: u32, p: f64) -> Vec<f64> {
    let ln_c = ln_binomial_coefficients(n);
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let mut tail = Vec::with_capacity(n as usize + 2);
    let mut acc = 0.0f64;
    tail.push(0.0);
    for k in 0..=n {
        let ln_pmf = ln_c[k as usize] + k as f64 * lp + (n - k) as f64 * lq;
        acc += ln_pmf.exp();
        tail.push(acc.min(1.0));
    }
    tail
}

/// Largest `m` with `Pr[X < m] <= delta` for `X ~ Binomial(bits, (1+λ)/2)`:
/// a pair at similarity exactly λ is rejected with probability at most δ.
pub fn pass_threshold(lambda: f64, delta: f64, bits: u32) -> Result<PassThreshold> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidParam(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParam(format!("delta must lie in (0, 1), got {delta}")));
    }
    if bits == 0 {
        return Err(Error::InvalidParam("sketch must have at least one bit".into()));
    }
    let tail = binomial_lower_tail(bits, (1.0 + lambda) / 2.0);
    let m = (0..=bits).rev().find(|&m| tail[m as usize] <= delta).unwrap_or(0);
    Ok(PassThreshold { min_matching_bits: m, lambda, delta, bits })
}

#[inline]
pub fn sketch_filter(a: &Sketch, b: &Sketch, thr: &PassThreshold) -> bool {
    matching_bits(a, b) >= thr.min_matching_bits
}
