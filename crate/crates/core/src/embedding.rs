//! Embedding of token sets into fixed-size sets of `t` MinHash values.
//!
//! Position `i` of an [`EmbeddedRecord`] holds `h_i(x)`, standing for the
//! element `(i, h_i(x))`. Two embeddings intersect wherever their values agree,
//! so their Braun-Blanquet similarity is the fraction of agreeing positions and
//! its expectation over the scheme equals the Jaccard similarity of the sets.

use rand::RngCore;

use crate::dataset::Record;
use crate::hashing::MinHashFn;

pub const DEFAULT_EMBEDDING_SIZE: usize = 128;

#[derive(Debug, Clone)]
pub struct EmbeddingScheme {
    hashers: Vec<MinHashFn>,
}

impl EmbeddingScheme {
    /// Draws `t` independent MinHash functions. Panics if `t == 0`.
    pub fn new<R: RngCore + ?Sized>(t: usize, rng: &mut R) -> Self {
        assert!(t >= 1, "embedding size must be at least 1");
        EmbeddingScheme { hashers: (0..t).map(|_| MinHashFn::from_rng(rng)).collect() }
    }

    pub fn size(&self) -> usize {
        self.hashers.len()
    }

    pub fn embed(&self, x: &Record) -> EmbeddedRecord {
        EmbeddedRecord { values: self.hashers.iter().map(|h| h.minhash(x)).collect() }
    }

    /// Embeds every record. Iterates hasher-major so each hasher's tables stay
    /// in cache while all records are scanned.
    pub fn embed_all(&self, records: &[Record]) -> Vec<EmbeddedRecord> {
        let mut values: Vec<Vec<u32>> = records.iter().map(|_| Vec::with_capacity(self.size())).collect();
        for h in &self.hashers {
            for (x, out) in records.iter().zip(values.iter_mut()) {
                out.push(h.minhash(x));
            }
        }
        values.into_iter().map(|values| EmbeddedRecord { values }).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EmbeddedRecord {
    values: Vec<u32>,
}

impl EmbeddedRecord {
    pub fn from_values(values: Vec<u32>) -> Self {
        assert!(!values.is_empty(), "embedding must have at least one position");
        EmbeddedRecord { values }
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn size(&self) -> usize {
        self.values.len()
    }

    /// Number of positions where both embeddings hold the same value.
    pub fn intersection_size(&self, other: &EmbeddedRecord) -> usize {
        assert_eq!(self.size(), other.size(), "embeddings of different sizes");
        self.values.iter().zip(&other.values).filter(|(a, b)| a == b).count()
    }
}

/// `|f(x) ∩ f(y)| / t`. Panics when the embeddings differ in size.
pub fn bb_similarity(a: &EmbeddedRecord, b: &EmbeddedRecord) -> f64 {
    a.intersection_size(b) as f64 / a.size() as f64
}
