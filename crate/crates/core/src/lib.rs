//! Set similarity joins under Jaccard similarity.
//!
//! * [`cpsjoin`]: the randomized Chosen Path join. Each repetition reports
//!   every pair with `J ≥ λ` with some probability φ; repetitions boost recall.
//! * [`baselines`]: MinHash LSH, the exact prefix-filter join (AllPairs) and a
//!   quadratic oracle.
//! * [`harness`]: ground truth files, run-until-recall, reports.
//!
//! Records are preprocessed sets of `u32` tokens ([`dataset`]); randomness
//! comes from seeded tabulation hashing ([`hashing`]), which backs both the
//! MinHash embedding ([`embedding`]) and 1-bit minwise sketches
//! ([`sketching`]).

pub mod baselines;
pub mod cpsjoin;
pub mod dataset;
pub mod embedding;
pub mod error;
pub mod harness;
pub mod hashing;
pub mod sketching;
pub mod synthetic;

pub use baselines::{derive_repetitions, exact_join, minhash_lsh_join, naive_join, tune_k, LshParams};
pub use cpsjoin::{cpsjoin, CpsJoinConfig, JoinOutcome, JoinParams, Metrics, Pair};
pub use dataset::{jaccard, verify_pair, Dataset, Record, SimilarityThreshold};
pub use embedding::{bb_similarity, EmbeddedRecord, EmbeddingScheme};
pub use error::{Error, Result};
pub use harness::{
    rs_join, run_single, run_until_recall, Algorithm, GroundTruth, PreparedRun, RecallTarget, RunReport,
};
pub use hashing::{derive_seed, RandomSource};
pub use sketching::{pass_threshold, PassThreshold, Sketch, SketchScheme};
