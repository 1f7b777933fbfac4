//! Reference joins: MinHash LSH, the exact prefix-filter join and a quadratic
//! oracle.

mod exact;
mod lsh;

pub use exact::{exact_join, naive_join};
pub use lsh::{
    derive_repetitions, minhash_lsh_join, split_costs, tune_k, tune_k_with, LshParams, ResolvedLsh,
    SplitCostModel, UnitCost, MAX_K, TUNE_K_RANGE,
};
