//! Fixed benchmark inputs shared by the benches in `benches/`.

use simjoin_core::synthetic::{generate, SyntheticConfig};
use simjoin_core::Dataset;

/// Short records over a large uniform vocabulary with `n / 20` planted pairs.
pub fn uniform_dataset(n: usize) -> Dataset {
    generate(&SyntheticConfig::planted_uniform(n, n / 20, 0.5, 0xbe7c)).expect("valid config")
}

/// Long records (about 100 tokens) over a Zipf vocabulary with `n / 20`
/// planted pairs.
pub fn zipf_dataset(n: usize) -> Dataset {
    generate(&SyntheticConfig::planted_zipf(n, n / 20, 0.5, 100, 0xbe7d)).expect("valid config")
}
