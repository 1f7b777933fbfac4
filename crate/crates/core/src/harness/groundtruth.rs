//! Persisted exact join results.
//!
//! Binary layout (little endian):
//!
//! | bytes | content                                   |
//! |-------|-------------------------------------------|
//! | 4     | magic `SJGT`                              |
//! | 4     | format version (`1`)                      |
//! | 8     | λ as IEEE-754 binary64                    |
//! | 32    | dataset fingerprint (SHA-256)             |
//! | 8     | pair count `m`                            |
//! | 8·m   | pairs as two `u32`, sorted, `a < b`       |
//! | 32    | SHA-256 of all preceding bytes            |
//!
//! A JSON sidecar (`<file>.json`) repeats the header for humans.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::exact_join;
use crate::cpsjoin::Pair;
use crate::dataset::Dataset;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SJGT";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 32 + 8;

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub lambda: f64,
    /// Hex SHA-256 fingerprint of the dataset the pairs belong to.
    pub fingerprint: String,
    pub pairs: Vec<Pair>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    format: String,
    version: u32,
    lambda: f64,
    fingerprint: String,
    pairs: u64,
}

impl GroundTruth {
    pub fn compute(dataset: &Dataset, lambda: f64) -> Result<Self> {
        Ok(GroundTruth {
            lambda,
            fingerprint: dataset.fingerprint(),
            pairs: exact_join(dataset, lambda)?.pairs,
        })
    }

    /// Fails unless this ground truth was computed for `dataset` at `lambda`.
    pub fn check(&self, dataset: &Dataset, lambda: f64) -> Result<()> {
        if self.lambda.to_bits() != lambda.to_bits() {
            return Err(Error::GroundTruthMismatch(format!(
                "computed for lambda {}, requested {}",
                self.lambda, lambda
            )));
        }
        let fp = dataset.fingerprint();
        if self.fingerprint != fp {
            return Err(Error::GroundTruthMismatch(format!(
                "dataset fingerprint {} differs from {}",
                fp, self.fingerprint
            )));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let fp = hex::decode(&self.fingerprint)
            .ok()
            .filter(|b| b.len() == 32)
            .ok_or_else(|| Error::GroundTruthFormat("fingerprint must be 32 hex bytes".into()))?;
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.pairs.len() + 32);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.lambda.to_le_bytes());
        out.extend_from_slice(&fp);
        out.extend_from_slice(&(self.pairs.len() as u64).to_le_bytes());
        for &(a, b) in &self.pairs {
            out.extend_from_slice(&a.to_le_bytes());
            out.extend_from_slice(&b.to_le_bytes());
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::GroundTruthFormat(m.to_owned());
        if bytes.len() < HEADER_LEN + 32 {
            return Err(bad("file too short"));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(bad("checksum mismatch (file corrupted)"));
        }
        if &body[..4] != MAGIC {
            return Err(bad("bad magic"));
        }
        let word = |at: usize| u32::from_le_bytes(body[at..at + 4].try_into().unwrap());
        let dword = |at: usize| u64::from_le_bytes(body[at..at + 8].try_into().unwrap());
        if word(4) != VERSION {
            return Err(bad("unsupported version"));
        }
        let lambda = f64::from_bits(dword(8));
        let fingerprint = hex::encode(&body[16..48]);
        let count = dword(48) as usize;
        if body.len() != HEADER_LEN + 8 * count {
            return Err(bad("pair count does not match file length"));
        }
        let pairs: Vec<Pair> = (0..count)
            .map(|i| {
                let at = HEADER_LEN + 8 * i;
                (word(at), word(at + 4))
            })
            .collect();
        if pairs.iter().any(|&(a, b)| a >= b) || pairs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad("pairs are not canonical"));
        }
        Ok(GroundTruth { lambda, fingerprint, pairs })
    }

    pub fn sidecar_path(path: &Path) -> PathBuf {
        let mut name = path.as_os_str().to_owned();
        name.push(".json");
        PathBuf::from(name)
    }

    /// Writes the binary file and its JSON sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        let sidecar = Sidecar {
            format: "simjoin-groundtruth".into(),
            version: VERSION,
            lambda: self.lambda,
            fingerprint: self.fingerprint.clone(),
            pairs: self.pairs.len() as u64,
        };
        let mut text = serde_json::to_string_pretty(&sidecar)?;
        text.push('\n');
        fs::write(Self::sidecar_path(path), text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (Dataset, GroundTruth) {
        let ds = Dataset::from_token_lists([vec![1, 2, 3], vec![2, 3, 4], vec![1, 2, 3, 4], vec![8, 9]]);
        let gt = GroundTruth::compute(&ds, 0.5).unwrap();
        (ds, gt)
    }

    #[test]
    fn round_trips_through_bytes_and_files() {
        let (ds, gt) = sample();
        assert_eq!(gt.pairs, vec![(0, 1), (0, 2), (1, 2)]);
        assert_eq!(GroundTruth::from_bytes(&gt.to_bytes().unwrap()).unwrap(), gt);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("truth.bin");
        gt.save(&path).unwrap();
        let loaded = GroundTruth::load(&path).unwrap();
        loaded.check(&ds, 0.5).unwrap();
        let sidecar: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(GroundTruth::sidecar_path(&path)).unwrap()).unwrap();
        assert_eq!(sidecar["pairs"], 3);
    }

    #[test]
    fn empty_truth_is_valid() {
        let ds = Dataset::from_token_lists([vec![1, 2], vec![3, 4]]);
        let gt = GroundTruth::compute(&ds, 0.99).unwrap();
        assert!(gt.pairs.is_empty());
        assert_eq!(GroundTruth::from_bytes(&gt.to_bytes().unwrap()).unwrap(), gt);
    }

    #[test]
    fn detects_every_single_byte_corruption() {
        let (_, gt) = sample();
        let bytes = gt.to_bytes().unwrap();
        for i in 0..bytes.len() {
            let mut bad = bytes.clone();
            bad[i] ^= 0x40;
            assert!(GroundTruth::from_bytes(&bad).is_err(), "byte {i}");
        }
        assert!(GroundTruth::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn detects_swapped_dataset_or_threshold() {
        let (ds, gt) = sample();
        let other = Dataset::from_token_lists([vec![1, 2, 3], vec![2, 3, 5]]);
        assert!(matches!(gt.check(&other, 0.5), Err(Error::GroundTruthMismatch(_))));
        assert!(matches!(gt.check(&ds, 0.6), Err(Error::GroundTruthMismatch(_))));
    }
}
