//! Token-set records, dataset ingestion and exact Jaccard similarity.
//!
//! Input files hold one record per line: base-10 unsigned 32-bit token ids
//! separated by spaces or tabs. Preprocessing sorts and deduplicates the tokens
//! of each line, drops records with fewer than two distinct tokens and removes
//! duplicate records (first occurrence wins).

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A non-empty set of token ids stored as a strictly increasing list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Record(Vec<u32>);

impl Record {
    /// Wraps an already sorted, duplicate-free, non-empty token list.
    pub fn new(tokens: Vec<u32>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::Contract("record must contain at least one token".into()));
        }
        if tokens.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Contract("record tokens must be strictly increasing".into()));
        }
        Ok(Record(tokens))
    }

    /// Sorts and deduplicates arbitrary tokens. Returns `None` for an empty input.
    pub fn from_unsorted<I: IntoIterator<Item = u32>>(tokens: I) -> Option<Self> {
        let mut tokens: Vec<u32> = tokens.into_iter().collect();
        tokens.sort_unstable();
        tokens.dedup();
        if tokens.is_empty() {
            None
        } else {
            Some(Record(tokens))
        }
    }

    pub fn tokens(&self) -> &[u32] {
        &self.0
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.0.len()
    }
}

/// Join threshold λ in (0, 1).
///
/// Besides the floating-point value the threshold keeps an exact decimal
/// fraction `num / den` (the shortest decimal that round-trips to the `f64`),
/// so every threshold decision is made in integer arithmetic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityThreshold {
    value: f64,
    num: u64,
    den: u64,
}

impl SimilarityThreshold {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::InvalidParam(format!("lambda must lie in (0, 1), got {lambda}")));
        }
        let text = format!("{lambda}");
        let frac = text
            .strip_prefix("0.")
            .ok_or_else(|| Error::InvalidParam(format!("cannot represent lambda {lambda}")))?;
        if frac.len() > 18 {
            return Err(Error::InvalidParam(format!("lambda {lambda} needs more than 18 decimal digits")));
        }
        let num: u64 =
            frac.parse().map_err(|_| Error::InvalidParam(format!("cannot represent lambda {lambda}")))?;
        let den = 10u64.pow(frac.len() as u32);
        Ok(SimilarityThreshold { value: lambda, num, den })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// The exact fraction `(numerator, denominator)` used for decisions.
    pub fn ratio(&self) -> (u64, u64) {
        (self.num, self.den)
    }

    /// `overlap / union >= λ`, exactly.
    pub fn accepts(&self, overlap: usize, union: usize) -> bool {
        overlap as u128 * self.den as u128 >= union as u128 * self.num as u128
    }

    /// Smallest overlap for which two sets of the given sizes reach λ:
    /// `⌈λ(|a|+|b|)/(1+λ)⌉`.
    pub fn min_overlap(&self, len_a: usize, len_b: usize) -> usize {
        let n = (len_a + len_b) as u128 * self.num as u128;
        let d = self.num as u128 + self.den as u128;
        n.div_ceil(d) as usize
    }

    /// `⌈λ·len⌉`, the overlap any partner of a set of size `len` must share with it.
    pub fn ceil_times(&self, len: usize) -> usize {
        (len as u128 * self.num as u128).div_ceil(self.den as u128) as usize
    }

    /// `shorter >= λ·longer`: necessary for J ≥ λ between sets of these sizes.
    pub fn length_compatible(&self, shorter: usize, longer: usize) -> bool {
        shorter as u128 * self.den as u128 >= longer as u128 * self.num as u128
    }
}

impl fmt::Display for SimilarityThreshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

/// Size of the intersection of two sorted token lists.
pub fn overlap(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

pub fn jaccard(a: &Record, b: &Record) -> f64 {
    let inter = overlap(a.tokens(), b.tokens());
    inter as f64 / (a.len() + b.len() - inter) as f64
}

/// Exact check of `jaccard(a, b) >= λ`. The merge stops as soon as the
/// remaining tokens cannot reach the required overlap.
pub fn verify_pair(a: &Record, b: &Record, lambda: &SimilarityThreshold) -> bool {
    let (a, b) = (a.tokens(), b.tokens());
    let required = lambda.min_overlap(a.len(), b.len());
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        if count + (a.len() - i).min(b.len() - j) < required {
            return false;
        }
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count >= required
}

/// A preprocessed, immutable collection of records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    records: Vec<Record>,
    /// 1-based input line of each surviving record.
    source_lines: Vec<usize>,
    token_frequency: HashMap<u32, u32>,
    universe_size: u64,
}

impl Dataset {
    /// Parses the whitespace-separated integer format and preprocesses it.
    pub fn parse<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let mut tokens = Vec::new();
            for field in line.split([' ', '\t', '\r']).filter(|f| !f.is_empty()) {
                let tok: u32 = field.parse().map_err(|e| Error::Parse {
                    line: lineno,
                    message: format!("invalid token `{field}`: {e}"),
                })?;
                tokens.push(tok);
            }
            if !tokens.is_empty() {
                lines.push((lineno, tokens));
            }
        }
        Ok(Self::from_lines(lines))
    }

    /// Parses arbitrary whitespace-separated words, assigning token ids in
    /// order of first appearance.
    pub fn parse_tokenized<R: BufRead>(reader: R) -> Result<Self> {
        let mut vocabulary: HashMap<String, u32> = HashMap::new();
        let mut lines = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let mut tokens = Vec::new();
            for word in line.split_whitespace() {
                let next = vocabulary.len();
                let id = *vocabulary.entry(word.to_owned()).or_insert_with(|| next as u32);
                tokens.push(id);
            }
            if !tokens.is_empty() {
                lines.push((idx + 1, tokens));
            }
        }
        Ok(Self::from_lines(lines))
    }

    /// Preprocesses raw token lists; each list is treated as one input line
    /// numbered from 1.
    pub fn from_token_lists<I, T>(lists: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: IntoIterator<Item = u32>,
    {
        Self::from_lines(lists.into_iter().enumerate().map(|(i, t)| (i + 1, t.into_iter().collect())))
    }

    fn from_lines<I: IntoIterator<Item = (usize, Vec<u32>)>>(lines: I) -> Self {
        let mut seen = HashSet::new();
        let mut records = Vec::new();
        let mut source_lines = Vec::new();
        for (lineno, tokens) in lines {
            let Some(record) = Record::from_unsorted(tokens) else { continue };
            if record.len() < 2 || !seen.insert(record.clone()) {
                continue;
            }
            records.push(record);
            source_lines.push(lineno);
        }
        Self::assemble(records, source_lines)
    }

    /// Concatenates two datasets without removing records shared between them.
    ///
    /// Used to reduce an R ⋈ S join to a self-join; the result may hold equal
    /// records at different indices, one from each side.
    pub fn concat(first: &Dataset, second: &Dataset) -> Self {
        let records = first.records.iter().chain(&second.records).cloned().collect();
        let source_lines = first.source_lines.iter().chain(&second.source_lines).copied().collect();
        Self::assemble(records, source_lines)
    }

    fn assemble(records: Vec<Record>, source_lines: Vec<usize>) -> Self {
        let mut token_frequency: HashMap<u32, u32> = HashMap::new();
        let mut max_token = None;
        for record in &records {
            for &tok in record.tokens() {
                *token_frequency.entry(tok).or_default() += 1;
            }
            max_token = max_token.max(record.tokens().last().copied());
        }
        Dataset {
            records,
            source_lines,
            token_frequency,
            universe_size: max_token.map_or(0, |m| m as u64 + 1),
        }
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn record(&self, id: u32) -> &Record {
        &self.records[id as usize]
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// 1-based input line each record came from.
    pub fn source_lines(&self) -> &[usize] {
        &self.source_lines
    }

    /// Number of records containing each token.
    pub fn token_frequency(&self) -> &HashMap<u32, u32> {
        &self.token_frequency
    }

    /// Largest token id plus one (zero for an empty dataset).
    pub fn universe_size(&self) -> u64 {
        self.universe_size
    }

    pub fn average_record_size(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        let total: usize = self.records.iter().map(Record::len).sum();
        total as f64 / self.records.len() as f64
    }

    /// Writes one record per line in the integer input format.
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for record in &self.records {
            let mut first = true;
            for tok in record.tokens() {
                if !first {
                    out.write_all(b" ")?;
                }
                write!(out, "{tok}")?;
                first = false;
            }
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// SHA-256 over the preprocessed records, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.records.len() as u64).to_le_bytes());
        for record in &self.records {
            hasher.update((record.len() as u64).to_le_bytes());
            for tok in record.tokens() {
                hasher.update(tok.to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }
}
