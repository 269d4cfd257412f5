//! Hashed n-gram importance weights.
//!
//! Every block is sliced into all of its 1..=n-grams ("a b" with n = 2 gives
//! `a`, `b`, `a b`). Each n-gram is hashed into one of `m` buckets, and bucket
//! frequencies over a corpus form its feature distribution. A block's log
//! importance weight is the sum over its features of
//! `log gamma_ref[j] - log gamma_raw[j]`.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::corpus_io::DocBlock;
use crate::error::{Error, Result};
use crate::ids;
use crate::TokenId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum BucketHash {
    /// Seeded 64-bit hash of the n-gram's token ids, modulo `m`.
    Seeded(u64),
    /// Unigram token id as bucket; needs `n = 1` and `m >= |V|`.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct FeatureConfig {
    pub n: usize,
    pub m: usize,
    pub hash: BucketHash,
}

impl FeatureConfig {
    pub fn new(n: usize, m: usize, hash: BucketHash) -> Result<Self> {
        if !(1..=2).contains(&n) {
            return Err(Error::InvalidParameter(format!(
                "n-gram order must be 1 or 2, got {n}"
            )));
        }
        if m == 0 {
            return Err(Error::InvalidParameter(
                "bucket count must be positive".into(),
            ));
        }
        if hash == BucketHash::Identity && n != 1 {
            return Err(Error::InvalidParameter(
                "identity buckets need n = 1".into(),
            ));
        }
        Ok(Self { n, m, hash })
    }

    /// 2-gram order and 10,000 buckets.
    pub fn bigram_default(seed: u64) -> Self {
        Self {
            n: 2,
            m: 10_000,
            hash: BucketHash::Seeded(seed),
        }
    }

    pub fn bucket(&self, gram: &[TokenId]) -> Result<usize> {
        match self.hash {
            BucketHash::Seeded(seed) => {
                Ok((ids::seeded_token_hash(gram, seed) % self.m as u64) as usize)
            }
            BucketHash::Identity => {
                let id = gram[0] as usize;
                if id >= self.m {
                    return Err(Error::InvalidParameter(format!(
                        "token {id} has no identity bucket among {}",
                        self.m
                    )));
                }
                Ok(id)
            }
        }
    }
}

/// Calls `f` on every 1-gram, then every 2-gram, ... up to order `n`.
pub fn for_each_ngram(tokens: &[TokenId], n: usize, mut f: impl FnMut(&[TokenId])) {
    for order in 1..=n {
        for gram in tokens.windows(order) {
            f(gram);
        }
    }
}

#[derive(Debug, Clone)]
pub struct FeatureDistribution {
    config: FeatureConfig,
    counts: Vec<u64>,
    raw_total: u64,
    gamma: Vec<f64>,
    log_gamma: Vec<f64>,
}

impl FeatureDistribution {
    pub fn from_counts(config: FeatureConfig, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != config.m {
            return Err(Error::InvalidParameter(
                "bucket vector length differs from m".into(),
            ));
        }
        let raw_total: u64 = counts.iter().sum();
        if raw_total == 0 {
            return Err(Error::EmptyCorpus);
        }
        let floor = 1.0 / (2.0 * raw_total as f64);
        let gamma: Vec<f64> = counts
            .iter()
            .map(|&c| c as f64 / raw_total as f64)
            .collect();
        let log_gamma = counts
            .iter()
            .zip(&gamma)
            .map(|(&c, &g)| if c == 0 { floor.ln() } else { g.ln() })
            .collect();
        Ok(Self {
            config,
            counts,
            raw_total,
            gamma,
            log_gamma,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn raw_total(&self) -> u64 {
        self.raw_total
    }

    /// Normalized bucket masses (zero for empty buckets).
    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// Log mass with empty buckets floored at `1 / (2 * raw_total)`.
    pub fn log_gamma(&self, bucket: usize) -> f64 {
        self.log_gamma[bucket]
    }
}

pub fn dsir_features(blocks: &[DocBlock], config: FeatureConfig) -> Result<FeatureDistribution> {
    if blocks.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let counts = blocks
        .par_chunks(
            blocks
                .len()
                .div_ceil(4 * rayon::current_num_threads())
                .max(1),
        )
        .map(|chunk| {
            let mut acc = vec![0u64; config.m];
            let mut err = None;
            for b in chunk {
                for_each_ngram(&b.tokens, config.n, |g| match config.bucket(g) {
                    Ok(j) => acc[j] += 1,
                    Err(e) => err = Some(e),
                });
                if let Some(e) = err.take() {
                    return Err(e);
                }
            }
            Ok(acc)
        })
        .try_reduce(
            || vec![0u64; config.m],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    FeatureDistribution::from_counts(config, counts)
}

/// The block's bucket count vector, sparse.
pub fn block_bucket_counts(
    tokens: &[TokenId],
    config: &FeatureConfig,
) -> Result<BTreeMap<usize, u64>> {
    let mut out = BTreeMap::new();
    let mut err = None;
    for_each_ngram(tokens, config.n, |g| match config.bucket(g) {
        Ok(j) => *out.entry(j).or_insert(0) += 1,
        Err(e) => err = Some(e),
    });
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Log importance weight `log P_ref(d) - log P_raw(d)`.
pub fn dsir_weight(
    block: &DocBlock,
    raw: &FeatureDistribution,
    reference: &FeatureDistribution,
) -> Result<f64> {
    if raw.config != reference.config {
        return Err(Error::FeatureMismatch(format!(
            "raw {:?} vs reference {:?}",
            raw.config, reference.config
        )));
    }
    let mut total = 0.0;
    let mut err = None;
    for_each_ngram(&block.tokens, raw.config.n, |g| {
        match raw.config.bucket(g) {
            Ok(j) => total += reference.log_gamma(j) - raw.log_gamma(j),
            Err(e) => err = Some(e),
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

/// Highest-weight blocks (ties by block id) until the next would exceed
/// `budget_tokens`. Returns sorted ids.
pub fn dsir_select(blocks: &[DocBlock], weights: &[f64], budget_tokens: u64) -> Vec<u64> {
    let mut order: Vec<usize> = (0..blocks.len()).collect();
    order.sort_by(|&a, &b| {
        weights[b]
            .total_cmp(&weights[a])
            .then(blocks[a].block_id.cmp(&blocks[b].block_id))
    });
    let mut kept = Vec::new();
    let mut used = 0u64;
    for i in order {
        let n = blocks[i].tokens.len() as u64;
        if used + n > budget_tokens {
            break;
        }
        used += n;
        kept.push(blocks[i].block_id);
    }
    kept.sort_unstable();
    kept
}
