//! Per-block prior statistics.
//!
//! `mu` is the mean natural-log prior of a block's tokens and `sigma` the
//! population standard deviation (divisor `N`) of the raw priors.

use rayon::prelude::*;

use crate::corpus_io::DocBlock;
use crate::error::{Error, Result};
use crate::prior::PriorTable;
use crate::TokenId;

/// Blocks at least this long accumulate with compensated summation.
pub const COMPENSATED_MIN_TOKENS: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockScore {
    pub block_id: u64,
    pub n_tokens: usize,
    pub mu: f64,
    pub sigma: f64,
    pub source_tag: String,
}

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Default, Clone, Copy)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.carry
    }
}

fn sum(values: impl Iterator<Item = f64>, compensated: bool) -> f64 {
    if compensated {
        let mut acc = Compensated::default();
        values.for_each(|v| acc.add(v));
        acc.value()
    } else {
        values.sum()
    }
}

/// `(mu, sigma)` of a token sequence under `table`.
pub fn score_tokens(tokens: &[TokenId], table: &PriorTable) -> Option<(f64, f64)> {
    if tokens.is_empty() {
        return None;
    }
    let n = tokens.len() as f64;
    let compensated = tokens.len() >= COMPENSATED_MIN_TOKENS;

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let log_sum = sum(
        tokens.iter().map(|&t| {
            let l = table.lookup_log_prior(t);
            lo = lo.min(l);
            hi = hi.max(l);
            l
        }),
        compensated,
    );
    let mu = (log_sum / n).clamp(lo, hi);

    // Equal log priors mean equal priors: sigma is exactly zero.
    let sigma = if lo == hi {
        0.0
    } else {
        let mean = sum(tokens.iter().map(|&t| table.lookup_prior(t)), compensated) / n;
        let ss = sum(
            tokens.iter().map(|&t| {
                let d = table.lookup_prior(t) - mean;
                d * d
            }),
            compensated,
        );
        (ss / n).sqrt()
    };
    Some((mu, sigma))
}

pub fn score_block(block: &DocBlock, table: &PriorTable) -> Result<BlockScore> {
    let (mu, sigma) =
        score_tokens(&block.tokens, table).ok_or(Error::EmptyBlock(block.block_id))?;
    Ok(BlockScore {
        block_id: block.block_id,
        n_tokens: block.tokens.len(),
        mu,
        sigma,
        source_tag: block.source_tag.clone(),
    })
}

/// Scores every block in parallel; output order follows input order.
pub fn score_corpus(blocks: &[DocBlock], table: &PriorTable) -> Result<Vec<BlockScore>> {
    if table.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    blocks.par_iter().map(|b| score_block(b, table)).collect()
}
