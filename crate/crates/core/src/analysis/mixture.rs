use std::path::Path;

use crate::corpus_io::{write_atomic, DocBlock};
use crate::error::{Error, Result};
use crate::filter::{threshold_outlier_indices, Criterion};
use crate::ids;
use crate::prior::{PriorMeta, PriorTable, TokenCounts};
use crate::scorer::score_corpus;

use super::fmt_f64;

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureRow {
    /// Minority size as a percentage of majority tokens.
    pub a: f64,
    pub minority_blocks: usize,
    pub minority_tokens: u64,
    pub outliers: usize,
    pub minority_outliers: usize,
    pub minority_outlier_rate: f64,
}

/// Indices of minority blocks, in a seeded order, whose cumulative token
/// count first reaches `target_tokens`. Prefixes are nested in the target.
pub fn select_minority(minority: &[DocBlock], target_tokens: u64, seed: u64) -> Result<Vec<usize>> {
    let available: u64 = minority.iter().map(|b| b.tokens.len() as u64).sum();
    if available < target_tokens {
        return Err(Error::InvalidParameter(format!(
            "minority has {available} tokens, {target_tokens} requested"
        )));
    }
    let mut order: Vec<usize> = (0..minority.len()).collect();
    order.sort_by_key(|&i| {
        (
            ids::keyed_order(seed, minority[i].block_id),
            minority[i].block_id,
            i,
        )
    });
    let mut taken = 0u64;
    let mut out = Vec::new();
    for i in order {
        if taken >= target_tokens {
            break;
        }
        taken += minority[i].tokens.len() as u64;
        out.push(i);
    }
    Ok(out)
}

/// For each ratio `a`, mixes a seeded `a`% (by tokens) slice of the minority
/// into the majority, recomputes priors on the mix, and reports the fraction
/// of minority blocks that land in the `mu` trim at `e`.
pub fn mixture_sweep(
    majority: &[DocBlock],
    minority: &[DocBlock],
    vocab_size: usize,
    tokenizer: &str,
    ratios: &[f64],
    e: f64,
    seed: u64,
) -> Result<Vec<MixtureRow>> {
    if majority.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let majority_tokens: u64 = majority.iter().map(|b| b.tokens.len() as u64).sum();
    let minority_total: u64 = minority.iter().map(|b| b.tokens.len() as u64).sum();
    let max_achievable = 100.0 * minority_total as f64 / majority_tokens as f64;
    let mut grid = ratios.to_vec();
    grid.sort_by(f64::total_cmp);
    for &a in &grid {
        if a <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "ratio must be positive, got {a}"
            )));
        }
        if target_tokens(a, majority_tokens) > minority_total {
            return Err(Error::MinorityTooSmall {
                requested: a,
                max_achievable,
            });
        }
    }

    let majority_counts = TokenCounts::from_blocks(majority, vocab_size)?;
    let mut rows = Vec::with_capacity(grid.len());
    for a in grid {
        let picked: Vec<DocBlock> =
            select_minority(minority, target_tokens(a, majority_tokens), seed)?
                .into_iter()
                .map(|i| minority[i].clone())
                .collect();
        let counts = majority_counts
            .clone()
            .merge(TokenCounts::from_blocks(&picked, vocab_size)?);
        let table = PriorTable::from_counts(
            counts,
            PriorMeta {
                tokenizer: tokenizer.to_string(),
                b: Some(100.0),
                seed: None,
            },
        );
        let mut scores = score_corpus(majority, &table)?;
        scores.extend(score_corpus(&picked, &table)?);
        let outliers = threshold_outlier_indices(&scores, Criterion::Mu, e)?;
        let minority_outliers = outliers.iter().filter(|&&i| i >= majority.len()).count();
        rows.push(MixtureRow {
            a,
            minority_blocks: picked.len(),
            minority_tokens: picked.iter().map(|b| b.tokens.len() as u64).sum(),
            outliers: outliers.len(),
            minority_outliers,
            minority_outlier_rate: minority_outliers as f64 / picked.len().max(1) as f64,
        });
    }
    Ok(rows)
}

fn target_tokens(a: f64, majority_tokens: u64) -> u64 {
    (a / 100.0 * majority_tokens as f64).ceil() as u64
}

pub fn write_mixture_csv(rows: &[MixtureRow], path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), |w| {
        writeln!(
            w,
            "a,minority_outlier_rate,minority_blocks,minority_tokens,minority_outliers,outliers"
        )?;
        for r in rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                fmt_f64(r.a),
                fmt_f64(r.minority_outlier_rate),
                r.minority_blocks,
                r.minority_tokens,
                r.minority_outliers,
                r.outliers
            )?;
        }
        Ok(())
    })
}
