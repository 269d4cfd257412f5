use std::path::Path;
use std::time::Instant;

use crate::corpus_io::{write_atomic, DocBlock};
use crate::error::{Error, Result};
use crate::filter::{threshold_outliers, Criterion};
use crate::prior::subsample_priors;
use crate::scorer::score_corpus;

use super::{fmt_f64, overlap_ratio};

#[derive(Debug, Clone, PartialEq)]
pub struct SubsampleRow {
    pub b: f64,
    pub overlap_vs_full: f64,
    pub n_outliers: usize,
    pub prior_tokens: u64,
    /// Fastest of the timed runs of the prior phase.
    pub seconds_prior_phase: f64,
}

/// For each `b`, estimates priors from a `b`% document subsample and
/// measures how many of the full-corpus `mu` outliers (trim `e`) it
/// recovers. The prior phase is timed `timing_repeats` times.
pub fn subsample_consistency(
    blocks: &[DocBlock],
    vocab_size: usize,
    tokenizer: &str,
    b_grid: &[f64],
    e: f64,
    seed: u64,
    timing_repeats: usize,
) -> Result<Vec<SubsampleRow>> {
    if blocks.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let full = subsample_priors(blocks, vocab_size, tokenizer, 100.0, seed)?;
    let full_outliers = threshold_outliers(&score_corpus(blocks, &full)?, Criterion::Mu, e)?;

    let mut grid = b_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.into_iter()
        .map(|b| {
            let mut best = f64::INFINITY;
            let mut table = None;
            for _ in 0..timing_repeats.max(1) {
                let start = Instant::now();
                let t = subsample_priors(blocks, vocab_size, tokenizer, b, seed)?;
                best = best.min(start.elapsed().as_secs_f64());
                table = Some(t);
            }
            let table = table.expect("at least one run");
            let outliers = threshold_outliers(&score_corpus(blocks, &table)?, Criterion::Mu, e)?;
            Ok(SubsampleRow {
                b,
                overlap_vs_full: overlap_ratio(&outliers, &full_outliers)?,
                n_outliers: outliers.len(),
                prior_tokens: table.total(),
                seconds_prior_phase: best,
            })
        })
        .collect()
}

/// Deterministic columns only; timings go to a separate file.
pub fn write_subsample_csv(rows: &[SubsampleRow], path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), |w| {
        writeln!(w, "b,overlap_vs_full,n_outliers,prior_tokens")?;
        for r in rows {
            writeln!(
                w,
                "{},{},{},{}",
                fmt_f64(r.b),
                fmt_f64(r.overlap_vs_full),
                r.n_outliers,
                r.prior_tokens
            )?;
        }
        Ok(())
    })
}

pub fn write_subsample_timing_csv(rows: &[SubsampleRow], path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), |w| {
        writeln!(w, "b,seconds_prior_phase")?;
        for r in rows {
            writeln!(w, "{},{:.6}", fmt_f64(r.b), r.seconds_prior_phase)?;
        }
        Ok(())
    })
}
