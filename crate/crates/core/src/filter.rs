//! Medians, distances from them, and budgeted selection.
//!
//! For cut depth `k`, `F_mu(k)` holds the `k` blocks with the largest
//! `|mu - M_mu|` and `F_sigma(k)` the `k` with the largest `|sigma - M_sigma|`,
//! ties ordered by ascending block id. The discard set is their union, and
//! [`select`] picks the smallest `k` whose kept volume fits the budget.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scorer::BlockScore;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MedianPair {
    pub m_mu: f64,
    pub m_sigma: f64,
    pub n_blocks: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Mu,
    Sigma,
}

impl Criterion {
    pub fn value(self, s: &BlockScore) -> f64 {
        match self {
            Criterion::Mu => s.mu,
            Criterion::Sigma => s.sigma,
        }
    }
}

/// Which side of the split the token budget measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BudgetSide {
    Keep,
    Discard,
}

/// Exact median by selection; the mean of the two middle values for even
/// lengths. Reorders `values`.
pub fn median(values: &mut [f64]) -> Option<f64> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mid = n / 2;
    let (left, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        return Some(upper);
    }
    let lower = left.iter().copied().max_by(f64::total_cmp).expect("n >= 2");
    Some((lower + upper) / 2.0)
}

pub fn compute_medians(scores: &[BlockScore]) -> Result<MedianPair> {
    if scores.is_empty() {
        return Err(Error::NoBlocks);
    }
    let (mut mus, mut sigmas): (Vec<f64>, Vec<f64>) =
        scores.iter().map(|s| (s.mu, s.sigma)).unzip();
    Ok(MedianPair {
        m_mu: median(&mut mus).expect("non-empty"),
        m_sigma: median(&mut sigmas).expect("non-empty"),
        n_blocks: scores.len(),
    })
}

/// `(|mu - M_mu|, |sigma - M_sigma|)`.
pub fn deltas(score: &BlockScore, medians: &MedianPair) -> (f64, f64) {
    (
        (score.mu - medians.m_mu).abs(),
        (score.sigma - medians.m_sigma).abs(),
    )
}

/// Outcome of [`select`]. Id lists are sorted ascending except `f_mu` and
/// `f_sigma`, which are in discard-rank order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionReport {
    pub k: usize,
    pub n_blocks: usize,
    pub total_tokens: u64,
    pub budget_side: BudgetSide,
    pub budget_tokens: u64,
    /// Keep-side equivalent of the budget.
    pub budget_n: u64,
    pub kept_tokens: u64,
    pub discarded_tokens: u64,
    pub kept_count: usize,
    pub discarded_count: usize,
    pub overlap_mu_sigma: usize,
    pub medians: MedianPair,
    #[serde(skip)]
    pub kept_blocks: Vec<u64>,
    #[serde(skip)]
    pub discarded_blocks: Vec<u64>,
    #[serde(skip)]
    pub f_mu: Vec<u64>,
    #[serde(skip)]
    pub f_sigma: Vec<u64>,
}

/// Indices of `scores` by descending distance, then ascending block id.
/// Blocks equal on both are identical content and stay in canonical order.
fn discard_order(scores: &[BlockScore], dist: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        dist[b]
            .total_cmp(&dist[a])
            .then_with(|| canonical(&scores[a], &scores[b]))
            .then_with(|| a.cmp(&b))
    });
    order
}

fn canonical(a: &BlockScore, b: &BlockScore) -> Ordering {
    a.block_id
        .cmp(&b.block_id)
        .then_with(|| a.source_tag.cmp(&b.source_tag))
}

/// Discards the union of the top-`k` blocks by each distance, with the
/// smallest `k` that brings the kept volume within the budget.
pub fn select(
    scores: &[BlockScore],
    medians: &MedianPair,
    budget_tokens: u64,
    side: BudgetSide,
) -> Result<SelectionReport> {
    if scores.is_empty() {
        return Err(Error::NoBlocks);
    }
    let n = scores.len();
    let total: u64 = scores.iter().map(|s| s.n_tokens as u64).sum();
    if budget_tokens > total {
        return Err(Error::BudgetTooLarge {
            budget: budget_tokens,
            total,
        });
    }
    let budget_n = match side {
        BudgetSide::Keep => budget_tokens,
        BudgetSide::Discard => total - budget_tokens,
    };

    let (d_mu, d_sigma): (Vec<f64>, Vec<f64>) = scores.iter().map(|s| deltas(s, medians)).unzip();
    let order_mu = discard_order(scores, &d_mu);
    let order_sigma = discard_order(scores, &d_sigma);

    // A block leaves the kept set at k = 1 + its better rank.
    let mut first_k = vec![usize::MAX; n];
    for (rank, &i) in order_mu.iter().enumerate() {
        first_k[i] = rank + 1;
    }
    for (rank, &i) in order_sigma.iter().enumerate() {
        first_k[i] = first_k[i].min(rank + 1);
    }
    let mut removed_at = vec![0u64; n + 1];
    for (i, &k) in first_k.iter().enumerate() {
        removed_at[k] += scores[i].n_tokens as u64;
    }
    // kept[k] is non-increasing; kept[n] = 0 meets any budget.
    let mut kept = Vec::with_capacity(n + 1);
    let mut acc = total;
    for removed in &removed_at {
        acc -= removed;
        kept.push(acc);
    }
    let k = kept.partition_point(|&t| t > budget_n);

    let mut kept_blocks = Vec::new();
    let mut discarded_blocks = Vec::new();
    for (i, s) in scores.iter().enumerate() {
        if first_k[i] <= k {
            discarded_blocks.push(s.block_id);
        } else {
            kept_blocks.push(s.block_id);
        }
    }
    kept_blocks.sort_unstable();
    discarded_blocks.sort_unstable();
    let f_mu: Vec<u64> = order_mu[..k].iter().map(|&i| scores[i].block_id).collect();
    let f_sigma: Vec<u64> = order_sigma[..k]
        .iter()
        .map(|&i| scores[i].block_id)
        .collect();
    let in_mu: BTreeSet<usize> = order_mu[..k].iter().copied().collect();
    let overlap_mu_sigma = order_sigma[..k]
        .iter()
        .filter(|i| in_mu.contains(i))
        .count();

    Ok(SelectionReport {
        k,
        n_blocks: n,
        total_tokens: total,
        budget_side: side,
        budget_tokens,
        budget_n,
        kept_tokens: kept[k],
        discarded_tokens: total - kept[k],
        kept_count: kept_blocks.len(),
        discarded_count: discarded_blocks.len(),
        overlap_mu_sigma,
        medians: *medians,
        kept_blocks,
        discarded_blocks,
        f_mu,
        f_sigma,
    })
}

/// Indices of blocks whose criterion value ranks in the top or bottom
/// `e/2` percent (by value, ties by block id). Exactly `2 * floor(n*e/200)`.
pub fn threshold_outlier_indices(
    scores: &[BlockScore],
    criterion: Criterion,
    e: f64,
) -> Result<Vec<usize>> {
    if !(e > 0.0 && e < 100.0) {
        return Err(Error::InvalidParameter(format!(
            "e must be in (0, 100), got {e}"
        )));
    }
    let n = scores.len();
    let per_side = (n as f64 * e / 200.0).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        criterion
            .value(&scores[a])
            .total_cmp(&criterion.value(&scores[b]))
            .then_with(|| canonical(&scores[a], &scores[b]))
            .then_with(|| a.cmp(&b))
    });
    let mut out: Vec<usize> = order[..per_side]
        .iter()
        .chain(&order[n - per_side..])
        .copied()
        .collect();
    out.sort_unstable();
    Ok(out)
}

/// Block ids of [`threshold_outlier_indices`].
pub fn threshold_outliers(
    scores: &[BlockScore],
    criterion: Criterion,
    e: f64,
) -> Result<BTreeSet<u64>> {
    Ok(threshold_outlier_indices(scores, criterion, e)?
        .into_iter()
        .map(|i| scores[i].block_id)
        .collect())
}
