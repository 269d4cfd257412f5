use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::corpus_io::{parse_block_id, write_atomic};
use crate::error::{Error, Result};
use crate::filter::{threshold_outliers, Criterion};
use crate::scorer::BlockScore;

use super::fmt_f64;

/// `|F ∩ F_ref| / |F_ref|`.
pub fn overlap_ratio(set: &BTreeSet<u64>, reference: &BTreeSet<u64>) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::EmptyReference);
    }
    let common = set.intersection(reference).count();
    Ok(common as f64 / reference.len() as f64)
}

/// Externally produced per-block scores (for example perplexities).
pub type ExternalScores = HashMap<u64, f64>;

/// Reads a `block_id<TAB>score` file; a `block_id` header line is optional.
pub fn read_external_scores(path: impl AsRef<Path>) -> Result<ExternalScores> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() || (i == 0 && line.starts_with("block_id")) {
            continue;
        }
        let bad = || {
            Error::format(
                path,
                format!("line {}: expected `block_id<TAB>score`", i + 1),
            )
        };
        let (id, score) = line.split_once('\t').ok_or_else(bad)?;
        let id = parse_block_id(id).ok_or_else(bad)?;
        let score: f64 = score.trim().parse().map_err(|_| bad())?;
        out.insert(id, score);
    }
    Ok(out)
}

/// Top/bottom `e/2`% of the external scores over the blocks they cover.
pub fn trim_external(
    scores: &[BlockScore],
    external: &ExternalScores,
    e: f64,
) -> Result<BTreeSet<u64>> {
    let covered: Vec<BlockScore> = scores
        .iter()
        .filter_map(|s| {
            external
                .get(&s.block_id)
                .map(|&v| BlockScore { mu: v, ..s.clone() })
        })
        .collect();
    threshold_outliers(&covered, Criterion::Mu, e)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapRow {
    pub e: f64,
    pub overlap_mu: f64,
    pub overlap_sigma: f64,
}

/// Overlap of the `mu` and `sigma` trims with the trim of an external score,
/// for each `e` in the grid.
pub fn overlap_vs_external(
    scores: &[BlockScore],
    external: &ExternalScores,
    e_grid: &[f64],
) -> Result<Vec<OverlapRow>> {
    let missing: Vec<u64> = scores
        .iter()
        .map(|s| s.block_id)
        .filter(|id| !external.contains_key(id))
        .collect();
    let covered = scores.len() - missing.len();
    if (covered as f64) < 0.99 * scores.len() as f64 || scores.is_empty() {
        return Err(Error::InsufficientCoverage {
            covered,
            total: scores.len(),
            missing: missing.into_iter().take(20).collect(),
        });
    }
    let mut grid = e_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.into_iter()
        .map(|e| {
            let f_ext = trim_external(scores, external, e)?;
            let f_mu = threshold_outliers(scores, Criterion::Mu, e)?;
            let f_sigma = threshold_outliers(scores, Criterion::Sigma, e)?;
            Ok(OverlapRow {
                e,
                overlap_mu: overlap_ratio(&f_mu, &f_ext)?,
                overlap_sigma: overlap_ratio(&f_sigma, &f_ext)?,
            })
        })
        .collect()
}

pub fn write_overlap_csv(rows: &[OverlapRow], path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), |w| {
        writeln!(w, "e,overlap_mu,overlap_sigma")?;
        for r in rows {
            writeln!(
                w,
                "{},{},{}",
                fmt_f64(r.e),
                fmt_f64(r.overlap_mu),
                fmt_f64(r.overlap_sigma)
            )?;
        }
        Ok(())
    })
}
