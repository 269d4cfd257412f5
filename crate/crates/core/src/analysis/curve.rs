use std::path::Path;

use crate::corpus_io::write_atomic;
use crate::error::Result;
use crate::prior::PriorTable;
use crate::TokenId;

use super::fmt_f64;

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub rank: usize,
    pub token_id: TokenId,
    pub log_prior: f64,
}

/// Seen tokens by descending prior (ties by token id), ranks from 1.
pub fn prior_curve(table: &PriorTable) -> Vec<CurveRow> {
    let mut seen: Vec<(TokenId, u64)> = table.seen().collect();
    seen.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    seen.into_iter()
        .enumerate()
        .map(|(i, (token_id, _))| CurveRow {
            rank: i + 1,
            token_id,
            log_prior: table.lookup_log_prior(token_id),
        })
        .collect()
}

pub fn write_curve_csv(rows: &[CurveRow], path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), |w| {
        writeln!(w, "rank,token_id,log_prior")?;
        for r in rows {
            writeln!(w, "{},{},{}", r.rank, r.token_id, fmt_f64(r.log_prior))?;
        }
        Ok(())
    })
}
