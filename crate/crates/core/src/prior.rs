//! Token priors from corpus term frequencies.
//!
//! A [`PriorTable`] holds exact integer counts per token id; every prior is
//! `count / total` computed in double precision. Tokens never seen get the
//! floor prior `1 / (2 * total)`, half a singleton's mass, which keeps them
//! below every seen token and finite in log space.
//!
//! Counting is a commutative-monoid reduction over [`TokenCounts`], so any
//! sharding of the input merged in any order gives the same table.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus_io::{write_atomic, DocBlock};
use crate::error::{Error, Result};
use crate::ids;
use crate::TokenId;

/// Header row of the persisted table.
pub const TABLE_HEADER: &str = "token_id\tcount";

/// Tokens per counting shard; small inputs use fewer accumulators.
const SHARD_TOKENS: u64 = 1 << 18;

/// Exact per-token counts. Merging is element-wise addition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenCounts {
    counts: Vec<u64>,
    total: u64,
}

impl TokenCounts {
    pub fn new(vocab_size: usize) -> Self {
        Self {
            counts: vec![0; vocab_size],
            total: 0,
        }
    }

    pub fn add(&mut self, tokens: &[TokenId]) -> Result<()> {
        let vocab_size = self.counts.len();
        for &t in tokens {
            match self.counts.get_mut(t as usize) {
                Some(c) => *c += 1,
                None => return Err(Error::TokenOutOfRange { id: t, vocab_size }),
            }
        }
        self.total += tokens.len() as u64;
        Ok(())
    }

    pub fn merge(mut self, other: Self) -> Self {
        if self.counts.len() < other.counts.len() {
            return other.merge(self);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
        self
    }

    /// Counts every token of `blocks` in parallel.
    pub fn from_blocks(blocks: &[DocBlock], vocab_size: usize) -> Result<Self> {
        let refs: Vec<&DocBlock> = blocks.iter().collect();
        count_block_refs(&refs, vocab_size)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
}

/// Provenance of a table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorMeta {
    pub tokenizer: String,
    /// Subsample percentage, when the table came from one.
    pub b: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct PriorTable {
    counts: Vec<u64>,
    total: u64,
    priors: Vec<f64>,
    log_priors: Vec<f64>,
    floor_prior: f64,
    log_floor: f64,
    meta: PriorMeta,
}

impl PartialEq for PriorTable {
    fn eq(&self, other: &Self) -> bool {
        self.counts == other.counts && self.total == other.total && self.meta == other.meta
    }
}

impl PriorTable {
    pub fn from_counts(counts: TokenCounts, meta: PriorMeta) -> Self {
        let TokenCounts { counts, total } = counts;
        let floor_prior = 1.0 / (2.0 * total as f64);
        let log_floor = floor_prior.ln();
        // Unseen ids share the floor, so only seen ids pay for a logarithm.
        let (priors, log_priors) = counts
            .iter()
            .map(|&c| {
                if c == 0 {
                    (floor_prior, log_floor)
                } else {
                    let p = c as f64 / total as f64;
                    (p, p.ln())
                }
            })
            .unzip();
        Self {
            counts,
            total,
            priors,
            log_priors,
            floor_prior,
            log_floor,
            meta,
        }
    }

    /// The merge identity: no counts, any vocabulary size.
    pub fn empty(tokenizer: impl Into<String>, vocab_size: usize) -> Self {
        Self::from_counts(
            TokenCounts::new(vocab_size),
            PriorMeta {
                tokenizer: tokenizer.into(),
                b: None,
                seed: None,
            },
        )
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn vocab_size(&self) -> usize {
        self.counts.len()
    }

    pub fn meta(&self) -> &PriorMeta {
        &self.meta
    }

    pub fn floor_prior(&self) -> f64 {
        self.floor_prior
    }

    pub fn count(&self, token: TokenId) -> u64 {
        self.counts.get(token as usize).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Prior of a seen token, `None` if unseen.
    pub fn prior(&self, token: TokenId) -> Option<f64> {
        match self.count(token) {
            0 => None,
            _ => Some(self.priors[token as usize]),
        }
    }

    /// Prior with the unseen-token floor applied.
    #[inline]
    pub fn lookup_prior(&self, token: TokenId) -> f64 {
        self.priors
            .get(token as usize)
            .copied()
            .unwrap_or(self.floor_prior)
    }

    /// Natural log of [`lookup_prior`](Self::lookup_prior).
    #[inline]
    pub fn lookup_log_prior(&self, token: TokenId) -> f64 {
        self.log_priors
            .get(token as usize)
            .copied()
            .unwrap_or(self.log_floor)
    }

    /// Largest prior in the table (the floor when empty).
    pub fn max_prior(&self) -> f64 {
        self.counts
            .iter()
            .max()
            .filter(|&&c| c > 0)
            .map(|&c| c as f64 / self.total as f64)
            .unwrap_or(self.floor_prior)
    }

    /// Ids of seen tokens.
    pub fn seen(&self) -> impl Iterator<Item = (TokenId, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (i as TokenId, c))
    }

    fn with_meta(self, meta: PriorMeta) -> Self {
        Self { meta, ..self }
    }

    /// Writes the counts TSV and a `<path>.json` sidecar.
    pub fn save(&self, path: impl AsRef<Path>, extra: &PriorSidecarExtra) -> Result<()> {
        let path = path.as_ref();
        write_atomic(path, |w| {
            writeln!(w, "{TABLE_HEADER}")?;
            for (id, c) in self.seen() {
                writeln!(w, "{id}\t{c}")?;
            }
            Ok(())
        })?;
        let sidecar = PriorSidecar {
            total: self.total,
            tokenizer: self.meta.tokenizer.clone(),
            b: self.meta.b,
            seed: self.meta.seed,
            floor_prior: self.floor_prior,
            vocab_size: self.vocab_size(),
            vocab: extra.vocab.clone(),
            config: extra.config.clone(),
        };
        let body = serde_json::to_string_pretty(&sidecar)?;
        write_atomic(&sidecar_path(path), |w| writeln!(w, "{body}"))
    }

    /// Reads a table written by [`save`](Self::save).
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, PriorSidecar)> {
        let path = path.as_ref();
        let side_path = sidecar_path(path);
        let side_text =
            std::fs::read_to_string(&side_path).map_err(|e| Error::io(&side_path, e))?;
        let sidecar: PriorSidecar = serde_json::from_str(&side_text)
            .map_err(|e| Error::format(&side_path, e.to_string()))?;

        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        match lines.next() {
            Some(Ok(h)) if h == TABLE_HEADER => {}
            Some(Err(e)) => return Err(Error::io(path, e)),
            _ => return Err(Error::format(path, "missing or invalid table header")),
        }
        let mut counts = TokenCounts::new(sidecar.vocab_size);
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let bad = || {
                Error::format(
                    path,
                    format!("line {}: expected `token_id<TAB>count`", i + 2),
                )
            };
            let (id, c) = line.split_once('\t').ok_or_else(bad)?;
            let id: TokenId = id.parse().map_err(|_| bad())?;
            let c: u64 = c.parse().map_err(|_| bad())?;
            let slot = counts
                .counts
                .get_mut(id as usize)
                .ok_or(Error::TokenOutOfRange {
                    id,
                    vocab_size: sidecar.vocab_size,
                })?;
            *slot += c;
            counts.total += c;
        }
        if counts.total != sidecar.total {
            return Err(Error::format(
                path,
                format!(
                    "counts sum to {} but sidecar says {}",
                    counts.total, sidecar.total
                ),
            ));
        }
        let meta = PriorMeta {
            tokenizer: sidecar.tokenizer.clone(),
            b: sidecar.b,
            seed: sidecar.seed,
        };
        Ok((Self::from_counts(counts, meta), sidecar))
    }
}

/// JSON sidecar stored next to a persisted table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PriorSidecar {
    pub total: u64,
    pub tokenizer: String,
    pub b: Option<f64>,
    pub seed: Option<u64>,
    pub floor_prior: f64,
    pub vocab_size: usize,
    /// Whitespace vocabulary file the ids refer to, if any.
    #[serde(default)]
    pub vocab: Option<PathBuf>,
    #[serde(default)]
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, Default)]
pub struct PriorSidecarExtra {
    pub vocab: Option<PathBuf>,
    pub config: serde_json::Value,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Counts every token of every block, in parallel.
pub fn count_tokens(
    blocks: &[DocBlock],
    vocab_size: usize,
    tokenizer: impl Into<String>,
) -> Result<PriorTable> {
    let counts = TokenCounts::from_blocks(blocks, vocab_size)?;
    if counts.total == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok(PriorTable::from_counts(
        counts,
        PriorMeta {
            tokenizer: tokenizer.into(),
            b: Some(100.0),
            seed: None,
        },
    ))
}

fn count_block_refs(blocks: &[&DocBlock], vocab_size: usize) -> Result<TokenCounts> {
    let tokens: u64 = blocks.iter().map(|b| b.tokens.len() as u64).sum();
    let shards = ((tokens / SHARD_TOKENS) as usize + 1).min(4 * rayon::current_num_threads());
    let chunk = blocks.len().div_ceil(shards).max(1);
    blocks
        .par_chunks(chunk)
        .map(|chunk| {
            let mut acc = TokenCounts::new(vocab_size);
            for b in chunk {
                acc.add(&b.tokens)?;
            }
            Ok(acc)
        })
        .try_reduce(|| TokenCounts::new(vocab_size), |a, b| Ok(a.merge(b)))
}

/// Whether a document is in the `b`% subsample for `seed`.
pub fn in_subsample(doc_id: u64, b: f64, seed: u64) -> bool {
    b >= 100.0 || ids::unit_draw(seed, doc_id) < b / 100.0
}

/// Priors from a document-level Bernoulli subsample of `b` percent.
///
/// Membership is a keyed draw on `(seed, doc_id)`, so all blocks of a
/// document are in or out together and the result does not depend on
/// input order. `b = 100` counts everything.
pub fn subsample_priors(
    blocks: &[DocBlock],
    vocab_size: usize,
    tokenizer: impl Into<String>,
    b: f64,
    seed: u64,
) -> Result<PriorTable> {
    if !(b > 0.0 && b <= 100.0) {
        return Err(Error::InvalidParameter(format!(
            "b must be in (0, 100], got {b}"
        )));
    }
    let meta = PriorMeta {
        tokenizer: tokenizer.into(),
        b: Some(b),
        seed: Some(seed),
    };
    if b >= 100.0 {
        let table = count_tokens(blocks, vocab_size, meta.tokenizer.clone())?;
        return Ok(table.with_meta(meta));
    }
    if blocks.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let selected: Vec<&DocBlock> = blocks
        .par_iter()
        .filter(|blk| in_subsample(blk.doc_id, b, seed))
        .collect();
    let counts = count_block_refs(&selected, vocab_size)?;
    if counts.total == 0 {
        return Err(Error::EmptySubsample);
    }
    Ok(PriorTable::from_counts(counts, meta))
}

/// Element-wise sum of tables sharing a tokenizer.
///
/// Provenance fields survive only when every non-empty input agrees.
pub fn merge(tables: &[PriorTable]) -> Result<PriorTable> {
    let first = tables
        .first()
        .ok_or_else(|| Error::InvalidParameter("merge of zero tables".into()))?;
    let tokenizer = first.meta.tokenizer.clone();
    for t in tables {
        if t.meta.tokenizer != tokenizer {
            return Err(Error::TokenizerMismatch {
                expected: tokenizer,
                found: t.meta.tokenizer.clone(),
            });
        }
    }
    let vocab_size = tables.iter().map(|t| t.vocab_size()).max().unwrap_or(0);
    let mut acc = TokenCounts::new(vocab_size);
    for t in tables {
        for (a, c) in acc.counts.iter_mut().zip(&t.counts) {
            *a += c;
        }
        acc.total += t.total;
    }
    let non_empty: Vec<&PriorTable> = tables.iter().filter(|t| !t.is_empty()).collect();
    let b = common(non_empty.iter().map(|t| t.meta.b));
    let seed = common(non_empty.iter().map(|t| t.meta.seed));
    Ok(PriorTable::from_counts(
        acc,
        PriorMeta { tokenizer, b, seed },
    ))
}

fn common<T: PartialEq + Copy>(mut values: impl Iterator<Item = Option<T>>) -> Option<T> {
    let first = values.next()??;
    values.all(|v| v == Some(first)).then_some(first)
}
