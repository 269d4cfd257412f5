//! Seeded Zipfian corpora for experiments and tests.
//!
//! Each document draws its tokens from a Zipf law over `vocab_size` ranks.
//! With `exponent_jitter > 0`, every document gets its own exponent, drawn
//! uniformly from `exponent ± exponent_jitter`; this varies how much mass a
//! document puts on high-rank tokens, the way real documents vary in
//! lexical density. Rank `r` becomes token id `token_offset + r - 1`, so two
//! corpora with non-overlapping offset ranges have disjoint vocabularies.
//!
//! Generation is parallel but every document has its own generator keyed on
//! `(seed, document index)`, so output does not depend on thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use rayon::prelude::*;

use crate::corpus_io::Document;
use crate::error::{Error, Result};
use crate::TokenId;

#[derive(Debug, Clone, PartialEq)]
pub struct ZipfCorpusConfig {
    pub vocab_size: usize,
    pub exponent: f64,
    pub exponent_jitter: f64,
    /// Generation stops once at least this many tokens exist.
    pub total_tokens: usize,
    /// Inclusive document-length range in tokens.
    pub doc_len: (usize, usize),
    pub token_offset: TokenId,
    pub seed: u64,
    pub source_tag: String,
}

impl Default for ZipfCorpusConfig {
    fn default() -> Self {
        Self {
            vocab_size: 50_000,
            exponent: 1.1,
            exponent_jitter: 0.0,
            total_tokens: 1_000_000,
            doc_len: (512, 512),
            token_offset: 0,
            seed: 0,
            source_tag: "synthetic".into(),
        }
    }
}

impl ZipfCorpusConfig {
    /// Largest token id this corpus can emit, plus one.
    pub fn id_limit(&self) -> usize {
        self.token_offset as usize + self.vocab_size
    }
}

pub fn zipf_corpus(cfg: &ZipfCorpusConfig) -> Result<Vec<Document>> {
    let (lo, hi) = cfg.doc_len;
    if lo == 0 || hi < lo {
        return Err(Error::InvalidParameter(format!(
            "bad doc_len range {lo}..={hi}"
        )));
    }
    if cfg.vocab_size == 0 || cfg.exponent - cfg.exponent_jitter <= 0.0 {
        return Err(Error::InvalidParameter(
            "need vocab_size > 0 and positive exponents".into(),
        ));
    }
    // Lengths first, sequentially, so the document count is fixed.
    let mut len_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut lengths = Vec::new();
    let mut total = 0;
    while total < cfg.total_tokens {
        let len = len_rng.random_range(lo..=hi);
        lengths.push(len);
        total += len;
    }
    lengths
        .par_iter()
        .enumerate()
        .map(|(i, &len)| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64 + 1);
            let s = if cfg.exponent_jitter > 0.0 {
                rng.random_range(
                    cfg.exponent - cfg.exponent_jitter..=cfg.exponent + cfg.exponent_jitter,
                )
            } else {
                cfg.exponent
            };
            let zipf = Zipf::new(cfg.vocab_size as f64, s)
                .map_err(|e| Error::InvalidParameter(format!("zipf: {e}")))?;
            let tokens = (0..len)
                .map(|_| cfg.token_offset + zipf.sample(&mut rng) as TokenId - 1)
                .collect();
            Ok(Document::new(tokens, cfg.source_tag.clone()))
        })
        .collect()
}
