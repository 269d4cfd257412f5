//! Corpus filtering by token-prior statistics.
//!
//! Token priors are estimated as relative term frequencies over a corpus.
//! Each fixed-size token block is summarized by the mean of its log priors
//! (`mu`) and the population standard deviation of its raw priors (`sigma`);
//! blocks farthest from the corpus medians of either statistic are discarded
//! until a token budget is met.
//!
//! The crate is organized bottom-up:
//!
//! - [`corpus_io`]: JSON-lines ingestion, block segmentation, score files.
//! - [`tokenizer`]: byte-level BPE and whitespace tokenization.
//! - [`prior`]: term-frequency tables, subsampling, persistence.
//! - [`scorer`]: per-block `mu` / `sigma`.
//! - [`filter`]: medians, distances, budgeted selection, symmetric trims.
//! - [`analysis`]: overlap, rank curve, mixture sweep, subsample check, DSIR.
//! - [`cli`]: the `priorgate` executable.

pub mod analysis;
pub mod cli;
pub mod corpus_io;
pub mod error;
pub mod filter;
pub mod ids;
pub mod prior;
pub mod scorer;
pub mod synth;
pub mod tokenizer;

pub use corpus_io::{DocBlock, Document, SegmentConfig};
pub use error::{Error, Result};
pub use filter::{BudgetSide, Criterion, MedianPair, SelectionReport};
pub use prior::PriorTable;
pub use scorer::BlockScore;
pub use tokenizer::{Tokenizer, TokenizerMode, Vocabulary};

/// Integer identity of a vocabulary entry.
pub type TokenId = u32;
