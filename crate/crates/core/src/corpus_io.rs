//! JSON-lines ingestion, block segmentation, and the score file format.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::ids;
use crate::scorer::BlockScore;
use crate::TokenId;

/// Source tag assigned to records without a `"source"` field.
pub const DEFAULT_SOURCE: &str = "-";

/// Header row of the score file.
pub const SCORE_HEADER: &str = "block_id\tn_tokens\tmu\tsigma\tsource_tag";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    /// One object per line with a `"text"` field.
    JsonlText,
    /// One object per line with a `"tokens"` array.
    JsonlTokens,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Content {
    Text(String),
    Tokens(Vec<TokenId>),
}

/// One parsed input line, before tokenization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub line: usize,
    pub content: Content,
    pub source: Option<String>,
}

/// A tokenized document. `doc_id` is the content hash of `tokens`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: u64,
    pub tokens: Vec<TokenId>,
    pub source_tag: String,
}

impl Document {
    pub fn new(tokens: Vec<TokenId>, source_tag: impl Into<String>) -> Self {
        Self {
            doc_id: ids::doc_id(&tokens),
            tokens,
            source_tag: sanitize_tag(&source_tag.into()),
        }
    }
}

/// A contiguous run of at most `block_size` tokens from one document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocBlock {
    pub block_id: u64,
    pub doc_id: u64,
    pub index: u32,
    pub tokens: Vec<TokenId>,
    pub source_tag: String,
}

#[derive(Deserialize)]
struct TextLine {
    text: String,
    #[serde(default)]
    source: Option<String>,
}

#[derive(Deserialize)]
struct TokensLine {
    tokens: Vec<TokenId>,
    #[serde(default)]
    source: Option<String>,
}

/// Parses one JSON-lines record. `line` is 1-based and only used for errors.
pub fn parse_record(text: &str, line: usize, format: InputFormat) -> Result<Record> {
    let malformed = |e: serde_json::Error| Error::MalformedLine {
        line,
        message: e.to_string(),
    };
    match format {
        InputFormat::JsonlText => {
            let parsed: TextLine = serde_json::from_str(text).map_err(malformed)?;
            Ok(Record {
                line,
                content: Content::Text(parsed.text),
                source: parsed.source,
            })
        }
        InputFormat::JsonlTokens => {
            let parsed: TokensLine = serde_json::from_str(text).map_err(malformed)?;
            Ok(Record {
                line,
                content: Content::Tokens(parsed.tokens),
                source: parsed.source,
            })
        }
    }
}

/// Streaming reader over a JSON-lines corpus.
///
/// Yields records in file order. Malformed lines come out as
/// [`Error::MalformedLine`] and are tallied in [`CorpusReader::malformed`];
/// an I/O failure is yielded once and ends the stream.
pub struct CorpusReader<R> {
    lines: io::Lines<R>,
    format: InputFormat,
    path: PathBuf,
    line_no: usize,
    malformed: usize,
    failed: bool,
}

impl<R: BufRead> CorpusReader<R> {
    pub fn new(reader: R, format: InputFormat, path: impl Into<PathBuf>) -> Self {
        Self {
            lines: reader.lines(),
            format,
            path: path.into(),
            line_no: 0,
            malformed: 0,
            failed: false,
        }
    }

    /// Number of malformed lines seen so far.
    pub fn malformed(&self) -> usize {
        self.malformed
    }
}

impl<R: BufRead> Iterator for CorpusReader<R> {
    type Item = Result<Record>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(Error::io(&self.path, e)));
                }
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let parsed = parse_record(&line, self.line_no, self.format);
            if parsed.is_err() {
                self.malformed += 1;
            }
            return Some(parsed);
        }
    }
}

/// Opens `path` as a JSON-lines corpus. Failure to open is fatal.
pub fn read_corpus(
    path: impl AsRef<Path>,
    format: InputFormat,
) -> Result<CorpusReader<BufReader<File>>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(CorpusReader::new(
        BufReader::with_capacity(1 << 20, file),
        format,
        path,
    ))
}

/// Block segmentation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentConfig {
    block_size: usize,
    min_block_tokens: usize,
}

impl SegmentConfig {
    pub fn new(block_size: usize, min_block_tokens: usize) -> Result<Self> {
        if min_block_tokens == 0 || block_size < min_block_tokens {
            return Err(Error::InvalidParameter(format!(
                "need block_size >= min_block_tokens >= 1, got {block_size} and {min_block_tokens}"
            )));
        }
        Ok(Self {
            block_size,
            min_block_tokens,
        })
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn min_block_tokens(&self) -> usize {
        self.min_block_tokens
    }
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            block_size: 512,
            min_block_tokens: 64,
        }
    }
}

/// Splits one document into consecutive blocks. A trailing partial block is
/// kept only if it has at least `min_block_tokens` tokens.
pub fn segment(doc: &Document, config: SegmentConfig) -> Vec<DocBlock> {
    doc.tokens
        .chunks(config.block_size)
        .enumerate()
        .filter(|(_, chunk)| chunk.len() >= config.min_block_tokens)
        .map(|(index, chunk)| DocBlock {
            block_id: ids::block_id(doc.doc_id, index as u64),
            doc_id: doc.doc_id,
            index: index as u32,
            tokens: chunk.to_vec(),
            source_tag: doc.source_tag.clone(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct SegmentStats {
    pub documents: usize,
    pub document_tokens: u64,
    pub blocks: usize,
    pub block_tokens: u64,
    pub dropped_tokens: u64,
}

/// Segments every document, in parallel, preserving document order.
pub fn segment_all(docs: &[Document], config: SegmentConfig) -> (Vec<DocBlock>, SegmentStats) {
    use rayon::prelude::*;

    let per_doc: Vec<Vec<DocBlock>> = docs.par_iter().map(|d| segment(d, config)).collect();
    let document_tokens: u64 = docs.iter().map(|d| d.tokens.len() as u64).sum();
    let blocks: Vec<DocBlock> = per_doc.into_iter().flatten().collect();
    let block_tokens: u64 = blocks.iter().map(|b| b.tokens.len() as u64).sum();
    let stats = SegmentStats {
        documents: docs.len(),
        document_tokens,
        blocks: blocks.len(),
        block_tokens,
        dropped_tokens: document_tokens - block_tokens,
    };
    (blocks, stats)
}

/// Replaces characters that would break the TSV layout.
pub fn sanitize_tag(tag: &str) -> String {
    if tag.is_empty() {
        return DEFAULT_SOURCE.to_string();
    }
    tag.chars()
        .map(|c| {
            if c == '\t' || c == '\n' || c == '\r' {
                ' '
            } else {
                c
            }
        })
        .collect()
}

/// Formats a float with 12 significant digits in scientific notation.
pub fn format_sig12(x: f64) -> String {
    format!("{x:.11e}")
}

pub fn format_block_id(id: u64) -> String {
    format!("{id:016x}")
}

pub fn parse_block_id(s: &str) -> Option<u64> {
    if s.len() != 16 {
        return None;
    }
    u64::from_str_radix(s, 16).ok()
}

/// Writes a file through a temporary sibling and renames it into place, so
/// a failed write never leaves a partial file behind.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| Error::io(&dir, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        fill(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Canonical row order for persisted scores.
pub fn sort_scores(scores: &mut [BlockScore]) {
    scores.sort_by(score_order);
}

fn score_order(a: &BlockScore, b: &BlockScore) -> std::cmp::Ordering {
    a.block_id
        .cmp(&b.block_id)
        .then_with(|| a.source_tag.cmp(&b.source_tag))
}

/// Writes the score TSV; rows are sorted by `block_id` regardless of input order.
pub fn write_scores(scores: &[BlockScore], path: impl AsRef<Path>) -> Result<()> {
    let mut rows: Vec<&BlockScore> = scores.iter().collect();
    rows.sort_by(|a, b| score_order(a, b));
    write_atomic(path.as_ref(), |w| {
        writeln!(w, "{SCORE_HEADER}")?;
        for s in rows {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}",
                format_block_id(s.block_id),
                s.n_tokens,
                format_sig12(s.mu),
                format_sig12(s.sigma),
                s.source_tag
            )?;
        }
        Ok(())
    })
}

pub fn read_scores(path: impl AsRef<Path>) -> Result<Vec<BlockScore>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    match lines.next() {
        Some(Ok(h)) if h == SCORE_HEADER => {}
        Some(Err(e)) => return Err(Error::io(path, e)),
        _ => return Err(Error::format(path, "missing or invalid score header")),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line_no = i + 2;
        let bad = |what: &str| Error::format(path, format!("line {line_no}: {what}"));
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(bad("expected 5 tab-separated fields"));
        }
        out.push(BlockScore {
            block_id: parse_block_id(fields[0]).ok_or_else(|| bad("bad block_id"))?,
            n_tokens: fields[1].parse().map_err(|_| bad("bad n_tokens"))?,
            mu: fields[2].parse().map_err(|_| bad("bad mu"))?,
            sigma: fields[3].parse().map_err(|_| bad("bad sigma"))?,
            source_tag: fields[4].to_string(),
        });
    }
    Ok(out)
}

/// Writes one hex block id per line.
pub fn write_id_list(ids: &[u64], path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), |w| {
        for id in ids {
            writeln!(w, "{}", format_block_id(*id))?;
        }
        Ok(())
    })
}
