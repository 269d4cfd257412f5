//! Byte-level BPE and whitespace tokenization.
//!
//! BPE assets use the common two-file layout: a JSON object mapping token
//! strings to ids, and a merge list with one space-separated pair per line
//! (an optional `#` header line first). Token strings are in the byte-level
//! alphabet, where every byte maps to one printable character.
//!
//! Whitespace vocabularies are collected from a corpus and frozen with ids
//! assigned in lexicographic order of the words, so the id of a word never
//! depends on document order. Id 0 is the reserved unknown token.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use fancy_regex::Regex;
use xxhash_rust::xxh3::Xxh3;

use crate::corpus_io::write_atomic;
use crate::error::{Error, Result};
use crate::TokenId;

/// GPT-2 pre-tokenization pattern.
const PRETOKENIZE_PATTERN: &str =
    r"'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+";

/// Reserved unknown-word token of whitespace vocabularies.
pub const UNK_TOKEN: &str = "<unk>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenizerMode {
    Bpe,
    Whitespace,
}

impl TokenizerMode {
    pub fn name(self) -> &'static str {
        match self {
            TokenizerMode::Bpe => "bpe",
            TokenizerMode::Whitespace => "whitespace",
        }
    }
}

/// Dense token-string ↔ id map with optional merge rules.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
    merges: Vec<(String, String)>,
    /// `(left, right) -> (rank, merged)`.
    merge_ranks: HashMap<(TokenId, TokenId), (u32, TokenId)>,
    unk: Option<TokenId>,
}

impl Vocabulary {
    /// Builds a vocabulary from a token→id map; ids must be exactly `0..n`.
    pub fn from_entries(entries: impl IntoIterator<Item = (String, TokenId)>) -> Result<Self> {
        let mut by_id: BTreeMap<TokenId, String> = BTreeMap::new();
        let mut index = HashMap::new();
        for (token, id) in entries {
            if index.insert(token.clone(), id).is_some() {
                return Err(Error::Vocabulary(format!(
                    "duplicate token string {token:?}"
                )));
            }
            if let Some(prev) = by_id.insert(id, token.clone()) {
                return Err(Error::Vocabulary(format!(
                    "id {id} assigned to both {prev:?} and {token:?}"
                )));
            }
        }
        for (expected, &id) in by_id.keys().enumerate() {
            if id as usize != expected {
                return Err(Error::Vocabulary(format!(
                    "ids are not dense: missing id {expected}"
                )));
            }
        }
        Ok(Self {
            tokens: by_id.into_values().collect(),
            index,
            merges: Vec::new(),
            merge_ranks: HashMap::new(),
            unk: None,
        })
    }

    /// The 256-symbol byte-level alphabet with no merges.
    pub fn byte_level() -> Self {
        let table = byte_to_char();
        Self::from_entries(
            table
                .iter()
                .enumerate()
                .map(|(b, c)| (c.to_string(), b as TokenId)),
        )
        .expect("byte alphabet is dense")
    }

    /// Appends merge rules in rank order. Both parts and the merged string
    /// must already be in the vocabulary.
    pub fn with_merges(mut self, merges: Vec<(String, String)>) -> Result<Self> {
        let mut ranks = HashMap::with_capacity(merges.len());
        for (rank, (left, right)) in merges.iter().enumerate() {
            let rule = format!("{left} {right}");
            let fail = |reason: String| Error::MergeRule {
                line: rank + 1,
                rule: rule.clone(),
                reason,
            };
            let l = self
                .id(left)
                .ok_or_else(|| fail(format!("left part {left:?} not in vocabulary")))?;
            let r = self
                .id(right)
                .ok_or_else(|| fail(format!("right part {right:?} not in vocabulary")))?;
            let merged = format!("{left}{right}");
            let m = self
                .id(&merged)
                .ok_or_else(|| fail(format!("merged token {merged:?} not in vocabulary")))?;
            ranks.entry((l, r)).or_insert((rank as u32, m));
        }
        self.merges = merges;
        self.merge_ranks = ranks;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn unk_id(&self) -> Option<TokenId> {
        self.unk
    }

    /// Hex digest over tokens and merges.
    pub fn fingerprint(&self) -> String {
        let mut h = Xxh3::new();
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update(&[0]);
        }
        h.update(&[1]);
        for (l, r) in &self.merges {
            h.update(l.as_bytes());
            h.update(&[0]);
            h.update(r.as_bytes());
            h.update(&[0]);
        }
        format!("{:016x}", h.digest())
    }

    /// Writes the token→id map as JSON (keys sorted).
    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let map: BTreeMap<&str, TokenId> = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i as TokenId))
            .collect();
        let body = serde_json::to_string(&map)?;
        write_atomic(path.as_ref(), |w| writeln!(w, "{body}"))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let map: BTreeMap<String, TokenId> = serde_json::from_str(&text)
            .map_err(|e| Error::format(path, format!("vocabulary JSON: {e}")))?;
        let mut vocab = Self::from_entries(map)?;
        vocab.unk = vocab.id(UNK_TOKEN);
        Ok(vocab)
    }
}

/// Loads BPE assets: a JSON token→id map and a merge list.
pub fn load_bpe(vocab_path: impl AsRef<Path>, merges_path: impl AsRef<Path>) -> Result<Vocabulary> {
    let vocab_path = vocab_path.as_ref();
    let merges_path = merges_path.as_ref();
    let text = fs::read_to_string(vocab_path).map_err(|e| Error::io(vocab_path, e))?;
    let map: BTreeMap<String, TokenId> = serde_json::from_str(&text)
        .map_err(|e| Error::format(vocab_path, format!("vocabulary JSON: {e}")))?;
    let vocab = Vocabulary::from_entries(map)?;
    let merges_text = fs::read_to_string(merges_path).map_err(|e| Error::io(merges_path, e))?;
    let merges = parse_merges(&merges_text)?;
    // Re-number errors by file line rather than rank.
    vocab
        .with_merges(
            merges
                .iter()
                .map(|(_, l, r)| (l.clone(), r.clone()))
                .collect(),
        )
        .map_err(|e| match e {
            Error::MergeRule { line, rule, reason } => Error::MergeRule {
                line: merges[line - 1].0,
                rule,
                reason,
            },
            other => other,
        })
}

/// Parses a merge list into `(file line, left, right)`.
fn parse_merges(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        if raw.trim().is_empty() || (line_no == 1 && raw.starts_with('#')) {
            continue;
        }
        let mut parts = raw.split(' ');
        match (parts.next(), parts.next(), parts.next()) {
            (Some(l), Some(r), None) if !l.is_empty() && !r.is_empty() => {
                out.push((line_no, l.to_string(), r.to_string()))
            }
            _ => {
                return Err(Error::MergeRule {
                    line: line_no,
                    rule: raw.to_string(),
                    reason: "expected two space-separated tokens".into(),
                })
            }
        }
    }
    Ok(out)
}

/// Collects words for a whitespace vocabulary.
#[derive(Debug, Default, Clone)]
pub struct WhitespaceVocabBuilder {
    words: BTreeSet<String>,
}

impl WhitespaceVocabBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_text(&mut self, text: &str) {
        for w in text.split_whitespace() {
            if !self.words.contains(w) {
                self.words.insert(w.to_string());
            }
        }
    }

    pub fn merge(mut self, other: Self) -> Self {
        if self.words.len() < other.words.len() {
            return other.merge(self);
        }
        self.words.extend(other.words);
        self
    }

    /// Freezes: id 0 is [`UNK_TOKEN`], then words in sorted order.
    pub fn freeze(mut self) -> Vocabulary {
        self.words.remove(UNK_TOKEN);
        let entries = std::iter::once(UNK_TOKEN.to_string())
            .chain(self.words)
            .enumerate()
            .map(|(i, w)| (w, i as TokenId));
        let mut vocab = Vocabulary::from_entries(entries).expect("sorted unique words");
        vocab.unk = Some(0);
        vocab
    }
}

/// Builds a whitespace vocabulary over many texts in parallel.
pub fn build_whitespace_vocab<S: AsRef<str> + Sync>(texts: &[S]) -> Vocabulary {
    use rayon::prelude::*;
    texts
        .par_iter()
        .fold(WhitespaceVocabBuilder::new, |mut b, t| {
            b.add_text(t.as_ref());
            b
        })
        .reduce(WhitespaceVocabBuilder::new, WhitespaceVocabBuilder::merge)
        .freeze()
}

/// Immutable encoder; safe to share across workers.
#[derive(Debug, Clone)]
pub struct Tokenizer {
    mode: TokenizerMode,
    vocab: Vocabulary,
    /// Byte → initial symbol id, BPE only.
    byte_ids: Vec<Option<TokenId>>,
}

impl Tokenizer {
    pub fn bpe(vocab: Vocabulary) -> Self {
        let byte_ids = byte_to_char()
            .iter()
            .map(|c| vocab.id(&c.to_string()))
            .collect();
        Self {
            mode: TokenizerMode::Bpe,
            vocab,
            byte_ids,
        }
    }

    pub fn whitespace(vocab: Vocabulary) -> Self {
        Self {
            mode: TokenizerMode::Whitespace,
            vocab,
            byte_ids: Vec::new(),
        }
    }

    pub fn mode(&self) -> TokenizerMode {
        self.mode
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    /// Identifier recorded with prior tables: `<mode>:<fingerprint>`.
    pub fn id(&self) -> String {
        format!("{}:{}", self.mode.name(), self.vocab.fingerprint())
    }

    pub fn encode(&self, text: &str) -> Result<Vec<TokenId>> {
        match self.mode {
            TokenizerMode::Whitespace => Ok(self.encode_whitespace(text)),
            TokenizerMode::Bpe => self.encode_bpe(text),
        }
    }

    fn encode_whitespace(&self, text: &str) -> Vec<TokenId> {
        let unk = self.vocab.unk.unwrap_or(0);
        text.split_whitespace()
            .map(|w| self.vocab.id(w).unwrap_or(unk))
            .collect()
    }

    fn encode_bpe(&self, text: &str) -> Result<Vec<TokenId>> {
        let mut out = Vec::with_capacity(text.len() / 3 + 1);
        let mut symbols = Vec::new();
        for piece in pretokenize(text) {
            symbols.clear();
            for &b in piece.as_bytes() {
                match self.byte_ids[b as usize] {
                    Some(id) => symbols.push(id),
                    None => {
                        return Err(Error::UnknownSymbol(byte_to_char()[b as usize].to_string()))
                    }
                }
            }
            self.apply_merges(&mut symbols);
            out.extend_from_slice(&symbols);
        }
        Ok(out)
    }

    /// Repeatedly merges the lowest-ranked adjacent pair.
    fn apply_merges(&self, symbols: &mut Vec<TokenId>) {
        if self.vocab.merge_ranks.is_empty() {
            return;
        }
        while symbols.len() > 1 {
            let best = symbols
                .windows(2)
                .filter_map(|w| {
                    self.vocab
                        .merge_ranks
                        .get(&(w[0], w[1]))
                        .map(|&(rank, merged)| (rank, w[0], w[1], merged))
                })
                .min_by_key(|&(rank, ..)| rank);
            let Some((_, left, right, merged)) = best else {
                break;
            };
            let mut i = 0;
            let mut j = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && symbols[i] == left && symbols[i + 1] == right {
                    symbols[j] = merged;
                    i += 2;
                } else {
                    symbols[j] = symbols[i];
                    i += 1;
                }
                j += 1;
            }
            symbols.truncate(j);
        }
    }
}

fn pretokenizer() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(PRETOKENIZE_PATTERN).expect("valid pattern"))
}

/// Splits text into GPT-2 pre-tokens.
pub fn pretokenize(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut pos = 0;
    for m in pretokenizer().find_iter(text) {
        match m {
            Ok(m) => {
                out.push(m.as_str());
                pos = m.end();
            }
            // Backtrack limit: keep the remainder as one piece.
            Err(_) => {
                if pos < text.len() {
                    out.push(&text[pos..]);
                }
                return out;
            }
        }
    }
    out
}

/// The byte-level alphabet: printable bytes map to themselves, the rest to
/// code points from U+0100 upward.
pub fn byte_to_char() -> &'static [char; 256] {
    static TABLE: OnceLock<[char; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = ['\0'; 256];
        let mut next = 0u32;
        for b in 0..=255u8 {
            let printable = matches!(b, b'!'..=b'~' | 0xA1..=0xAC | 0xAE..=0xFF);
            table[b as usize] = if printable {
                char::from(b)
            } else {
                let c = char::from_u32(256 + next).expect("valid code point");
                next += 1;
                c
            };
        }
        table
    })
}
