//! The `priorgate` command line.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors. Data goes
//! to files; diagnostics go to standard error. Every output file gets a
//! `<file>.json` sidecar echoing the full run configuration, minus the
//! thread count, which never affects results.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::{
    dsir_features, dsir_select, dsir_weight, mixture_sweep, overlap_vs_external, prior_curve,
    read_external_scores, subsample_consistency, write_curve_csv, write_mixture_csv,
    write_overlap_csv, write_subsample_csv, write_subsample_timing_csv, BucketHash, FeatureConfig,
};
use crate::corpus_io::{
    format_block_id, format_sig12, read_corpus, read_scores, segment_all, sort_scores,
    write_atomic, write_id_list, write_scores, Content, DocBlock, Document, InputFormat, Record,
    SegmentConfig, DEFAULT_SOURCE,
};
use crate::error::{Error, Result};
use crate::filter::{compute_medians, select, BudgetSide, SelectionReport};
use crate::prior::{sidecar_path, subsample_priors, PriorSidecarExtra, PriorTable};
use crate::scorer::{score_corpus, BlockScore};
use crate::tokenizer::{build_whitespace_vocab, load_bpe, Tokenizer, TokenizerMode, Vocabulary};

/// Tokenizer id recorded for pre-tokenized input.
const PRETOKENIZED: &str = "tokens";
/// Malformed input lines reported individually before summarizing.
const MAX_LINE_WARNINGS: usize = 10;

#[derive(Debug, Parser)]
#[command(
    name = "priorgate",
    version,
    about = "Filter corpora by token-prior statistics"
)]
#[command(arg_required_else_help = true)]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "PRIORGATE_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "command")]
enum Command {
    /// Estimate token priors from a document subsample.
    Priors(PriorsArgs),
    /// Score every block against a prior table.
    Score(ScoreArgs),
    /// Select blocks to a token budget from a score file.
    Filter(FilterArgs),
    /// Overlap of mu/sigma trims with an external per-block score.
    Overlap(OverlapArgs),
    /// Rank curve of a prior table.
    Curve(CurveArgs),
    /// Outlier rate of a minority corpus mixed in at several ratios.
    MixSweep(MixSweepArgs),
    /// Outlier agreement of subsampled priors with full-corpus priors.
    SubsampleCheck(SubsampleArgs),
    /// Hashed n-gram importance weights against a reference corpus.
    Dsir(DsirArgs),
    /// priors, score and filter in one run.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
struct TokenizerArgs {
    /// Input layout.
    #[arg(long, value_enum, default_value = "jsonl-text")]
    format: InputFormat,
    /// Tokenizer for text input.
    #[arg(long, value_enum, default_value = "whitespace")]
    tokenizer: TokenizerMode,
    /// BPE `vocab.json`, or a saved whitespace vocabulary.
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// BPE merges file.
    #[arg(long)]
    merges: Option<PathBuf>,
    /// Vocabulary size for pre-tokenized input (default: max id + 1).
    #[arg(long)]
    vocab_size: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct BlockArgs {
    #[arg(long, default_value_t = 512)]
    block_size: usize,
    /// Shorter trailing blocks are dropped.
    #[arg(long, default_value_t = 64)]
    min_block_tokens: usize,
}

impl BlockArgs {
    fn config(&self) -> Result<SegmentConfig> {
        SegmentConfig::new(self.block_size, self.min_block_tokens)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
struct CorpusArgs {
    /// JSON-lines input; repeat for shards.
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    #[command(flatten)]
    tokenizer: TokenizerArgs,
    #[command(flatten)]
    blocks: BlockArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
struct SubsampleOpts {
    /// Percentage of documents used for prior estimation.
    #[arg(long, default_value_t = 10.0)]
    b: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
struct BudgetArgs {
    /// Token budget.
    #[arg(long, conflicts_with = "budget_fraction")]
    budget_tokens: Option<u64>,
    /// Budget as a fraction of scored tokens.
    #[arg(long, default_value_t = 0.5)]
    budget_fraction: f64,
    /// Whether the budget bounds kept or discarded tokens.
    #[arg(long, value_enum, default_value = "keep")]
    budget_side: BudgetSide,
}

impl BudgetArgs {
    fn resolve(&self, scores: &[BlockScore]) -> Result<u64> {
        if let Some(n) = self.budget_tokens {
            return Ok(n);
        }
        let f = self.budget_fraction;
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::InvalidParameter(format!(
                "budget fraction must be in [0, 1], got {f}"
            )));
        }
        let total: u64 = scores.iter().map(|s| s.n_tokens as u64).sum();
        Ok((f * total as f64).floor() as u64)
    }
}

#[derive(Debug, Args, Serialize)]
struct PriorsArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    subsample: SubsampleOpts,
    /// Output table (TSV).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct ScoreArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Prior table written by `priors`.
    #[arg(long)]
    priors: PathBuf,
    /// Output score file (TSV).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct FilterArgs {
    /// Score file written by `score`.
    #[arg(long)]
    scores: PathBuf,
    #[command(flatten)]
    budget: BudgetArgs,
    /// Report (JSON); id lists go next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct OverlapArgs {
    #[arg(long)]
    scores: PathBuf,
    /// `block_id<TAB>score` file, e.g. perplexities.
    #[arg(long)]
    external: PathBuf,
    /// Trim percentages.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0, 5.0, 10.0, 20.0])]
    e_grid: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct CurveArgs {
    #[arg(long)]
    priors: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct MixSweepArgs {
    #[arg(long, required = true)]
    majority: Vec<PathBuf>,
    #[arg(long, required = true)]
    minority: Vec<PathBuf>,
    #[command(flatten)]
    tokenizer: TokenizerArgs,
    #[command(flatten)]
    blocks: BlockArgs,
    /// Minority size as percentages of majority tokens.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 5.0, 10.0, 20.0, 25.0, 50.0])]
    ratios: Vec<f64>,
    #[arg(long, default_value_t = 10.0)]
    e: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct SubsampleArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 5.0, 10.0, 25.0, 50.0, 100.0])]
    b_grid: Vec<f64>,
    #[arg(long, default_value_t = 10.0)]
    e: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Timed runs per point; the fastest is reported.
    #[arg(long, default_value_t = 1)]
    timing_repeats: usize,
    #[arg(long)]
    out: PathBuf,
    /// Also write prior-phase wall-clock times (not reproducible).
    #[arg(long)]
    timing_out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct DsirArgs {
    /// Raw corpus to select from.
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    /// Target-distribution corpus.
    #[arg(long, required = true)]
    reference: Vec<PathBuf>,
    #[command(flatten)]
    tokenizer: TokenizerArgs,
    #[command(flatten)]
    blocks: BlockArgs,
    /// N-gram order (1 or 2).
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Hash buckets.
    #[arg(long, default_value_t = 10_000)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    hash_seed: u64,
    /// Keep the highest-weight blocks up to this many tokens.
    #[arg(long)]
    budget_tokens: Option<u64>,
    /// Weights (TSV).
    #[arg(long)]
    out: PathBuf,
    /// Selected block ids; requires --budget-tokens.
    #[arg(long, requires = "budget_tokens")]
    selected: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct PipelineArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    subsample: SubsampleOpts,
    #[command(flatten)]
    budget: BudgetArgs,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

/// Runs the command line and returns the process exit code.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return 2;
        }
    };
    match pool.install(|| run(&cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn run(command: &Command) -> Result<()> {
    let config = serde_json::to_value(command)?;
    match command {
        Command::Priors(a) => priors(a, &config),
        Command::Score(a) => score(a, &config),
        Command::Filter(a) => filter(a, &config),
        Command::Overlap(a) => overlap(a, &config),
        Command::Curve(a) => curve(a, &config),
        Command::MixSweep(a) => mix_sweep(a, &config),
        Command::SubsampleCheck(a) => subsample_check(a, &config),
        Command::Dsir(a) => dsir(a, &config),
        Command::Pipeline(a) => pipeline(a, &config),
    }
}

fn priors(a: &PriorsArgs, config: &Value) -> Result<()> {
    let corpus = load_corpora(&a.corpus.tokenizer, &[&a.corpus.input], VocabSource::Build)?;
    let blocks = blocks_of(&corpus.docs[0], &a.corpus.blocks)?;
    let table = estimate(&blocks, &corpus, &a.subsample)?;
    save_table(&table, &corpus, &a.out, config)
}

fn score(a: &ScoreArgs, config: &Value) -> Result<()> {
    let (table, sidecar) = PriorTable::load(&a.priors)?;
    let mode = match a.corpus.tokenizer.format {
        InputFormat::JsonlTokens => PRETOKENIZED,
        InputFormat::JsonlText => a.corpus.tokenizer.tokenizer.name(),
    };
    if sidecar.tokenizer.split(':').next() != Some(mode) {
        return Err(Error::TokenizerMismatch {
            expected: sidecar.tokenizer,
            found: mode.to_string(),
        });
    }
    let source = match (&a.corpus.tokenizer.vocab, &sidecar.vocab) {
        (Some(_), _) => VocabSource::Flag,
        (None, Some(rel)) => VocabSource::Path(resolve_beside(&a.priors, rel)),
        (None, None) => VocabSource::Flag,
    };
    let corpus = load_corpora(&a.corpus.tokenizer, &[&a.corpus.input], source)?;
    if corpus.tokenizer_id != table.meta().tokenizer {
        return Err(Error::TokenizerMismatch {
            expected: table.meta().tokenizer.clone(),
            found: corpus.tokenizer_id,
        });
    }
    let blocks = blocks_of(&corpus.docs[0], &a.corpus.blocks)?;
    let mut scores = score_corpus(&blocks, &table)?;
    sort_scores(&mut scores);
    write_scores(&scores, &a.out)?;
    write_sidecar(&a.out, config, json!({ "blocks": scores.len() }))
}

fn filter(a: &FilterArgs, config: &Value) -> Result<()> {
    let scores = read_scores(&a.scores)?;
    let budget = a.budget.resolve(&scores)?;
    let report = select_blocks(&scores, budget, a.budget.budget_side)?;
    let kept = id_list_path(&a.out, "kept");
    let discarded = id_list_path(&a.out, "discarded");
    write_report(&report, &a.out, &kept, &discarded, config)
}

fn overlap(a: &OverlapArgs, config: &Value) -> Result<()> {
    let scores = read_scores(&a.scores)?;
    let external = read_external_scores(&a.external)?;
    let unmatched = external.len()
        - scores
            .iter()
            .filter(|s| external.contains_key(&s.block_id))
            .count();
    if unmatched > 0 {
        eprintln!("warning: {unmatched} external ids match no scored block");
    }
    let rows = overlap_vs_external(&scores, &external, &a.e_grid)?;
    write_overlap_csv(&rows, &a.out)?;
    write_sidecar(
        &a.out,
        config,
        json!({ "unmatched_external_ids": unmatched }),
    )
}

fn curve(a: &CurveArgs, config: &Value) -> Result<()> {
    let (table, _) = PriorTable::load(&a.priors)?;
    if table.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    write_curve_csv(&prior_curve(&table), &a.out)?;
    write_sidecar(&a.out, config, Value::Null)
}

fn mix_sweep(a: &MixSweepArgs, config: &Value) -> Result<()> {
    let corpus = load_corpora(
        &a.tokenizer,
        &[&a.majority, &a.minority],
        VocabSource::Build,
    )?;
    let majority = blocks_of(&corpus.docs[0], &a.blocks)?;
    let minority = blocks_of(&corpus.docs[1], &a.blocks)?;
    let rows = mixture_sweep(
        &majority,
        &minority,
        corpus.vocab_size,
        &corpus.tokenizer_id,
        &a.ratios,
        a.e,
        a.seed,
    )?;
    write_mixture_csv(&rows, &a.out)?;
    write_sidecar(
        &a.out,
        config,
        json!({ "tokenizer_id": corpus.tokenizer_id }),
    )
}

fn subsample_check(a: &SubsampleArgs, config: &Value) -> Result<()> {
    let corpus = load_corpora(&a.corpus.tokenizer, &[&a.corpus.input], VocabSource::Build)?;
    let blocks = blocks_of(&corpus.docs[0], &a.corpus.blocks)?;
    let rows = subsample_consistency(
        &blocks,
        corpus.vocab_size,
        &corpus.tokenizer_id,
        &a.b_grid,
        a.e,
        a.seed,
        a.timing_repeats,
    )?;
    for r in &rows {
        eprintln!("b={}: prior phase {:.3}s", r.b, r.seconds_prior_phase);
    }
    write_subsample_csv(&rows, &a.out)?;
    write_sidecar(
        &a.out,
        config,
        json!({ "tokenizer_id": corpus.tokenizer_id }),
    )?;
    if let Some(path) = &a.timing_out {
        write_subsample_timing_csv(&rows, path)?;
    }
    Ok(())
}

fn dsir(a: &DsirArgs, config: &Value) -> Result<()> {
    let corpus = load_corpora(&a.tokenizer, &[&a.input, &a.reference], VocabSource::Build)?;
    let raw_blocks = blocks_of(&corpus.docs[0], &a.blocks)?;
    let ref_blocks = blocks_of(&corpus.docs[1], &a.blocks)?;
    let cfg = FeatureConfig::new(a.n, a.m, BucketHash::Seeded(a.hash_seed))?;
    let raw = dsir_features(&raw_blocks, cfg)?;
    let reference = dsir_features(&ref_blocks, cfg)?;
    let weights: Vec<f64> = raw_blocks
        .par_iter()
        .map(|b| dsir_weight(b, &raw, &reference))
        .collect::<Result<_>>()?;

    let mut order: Vec<usize> = (0..raw_blocks.len()).collect();
    order.sort_by(|&x, &y| {
        let (bx, by) = (&raw_blocks[x], &raw_blocks[y]);
        (bx.block_id, &bx.source_tag).cmp(&(by.block_id, &by.source_tag))
    });
    write_atomic(&a.out, |w| {
        writeln!(w, "block_id\tn_tokens\tlog_weight\tsource_tag")?;
        for &i in &order {
            let b = &raw_blocks[i];
            writeln!(
                w,
                "{}\t{}\t{}\t{}",
                format_block_id(b.block_id),
                b.tokens.len(),
                format_sig12(weights[i]),
                b.source_tag
            )?;
        }
        Ok(())
    })?;
    let mut extra = json!({ "tokenizer_id": corpus.tokenizer_id, "features": cfg });
    if let Some(budget) = a.budget_tokens {
        let kept = dsir_select(&raw_blocks, &weights, budget);
        let kept_tokens: u64 = order
            .iter()
            .map(|&i| &raw_blocks[i])
            .filter(|b| kept.binary_search(&b.block_id).is_ok())
            .map(|b| b.tokens.len() as u64)
            .sum();
        extra["selected_blocks"] = json!(kept.len());
        extra["selected_tokens"] = json!(kept_tokens);
        if let Some(path) = &a.selected {
            write_id_list(&kept, path)?;
            write_sidecar(path, config, extra.clone())?;
        }
    }
    write_sidecar(&a.out, config, extra)
}

fn pipeline(a: &PipelineArgs, config: &Value) -> Result<()> {
    std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    let corpus = load_corpora(&a.corpus.tokenizer, &[&a.corpus.input], VocabSource::Build)?;
    let blocks = blocks_of(&corpus.docs[0], &a.corpus.blocks)?;

    let table = estimate(&blocks, &corpus, &a.subsample)?;
    save_table(&table, &corpus, &a.out_dir.join("priors.tsv"), config)?;

    let mut scores = score_corpus(&blocks, &table)?;
    sort_scores(&mut scores);
    let scores_path = a.out_dir.join("scores.tsv");
    write_scores(&scores, &scores_path)?;
    write_sidecar(&scores_path, config, json!({ "blocks": scores.len() }))?;

    let budget = a.budget.resolve(&scores)?;
    let report = select_blocks(&scores, budget, a.budget.budget_side)?;
    write_report(
        &report,
        &a.out_dir.join("report.json"),
        &a.out_dir.join("kept_ids.txt"),
        &a.out_dir.join("discarded_ids.txt"),
        config,
    )
}

/// Tokenized corpora sharing one vocabulary.
struct Corpora {
    docs: Vec<Vec<Document>>,
    tokenizer_id: String,
    vocab_size: usize,
    /// Whitespace vocabulary built from the input, to be saved with priors.
    built: Option<Vocabulary>,
}

enum VocabSource {
    /// Build a whitespace vocabulary over all inputs unless `--vocab` is set.
    Build,
    /// Use `--vocab` / `--merges` as given.
    Flag,
    /// Whitespace vocabulary at this path.
    Path(PathBuf),
}

fn load_corpora(
    args: &TokenizerArgs,
    groups: &[&Vec<PathBuf>],
    source: VocabSource,
) -> Result<Corpora> {
    let records: Vec<Vec<Record>> = groups
        .iter()
        .map(|paths| read_records(paths, args.format))
        .collect::<Result<_>>()?;

    if args.format == InputFormat::JsonlTokens {
        let docs: Vec<Vec<Document>> = records
            .into_iter()
            .map(|rs| {
                rs.into_iter()
                    .map(|r| match r.content {
                        Content::Tokens(t) => Document::new(t, tag(r.source)),
                        Content::Text(_) => unreachable!("token format yields token records"),
                    })
                    .collect()
            })
            .collect();
        let max_id = docs
            .iter()
            .flatten()
            .flat_map(|d| d.tokens.iter())
            .max()
            .copied();
        let vocab_size = args
            .vocab_size
            .unwrap_or_else(|| max_id.map_or(0, |m| m as usize + 1));
        return Ok(Corpora {
            docs,
            tokenizer_id: PRETOKENIZED.to_string(),
            vocab_size,
            built: None,
        });
    }

    let mut built = None;
    let tokenizer = match args.tokenizer {
        TokenizerMode::Bpe => Tokenizer::bpe(match (&args.vocab, &args.merges) {
            (Some(v), Some(m)) => load_bpe(v, m)?,
            (None, None) => Vocabulary::byte_level(),
            _ => {
                return Err(Error::InvalidParameter(
                    "bpe needs both --vocab and --merges, or neither for plain bytes".into(),
                ))
            }
        }),
        TokenizerMode::Whitespace => {
            let vocab = match (&args.vocab, source) {
                (Some(v), _) => Vocabulary::load_json(v)?,
                (None, VocabSource::Path(p)) => Vocabulary::load_json(p)?,
                (None, VocabSource::Build) => {
                    let texts: Vec<&str> = records.iter().flatten().filter_map(text_of).collect();
                    let v = build_whitespace_vocab(&texts);
                    built = Some(v.clone());
                    v
                }
                (None, VocabSource::Flag) => {
                    return Err(Error::InvalidParameter(
                        "no whitespace vocabulary: pass --vocab or use priors that record one"
                            .into(),
                    ))
                }
            };
            Tokenizer::whitespace(vocab)
        }
    };
    let docs = records
        .iter()
        .map(|rs| {
            rs.par_iter()
                .map(|r| {
                    let text = text_of(r).expect("text format yields text records");
                    Ok(Document::new(
                        tokenizer.encode(text)?,
                        tag(r.source.clone()),
                    ))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(Corpora {
        docs,
        tokenizer_id: tokenizer.id(),
        vocab_size: tokenizer.vocab_size(),
        built,
    })
}

fn text_of(r: &Record) -> Option<&str> {
    match &r.content {
        Content::Text(t) => Some(t),
        Content::Tokens(_) => None,
    }
}

fn tag(source: Option<String>) -> String {
    source.unwrap_or_else(|| DEFAULT_SOURCE.to_string())
}

/// Reads all shards, skipping malformed lines with a warning.
fn read_records(paths: &[PathBuf], format: InputFormat) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    for path in paths {
        let mut reader = read_corpus(path, format)?;
        while let Some(rec) = reader.next() {
            match rec {
                Ok(r) => out.push(r),
                Err(e @ Error::MalformedLine { .. }) => {
                    if reader.malformed() <= MAX_LINE_WARNINGS {
                        eprintln!("warning: {}: {e}", path.display());
                    }
                }
                Err(e) => return Err(e),
            }
        }
        if reader.malformed() > 0 {
            eprintln!(
                "warning: {}: skipped {} malformed lines",
                path.display(),
                reader.malformed()
            );
        }
    }
    Ok(out)
}

fn blocks_of(docs: &[Document], args: &BlockArgs) -> Result<Vec<DocBlock>> {
    let (blocks, stats) = segment_all(docs, args.config()?);
    eprintln!(
        "{} documents, {} blocks, {} tokens ({} dropped)",
        stats.documents, stats.blocks, stats.block_tokens, stats.dropped_tokens
    );
    Ok(blocks)
}

fn estimate(blocks: &[DocBlock], corpus: &Corpora, opts: &SubsampleOpts) -> Result<PriorTable> {
    subsample_priors(
        blocks,
        corpus.vocab_size,
        corpus.tokenizer_id.clone(),
        opts.b,
        opts.seed,
    )
}

/// Saves the table, its sidecar and any built whitespace vocabulary.
fn save_table(table: &PriorTable, corpus: &Corpora, out: &Path, config: &Value) -> Result<()> {
    let vocab = match &corpus.built {
        Some(v) => {
            let path = out.with_extension("vocab.json");
            v.save_json(&path)?;
            Some(PathBuf::from(path.file_name().expect("file path")))
        }
        None => None,
    };
    table.save(
        out,
        &PriorSidecarExtra {
            vocab,
            config: config.clone(),
        },
    )
}

/// A path recorded relative to `anchor`'s directory.
fn resolve_beside(anchor: &Path, rel: &Path) -> PathBuf {
    match anchor.parent() {
        Some(dir) if rel.is_relative() => dir.join(rel),
        _ => rel.to_path_buf(),
    }
}

fn select_blocks(scores: &[BlockScore], budget: u64, side: BudgetSide) -> Result<SelectionReport> {
    let medians = compute_medians(scores)?;
    select(scores, &medians, budget, side)
}

/// `report.json` → `report.<kind>.txt`.
fn id_list_path(report: &Path, kind: &str) -> PathBuf {
    report.with_extension(format!("{kind}.txt"))
}

fn write_report(
    report: &SelectionReport,
    out: &Path,
    kept: &Path,
    discarded: &Path,
    config: &Value,
) -> Result<()> {
    write_id_list(&report.kept_blocks, kept)?;
    write_id_list(&report.discarded_blocks, discarded)?;
    let mut body = serde_json::to_value(report)?;
    body["kept_ids_file"] = json!(file_name(kept));
    body["discarded_ids_file"] = json!(file_name(discarded));
    body["config"] = config.clone();
    let text = serde_json::to_string_pretty(&body)?;
    write_atomic(out, |w| writeln!(w, "{text}"))?;
    eprintln!(
        "k={}: kept {} blocks ({} tokens), discarded {} ({} tokens)",
        report.k,
        report.kept_count,
        report.kept_tokens,
        report.discarded_count,
        report.discarded_tokens
    );
    Ok(())
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn write_sidecar(out: &Path, config: &Value, extra: Value) -> Result<()> {
    let body = json!({ "config": config, "output": extra });
    let text = serde_json::to_string_pretty(&body)?;
    write_atomic(&sidecar_path(out), |w| writeln!(w, "{text}"))
}
