//! Acceptance criteria. Each test prints one PASS/FAIL line to stderr
//! (uncaptured) and then asserts its verdict.
//!
//! Tests share one lock so timing measurements never compete for cores.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::Mutex;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use priorgate::analysis::{
    dsir_features, dsir_weight, mixture_sweep, subsample_consistency, BucketHash, FeatureConfig,
};
use priorgate::corpus_io::{segment_all, DocBlock, Document, SegmentConfig};
use priorgate::filter::{
    compute_medians, deltas, select, threshold_outlier_indices, BudgetSide, Criterion,
};
use priorgate::ids;
use priorgate::prior::{count_tokens, TokenCounts};
use priorgate::scorer::score_corpus;
use priorgate::synth::{zipf_corpus, ZipfCorpusConfig};
use priorgate::tokenizer::{build_whitespace_vocab, Tokenizer};
use priorgate::BlockScore;

static SERIAL: Mutex<()> = Mutex::new(());

fn report(n: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(
        std::io::stderr().lock(),
        "[acceptance] criterion {n} {name}: {verdict} ({detail})"
    );
}

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

/// Straightforward reimplementation of the scoring pipeline over words.
mod naive {
    use std::collections::HashMap;

    pub struct Block {
        pub words: Vec<String>,
    }

    pub fn blocks(docs: &[String], size: usize, min: usize) -> Vec<Block> {
        let mut out = Vec::new();
        for d in docs {
            let words: Vec<String> = d
                .split(char::is_whitespace)
                .filter(|w| !w.is_empty())
                .map(String::from)
                .collect();
            let mut start = 0;
            while start < words.len() {
                let end = (start + size).min(words.len());
                if end - start >= min {
                    out.push(Block {
                        words: words[start..end].to_vec(),
                    });
                }
                start = end;
            }
        }
        out
    }

    pub struct Priors {
        pub counts: HashMap<String, u64>,
        pub total: u64,
    }

    impl Priors {
        pub fn new(blocks: &[Block]) -> Self {
            let mut counts = HashMap::new();
            let mut total = 0;
            for b in blocks {
                for w in &b.words {
                    *counts.entry(w.clone()).or_insert(0) += 1;
                    total += 1;
                }
            }
            Self { counts, total }
        }

        pub fn p(&self, w: &str) -> f64 {
            match self.counts.get(w) {
                Some(&c) => c as f64 / self.total as f64,
                None => 1.0 / (2.0 * self.total as f64),
            }
        }
    }

    pub fn mu(b: &Block, pr: &Priors) -> f64 {
        b.words.iter().map(|w| pr.p(w).ln()).sum::<f64>() / b.words.len() as f64
    }

    pub fn sigma(b: &Block, pr: &Priors) -> f64 {
        let n = b.words.len() as f64;
        let mean = b.words.iter().map(|w| pr.p(w)).sum::<f64>() / n;
        (b.words
            .iter()
            .map(|w| (pr.p(w) - mean).powi(2))
            .sum::<f64>()
            / n)
            .sqrt()
    }

    pub fn median(v: &[f64]) -> f64 {
        let mut s = v.to_vec();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = s.len();
        if n % 2 == 1 {
            s[n / 2]
        } else {
            (s[n / 2 - 1] + s[n / 2]) / 2.0
        }
    }

    /// Positions ranked by the key list, smallest first.
    fn ranked(keys: &[(f64, u64, usize)], descending: bool) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..keys.len()).collect();
        idx.sort_by(|&a, &b| {
            let (va, ia, pa) = keys[a];
            let (vb, ib, pb) = keys[b];
            let by_value = if descending {
                vb.partial_cmp(&va)
            } else {
                va.partial_cmp(&vb)
            };
            by_value.unwrap().then(ia.cmp(&ib)).then(pa.cmp(&pb))
        });
        idx
    }

    pub fn trim(values: &[f64], ids: &[u64], e: f64) -> Vec<usize> {
        let keys: Vec<_> = (0..values.len()).map(|i| (values[i], ids[i], i)).collect();
        let order = ranked(&keys, false);
        let per_side = (values.len() as f64 * e / 200.0).floor() as usize;
        let mut out: Vec<usize> = order[..per_side].to_vec();
        out.extend_from_slice(&order[values.len() - per_side..]);
        out.sort();
        out
    }

    /// (k, kept positions) for the smallest k meeting the kept budget.
    pub fn select(
        d_mu: &[f64],
        d_sigma: &[f64],
        ids: &[u64],
        sizes: &[u64],
        budget: u64,
    ) -> (usize, Vec<usize>) {
        let n = ids.len();
        let om = ranked(
            &(0..n).map(|i| (d_mu[i], ids[i], i)).collect::<Vec<_>>(),
            true,
        );
        let os = ranked(
            &(0..n).map(|i| (d_sigma[i], ids[i], i)).collect::<Vec<_>>(),
            true,
        );
        for k in 0..=n {
            let gone: std::collections::HashSet<usize> =
                om[..k].iter().chain(&os[..k]).copied().collect();
            let kept: Vec<usize> = (0..n).filter(|i| !gone.contains(i)).collect();
            if kept.iter().map(|&i| sizes[i]).sum::<u64>() <= budget {
                return (k, kept);
            }
        }
        unreachable!("k = n keeps nothing")
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

#[test]
fn criterion_1_oracle_equivalence() {
    let _g = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0ac1e);
    let seps = [" ", "  ", "\t", "\n", "\u{3000}"];
    let mut failures = Vec::new();
    let mut checked = 0usize;
    let mut case = 0usize;
    while checked < 500 {
        case += 1;
        let v = rng.random_range(1..=49);
        let words: Vec<String> = (0..v).map(|i| format!("w{i}")).collect();
        let budget_tokens = rng.random_range(1..=1000);
        let mut docs = Vec::new();
        let mut used = 0;
        while used < budget_tokens {
            let len = rng.random_range(0..=200).min(budget_tokens - used);
            used += len.max(1);
            let text: Vec<String> = (0..len)
                .map(|_| {
                    format!(
                        "{}{}",
                        words[rng.random_range(0..v)],
                        seps[rng.random_range(0..seps.len())]
                    )
                })
                .collect();
            docs.push(text.concat());
        }
        let size = rng.random_range(1..=64);
        let min = rng.random_range(1..=size);

        let oracle_blocks = naive::blocks(&docs, size, min);
        if oracle_blocks.is_empty() {
            continue;
        }
        let vocab = build_whitespace_vocab(&docs);
        let tok = Tokenizer::whitespace(vocab);
        let documents: Vec<Document> = docs
            .iter()
            .map(|d| Document::new(tok.encode(d).unwrap(), "-"))
            .collect();
        let (blocks, _) = segment_all(&documents, SegmentConfig::new(size, min).unwrap());
        let mut fail = |what: String| failures.push(format!("case {case}: {what}"));
        if blocks.len() != oracle_blocks.len() {
            fail(format!(
                "{} blocks vs {}",
                blocks.len(),
                oracle_blocks.len()
            ));
            checked += 1;
            continue;
        }
        let table = count_tokens(&blocks, tok.vocab_size(), tok.id()).unwrap();
        let pr = naive::Priors::new(&oracle_blocks);
        for w in &words {
            let lib = tok.vocab().id(w).map(|id| table.lookup_prior(id));
            let expected = pr.p(w);
            match lib {
                Some(p) if close(p, expected) => {}
                // Words absent from every document have no id.
                None if !docs.iter().any(|d| d.split_whitespace().any(|x| x == w)) => {}
                other => fail(format!("prior of {w}: {other:?} vs {expected}")),
            }
        }

        let scores = score_corpus(&blocks, &table).unwrap();
        let ids: Vec<u64> = scores.iter().map(|s| s.block_id).collect();
        let sizes: Vec<u64> = scores.iter().map(|s| s.n_tokens as u64).collect();
        let mus: Vec<f64> = oracle_blocks.iter().map(|b| naive::mu(b, &pr)).collect();
        let sigmas: Vec<f64> = oracle_blocks.iter().map(|b| naive::sigma(b, &pr)).collect();
        for (i, s) in scores.iter().enumerate() {
            if s.n_tokens != oracle_blocks[i].words.len()
                || !close(s.mu, mus[i])
                || !close(s.sigma, sigmas[i])
            {
                fail(format!(
                    "block {i}: ({}, {}) vs ({}, {})",
                    s.mu, s.sigma, mus[i], sigmas[i]
                ));
            }
        }

        let medians = compute_medians(&scores).unwrap();
        let (m_mu, m_sigma) = (naive::median(&mus), naive::median(&sigmas));
        if !close(medians.m_mu, m_mu) || !close(medians.m_sigma, m_sigma) {
            fail(format!("medians {medians:?} vs ({m_mu}, {m_sigma})"));
        }
        let d_mu: Vec<f64> = mus.iter().map(|x| (x - m_mu).abs()).collect();
        let d_sigma: Vec<f64> = sigmas.iter().map(|x| (x - m_sigma).abs()).collect();
        for (i, s) in scores.iter().enumerate() {
            let (a, b) = deltas(s, &medians);
            if !close(a, d_mu[i]) || !close(b, d_sigma[i]) {
                fail(format!("deltas of block {i}"));
            }
        }

        let e = [1.0, 5.0, 10.0, 20.0, 33.3, 50.0][case % 6];
        for (criterion, values) in [(Criterion::Mu, &mus), (Criterion::Sigma, &sigmas)] {
            let lib = threshold_outlier_indices(&scores, criterion, e).unwrap();
            let expected = naive::trim(values, &ids, e);
            if lib != expected {
                fail(format!(
                    "{criterion:?} trim at e={e}: {lib:?} vs {expected:?}"
                ));
            }
        }

        let total: u64 = sizes.iter().sum();
        let budget = rng.random_range(0..=total);
        let report = select(&scores, &medians, budget, BudgetSide::Keep).unwrap();
        let (k, kept) = naive::select(&d_mu, &d_sigma, &ids, &sizes, budget);
        let mut kept_ids: Vec<u64> = kept.iter().map(|&i| ids[i]).collect();
        kept_ids.sort();
        if report.k != k || report.kept_blocks != kept_ids {
            fail(format!("select at {budget}: k={} vs {k}", report.k));
        }
        checked += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = failures.is_empty() && secs < 60.0;
    report(
        1,
        "oracle equivalence",
        pass,
        &format!(
            "{checked} corpora, {} mismatches, {secs:.1}s",
            failures.len()
        ),
    );
    assert!(pass, "{:#?}", &failures[..failures.len().min(10)]);
}

/// Per-document exponent spread used for the synthetic corpora.
const JITTER: f64 = 0.2;

fn zipf_blocks(cfg: ZipfCorpusConfig) -> Vec<DocBlock> {
    segment_all(&zipf_corpus(&cfg).unwrap(), SegmentConfig::default()).0
}

#[test]
fn criterion_2_subsample_consistency() {
    let _g = serial();
    let start = Instant::now();
    let blocks = zipf_blocks(ZipfCorpusConfig {
        total_tokens: 10_000_000,
        exponent_jitter: JITTER,
        seed: 2,
        ..Default::default()
    });
    let tokens: usize = blocks.iter().map(|b| b.tokens.len()).sum();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(8)
        .build()
        .unwrap();
    let rows = pool
        .install(|| subsample_consistency(&blocks, 50_000, "zipf", &[1.0, 10.0, 100.0], 10.0, 7, 5))
        .unwrap();
    let (b1, b10, full) = (&rows[0], &rows[1], &rows[2]);
    let speedup = full.seconds_prior_phase / b1.seconds_prior_phase;
    let secs = start.elapsed().as_secs_f64();
    let pass = tokens >= 10_000_000
        && b1.overlap_vs_full >= 0.90
        && b10.overlap_vs_full >= 0.95
        && speedup >= 10.0
        && secs < 600.0;
    report(
        2,
        "subsample consistency",
        pass,
        &format!(
            "{tokens} tokens; overlap b=1 {:.4}, b=10 {:.4}; prior phase {:.2}ms vs {:.2}ms = {speedup:.1}x; {secs:.1}s",
            b1.overlap_vs_full,
            b10.overlap_vs_full,
            b1.seconds_prior_phase * 1e3,
            full.seconds_prior_phase * 1e3
        ),
    );
    assert!(pass, "{rows:?}");
}

const RATIOS: [f64; 6] = [1.0, 5.0, 10.0, 20.0, 25.0, 50.0];

#[test]
fn criterion_3_learnability_transition() {
    let _g = serial();
    let start = Instant::now();
    let majority = zipf_blocks(ZipfCorpusConfig {
        total_tokens: 2_000_000,
        exponent_jitter: JITTER,
        seed: 31,
        ..Default::default()
    });
    // Disjoint ids above the majority range, on a narrower vocabulary.
    let minority_cfg = ZipfCorpusConfig {
        vocab_size: 10_000,
        total_tokens: 1_100_000,
        exponent_jitter: JITTER,
        token_offset: 50_000,
        seed: 32,
        source_tag: "minority".into(),
        ..Default::default()
    };
    let vocab = minority_cfg.id_limit();
    let minority = zipf_blocks(minority_cfg);
    let rows = mixture_sweep(&majority, &minority, vocab, "zipf", &RATIOS, 10.0, 33).unwrap();
    let rates: Vec<f64> = rows.iter().map(|r| r.minority_outlier_rate).collect();
    let monotone = rates.windows(2).all(|w| w[1] <= w[0]);
    let secs = start.elapsed().as_secs_f64();
    let pass = rates[0] >= 0.90 && rates[4] <= 0.20 && monotone && secs < 600.0;
    let shown: Vec<String> = rows
        .iter()
        .map(|r| format!("a={}:{:.3}", r.a, r.minority_outlier_rate))
        .collect();
    report(
        3,
        "learnability transition",
        pass,
        &format!("{}; {secs:.1}s", shown.join(" ")),
    );
    assert!(pass, "{rows:?}");
}

#[test]
fn criterion_4_null_mixture_calibration() {
    let _g = serial();
    let blocks = zipf_blocks(ZipfCorpusConfig {
        total_tokens: 2_000_000,
        exponent_jitter: JITTER,
        seed: 41,
        ..Default::default()
    });
    let mut worst: f64 = 0.0;
    let mut details = Vec::new();
    let mut pass = true;
    for seed in 0..10u64 {
        let (minority, majority): (Vec<DocBlock>, Vec<DocBlock>) = blocks
            .iter()
            .cloned()
            .partition(|b| ids::unit_draw(seed, b.block_id) < 0.5);
        let rows =
            mixture_sweep(&majority, &minority, 50_000, "zipf", &[50.0], 10.0, seed).unwrap();
        let r = &rows[0];
        let n = r.minority_blocks as f64;
        let sd = (0.1 * 0.9 / n).sqrt();
        let z = (r.minority_outlier_rate - 0.10) / sd;
        worst = worst.max(z.abs());
        pass &= z.abs() <= 3.0;
        details.push(format!("{:.3}", r.minority_outlier_rate));
    }
    report(
        4,
        "null mixture calibration",
        pass,
        &format!("rates at a=50 [{}], max |z| {worst:.2}", details.join(" ")),
    );
    assert!(pass);
}

fn random_scores(rng: &mut ChaCha8Rng, n: usize) -> Vec<BlockScore> {
    (0..n)
        .map(|i| BlockScore {
            block_id: rng.random::<u64>() ^ i as u64,
            n_tokens: rng.random_range(64..=512),
            // Coarse values force ties.
            mu: -(rng.random_range(0..40) as f64) / 4.0,
            sigma: rng.random_range(0..40) as f64 / 1000.0,
            source_tag: "-".into(),
        })
        .collect()
}

#[test]
fn criterion_5_selection_accounting() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut violations = Vec::new();
    let cases = 300;
    for case in 0..cases {
        let n = rng.random_range(1..=400);
        let scores = random_scores(&mut rng, n);
        let medians = compute_medians(&scores).unwrap();
        let total: u64 = scores.iter().map(|s| s.n_tokens as u64).sum();
        let mut budgets: Vec<u64> = (0..10).map(|_| rng.random_range(0..=total)).collect();
        budgets.sort();
        let mut previous: Option<BTreeSet<u64>> = None;
        for &budget in &budgets {
            let r = select(&scores, &medians, budget, BudgetSide::Keep).unwrap();
            let kept: BTreeSet<u64> = r.kept_blocks.iter().copied().collect();
            if r.kept_tokens > budget {
                violations.push(format!("case {case}: kept {} > {budget}", r.kept_tokens));
            }
            if r.f_mu.len() != r.k || r.f_sigma.len() != r.k {
                violations.push(format!(
                    "case {case}: |F_mu|={} |F_sigma|={} k={}",
                    r.f_mu.len(),
                    r.f_sigma.len(),
                    r.k
                ));
            }
            if r.kept_tokens + r.discarded_tokens != total {
                violations.push(format!("case {case}: token accounting"));
            }
            if let Some(prev) = &previous {
                if !prev.is_subset(&kept) {
                    violations.push(format!("case {case}: kept sets not nested at {budget}"));
                }
            }
            previous = Some(kept);
        }
    }
    let pass = violations.is_empty();
    report(
        5,
        "selection accounting",
        pass,
        &format!(
            "{cases} score sets x 10 budgets, {} violations",
            violations.len()
        ),
    );
    assert!(pass, "{violations:?}");
}

fn random_blocks(rng: &mut ChaCha8Rng, count: usize, vocab: u32, tag: &str) -> Vec<DocBlock> {
    (0..count)
        .map(|i| {
            let len = rng.random_range(1..=300);
            let tokens: Vec<u32> = (0..len).map(|_| rng.random_range(0..vocab)).collect();
            let doc_id = ids::doc_id(&tokens);
            DocBlock {
                block_id: ids::block_id(doc_id, i as u64),
                doc_id,
                index: 0,
                tokens,
                source_tag: tag.into(),
            }
        })
        .collect()
}

#[test]
fn criterion_6_dsir_reduction() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let vocab = 400u32;
    // The raw corpus never emits the top ids and reference never the bottom,
    // so both floors are exercised.
    let raw_blocks = random_blocks(&mut rng, 100, vocab - 40, "raw");
    let mut ref_blocks = random_blocks(&mut rng, 80, vocab, "ref");
    for b in &mut ref_blocks {
        b.tokens.retain(|&t| t >= 20);
        if b.tokens.is_empty() {
            b.tokens.push(vocab - 1);
        }
    }
    let cfg = FeatureConfig::new(1, vocab as usize, BucketHash::Identity).unwrap();
    let p_raw = dsir_features(&raw_blocks, cfg).unwrap();
    let p_ref = dsir_features(&ref_blocks, cfg).unwrap();
    let raw_table = count_tokens(&raw_blocks, vocab as usize, "ids").unwrap();
    let ref_table = count_tokens(&ref_blocks, vocab as usize, "ids").unwrap();

    let mut worst: f64 = 0.0;
    for b in &raw_blocks {
        let w = dsir_weight(b, &p_raw, &p_ref).unwrap();
        let expected: f64 = b
            .tokens
            .iter()
            .map(|&t| ref_table.lookup_log_prior(t) - raw_table.lookup_log_prior(t))
            .sum();
        worst = worst.max((w - expected).abs());
    }
    let pass = worst <= 1e-9;
    report(
        6,
        "dsir reduction",
        pass,
        &format!("100 blocks, max |diff| {worst:.3e}"),
    );
    assert!(pass);
}

fn write_jsonl(path: &Path, docs: &[(String, &str)]) {
    let mut f = std::fs::File::create(path).unwrap();
    for (text, source) in docs {
        writeln!(
            f,
            "{}",
            serde_json::json!({ "text": text, "source": source })
        )
        .unwrap();
    }
}

fn text_corpus(
    rng: &mut ChaCha8Rng,
    docs: usize,
    vocab: &[String],
    tag: &'static str,
) -> Vec<(String, &'static str)> {
    (0..docs)
        .map(|_| {
            let len = rng.random_range(80..=900);
            // Each document favors the head of a random slice of the vocabulary.
            let width = rng.random_range(5..vocab.len());
            let words: Vec<&str> = (0..len)
                .map(|_| {
                    let r = rng.random_range(0.0f64..1.0).powi(3);
                    vocab[(r * width as f64) as usize].as_str()
                })
                .collect();
            (words.join(" "), tag)
        })
        .collect()
}

/// Every file below `dir`, relative path to bytes.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn criterion_7_cli_determinism() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let vocab: Vec<String> = (0..600).map(|i| format!("t{i}")).collect();
    let mut other: Vec<String> = (0..300).map(|i| format!("u{i}")).collect();
    other.shuffle(&mut rng);
    let majority = text_corpus(&mut rng, 300, &vocab, "a");
    let minority = text_corpus(&mut rng, 200, &other, "b");

    let root = tempfile::tempdir().unwrap();
    let steps: Vec<Vec<&str>> = vec![
        vec![
            "priors",
            "--input",
            "a.jsonl",
            "--b",
            "50",
            "--seed",
            "3",
            "--out",
            "priors.tsv",
        ],
        vec![
            "score",
            "--input",
            "a.jsonl",
            "--priors",
            "priors.tsv",
            "--out",
            "scores.tsv",
        ],
        vec![
            "filter",
            "--scores",
            "scores.tsv",
            "--budget-fraction",
            "0.6",
            "--out",
            "report.json",
        ],
        vec![
            "overlap",
            "--scores",
            "scores.tsv",
            "--external",
            "external.tsv",
            "--out",
            "overlap.csv",
        ],
        vec!["curve", "--priors", "priors.tsv", "--out", "curve.csv"],
        vec![
            "mix-sweep",
            "--majority",
            "a.jsonl",
            "--minority",
            "b.jsonl",
            "--ratios",
            "1,5,10,20",
            "--block-size",
            "128",
            "--seed",
            "4",
            "--out",
            "mix.csv",
        ],
        vec![
            "subsample-check",
            "--input",
            "a.jsonl",
            "--b-grid",
            "10,50,100",
            "--out",
            "sub.csv",
        ],
        vec![
            "dsir",
            "--input",
            "a.jsonl",
            "--reference",
            "b.jsonl",
            "--m",
            "512",
            "--budget-tokens",
            "20000",
            "--out",
            "dsir.tsv",
            "--selected",
            "dsir_selected.txt",
        ],
        vec![
            "pipeline",
            "--input",
            "a.jsonl",
            "--input",
            "b.jsonl",
            "--out-dir",
            "pipe",
        ],
    ];
    let mut snapshots = Vec::new();
    let mut failures = Vec::new();
    for (run, threads) in [(0, "1"), (1, "1"), (2, "8"), (3, "8")] {
        let dir = root.path().join(format!("run{run}"));
        std::fs::create_dir(&dir).unwrap();
        write_jsonl(&dir.join("a.jsonl"), &majority);
        write_jsonl(&dir.join("b.jsonl"), &minority);
        for step in &steps {
            if step[0] == "overlap" {
                // Stand-in external scores: a keyed hash of every scored block.
                let scores = std::fs::read_to_string(dir.join("scores.tsv")).unwrap();
                let mut f = std::fs::File::create(dir.join("external.tsv")).unwrap();
                for line in scores.lines().skip(1) {
                    let id = line.split('\t').next().unwrap();
                    let key = u64::from_str_radix(id, 16).unwrap();
                    writeln!(f, "{id}\t{}", ids::unit_draw(99, key)).unwrap();
                }
            }
            let out = Command::new(env!("CARGO_BIN_EXE_priorgate"))
                .args(step)
                .args(["--threads", threads])
                .current_dir(&dir)
                .output()
                .unwrap();
            if !out.status.success() {
                failures.push(format!(
                    "{} failed: {}",
                    step[0],
                    String::from_utf8_lossy(&out.stderr)
                ));
            }
        }
        snapshots.push(snapshot(&dir));
    }
    for (i, s) in snapshots.iter().enumerate().skip(1) {
        if s != &snapshots[0] {
            let differing: Vec<&String> = s
                .keys()
                .chain(snapshots[0].keys())
                .filter(|k| s.get(*k) != snapshots[0].get(*k))
                .collect();
            failures.push(format!("run {i} differs from run 0 in {differing:?}"));
        }
    }
    let files = snapshots[0].len();
    let pass = failures.is_empty() && files > 25;
    report(
        7,
        "cli determinism",
        pass,
        &format!(
            "{} subcommands, {files} files, threads 1/1/8/8",
            steps.len()
        ),
    );
    assert!(pass, "{failures:#?}");
}

#[test]
fn criterion_8_throughput() {
    let _g = serial();
    let blocks = zipf_blocks(ZipfCorpusConfig {
        total_tokens: 20_000_000,
        seed: 8,
        ..Default::default()
    });
    let tokens: u64 = blocks.iter().map(|b| b.tokens.len() as u64).sum();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(8)
        .build()
        .unwrap();
    let mut best = f64::INFINITY;
    for _ in 0..3 {
        let start = Instant::now();
        let counts = pool
            .install(|| TokenCounts::from_blocks(&blocks, 50_000))
            .unwrap();
        best = best.min(start.elapsed().as_secs_f64());
        assert_eq!(counts.total(), tokens);
    }
    let rate = tokens as f64 / best;
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let verdict = if rate >= 1e6 { "PASS" } else { "WARN" };
    let _ = writeln!(
        std::io::stderr().lock(),
        "[acceptance] criterion 8 throughput: {verdict} ({:.1}M tokens/s on 8 threads over {cores} cores; soft target 1M)",
        rate / 1e6
    );
}
