//! Tokenizer diagnostics: fertility, near-duplicate vocabulary entries and
//! corpus coverage curves.
//!
//! All accumulators are commutative monoids: documents can be added in any
//! order, in any number of chunks, and partial results merged, without
//! changing the final report.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::splitter::{split, SplitConfig, Token};
use crate::trigram::{trigrams, TFreeConfig, Trigram};

/// One corpus document, optionally with a token count from an external
/// tokenizer.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct Document {
    pub text: String,
    #[serde(default)]
    pub token_count: Option<u64>,
}

impl Document {
    pub fn new(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            token_count: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocFormat {
    /// Each line is a document.
    Lines,
    /// Each line is `{"text": ..., "token_count": N?}`.
    Jsonl,
}

impl DocFormat {
    /// JSONL for `.jsonl`/`.json` paths, plain lines otherwise.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl" | "json") => DocFormat::Jsonl,
            _ => DocFormat::Lines,
        }
    }
}

/// Reads every document from `input`. Blank lines are skipped.
pub fn read_documents<R: BufRead>(input: R, format: DocFormat) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::input(format!("line {}: {e}", n + 1)))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        docs.push(match format {
            DocFormat::Lines => Document::new(line),
            DocFormat::Jsonl => serde_json::from_str(line)
                .map_err(|e| Error::input(format!("line {}: {e}", n + 1)))?,
        });
    }
    Ok(docs)
}

/// Number of maximal runs of alphanumeric characters, the reference word
/// count fertility is measured against.
pub fn reference_words(text: &str) -> u64 {
    let mut count = 0;
    let mut in_run = false;
    for c in text.chars() {
        let alnum = c.is_alphanumeric();
        if alnum && !in_run {
            count += 1;
        }
        in_run = alnum;
    }
    count
}

/// Where token counts come from.
#[derive(Debug, Clone)]
pub enum TokenCounter {
    /// Count every token (control tokens included) the splitter emits.
    TFree(SplitConfig),
    /// Use each document's `token_count`.
    External,
}

impl TokenCounter {
    pub fn count(&self, doc: &Document) -> Result<u64> {
        match self {
            TokenCounter::TFree(cfg) => Ok(split(&doc.text, cfg).len() as u64),
            TokenCounter::External => doc.token_count.ok_or_else(|| {
                Error::input("document has no token_count for the external counter")
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FertilityReport {
    pub documents: u64,
    pub reference_words: u64,
    pub tokens: u64,
    /// Tokens per reference word; `None` when there are no reference words.
    pub fertility: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FertilityAccumulator {
    documents: u64,
    reference_words: u64,
    tokens: u64,
}

impl FertilityAccumulator {
    pub fn add(&mut self, doc: &Document, counter: &TokenCounter) -> Result<()> {
        self.tokens += counter.count(doc)?;
        self.reference_words += reference_words(&doc.text);
        self.documents += 1;
        Ok(())
    }

    pub fn merge(mut self, other: Self) -> Self {
        self.documents += other.documents;
        self.reference_words += other.reference_words;
        self.tokens += other.tokens;
        self
    }

    pub fn finish(&self) -> FertilityReport {
        FertilityReport {
            documents: self.documents,
            reference_words: self.reference_words,
            tokens: self.tokens,
            fertility: (self.reference_words > 0)
                .then(|| self.tokens as f64 / self.reference_words as f64),
        }
    }
}

pub fn fertility<'a, I>(docs: I, counter: &TokenCounter) -> Result<FertilityReport>
where
    I: IntoIterator<Item = &'a Document>,
{
    let mut acc = FertilityAccumulator::default();
    for doc in docs {
        acc.add(doc, counter)?;
    }
    Ok(acc.finish())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DuplicateReport {
    pub vocab_size: usize,
    pub capitalization: usize,
    pub whitespace: usize,
    pub digit: usize,
    pub total: usize,
    pub capitalization_pct: f64,
    pub whitespace_pct: f64,
    pub digit_pct: f64,
    pub total_pct: f64,
}

impl DuplicateReport {
    fn from_counts(vocab_size: usize, cap: usize, ws: usize, digit: usize, total: usize) -> Self {
        let pct = |n: usize| {
            if vocab_size == 0 {
                0.0
            } else {
                n as f64 * 100.0 / vocab_size as f64
            }
        };
        Self {
            vocab_size,
            capitalization: cap,
            whitespace: ws,
            digit,
            total,
            capitalization_pct: pct(cap),
            whitespace_pct: pct(ws),
            digit_pct: pct(digit),
            total_pct: pct(total),
        }
    }
}

/// Audits a vocabulary for entries that repeat another entry up to
/// capitalization or a leading whitespace marker, and for multi-digit
/// entries. A token counts once per category and once in the total.
pub fn duplicates<S: AsRef<str>>(vocab: &[S], ws_marker: char) -> Result<DuplicateReport> {
    if vocab.is_empty() {
        return Err(Error::input("vocabulary is empty"));
    }
    let present: HashSet<&str> = vocab.iter().map(AsRef::as_ref).collect();
    let (mut cap, mut ws, mut digit, mut total) = (0, 0, 0, 0);
    for tok in vocab.iter().map(AsRef::as_ref) {
        let lower = tok.to_ascii_lowercase();
        let is_cap = lower != tok && present.contains(lower.as_str());
        let is_ws = tok
            .strip_prefix(ws_marker)
            .is_some_and(|rest| !rest.is_empty() && present.contains(rest));
        let is_digit = tok.chars().count() >= 2 && tok.chars().all(|c| c.is_ascii_digit());
        cap += usize::from(is_cap);
        ws += usize::from(is_ws);
        digit += usize::from(is_digit);
        total += usize::from(is_cap || is_ws || is_digit);
    }
    Ok(DuplicateReport::from_counts(
        vocab.len(),
        cap,
        ws,
        digit,
        total,
    ))
}

/// Duplicate audit of a hashed embedding table. Its `v` rows are addressed
/// by hash bucket rather than by surface string, so no row can be a case,
/// whitespace or digit variant of another.
pub fn tfree_duplicates(cfg: &TFreeConfig) -> DuplicateReport {
    DuplicateReport::from_counts(cfg.v(), 0, 0, 0, 0)
}

/// Cumulative coverage as `(x, percent)` points, `x` being a word length
/// or a frequency rank.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct CoverageCurve {
    pub points: Vec<(usize, f64)>,
}

impl CoverageCurve {
    fn cumulative(counts: impl IntoIterator<Item = (usize, u64)>, total: u64) -> Self {
        let mut running = 0u64;
        let points = counts
            .into_iter()
            .map(|(x, n)| {
                running += n;
                (x, running as f64 * 100.0 / total as f64)
            })
            .collect();
        Self { points }
    }

    /// Coverage at `x`: the value of the last point with abscissa `<= x`.
    pub fn at(&self, x: usize) -> f64 {
        self.points
            .iter()
            .take_while(|p| p.0 <= x)
            .last()
            .map_or(0.0, |p| p.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    /// Share of word occurrences with byte length `<= x`.
    pub by_length: CoverageCurve,
    /// Share of word occurrences covered by the `x` most frequent words.
    pub top_words: CoverageCurve,
    /// Share of trigram occurrences covered by the `x` most frequent
    /// trigrams.
    pub top_trigrams: CoverageCurve,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoverageAccumulator {
    words: HashMap<String, u64>,
    trigrams: HashMap<Trigram, u64>,
}

impl CoverageAccumulator {
    pub fn add_text(&mut self, text: &str, cfg: &SplitConfig) {
        for tok in split(text, cfg) {
            if let Token::Word(w) = tok {
                for tri in trigrams(&w).expect("words are never empty") {
                    *self.trigrams.entry(tri).or_default() += 1;
                }
                *self.words.entry(w).or_default() += 1;
            }
        }
    }

    pub fn merge(mut self, other: Self) -> Self {
        for (w, n) in other.words {
            *self.words.entry(w).or_default() += n;
        }
        for (t, n) in other.trigrams {
            *self.trigrams.entry(t).or_default() += n;
        }
        self
    }

    pub fn finish(&self) -> CoverageReport {
        let total_words: u64 = self.words.values().sum();
        let total_trigrams: u64 = self.trigrams.values().sum();

        let mut by_len: BTreeMap<usize, u64> = BTreeMap::new();
        for (w, &n) in &self.words {
            *by_len.entry(w.len()).or_default() += n;
        }
        let max_len = by_len.keys().next_back().copied().unwrap_or(0);
        let by_length = CoverageCurve::cumulative(
            (1..=max_len).map(|l| (l, by_len.get(&l).copied().unwrap_or(0))),
            total_words,
        );

        CoverageReport {
            by_length,
            top_words: ranked(
                self.words.iter().map(|(w, &n)| (w.as_bytes(), n)),
                total_words,
            ),
            top_trigrams: ranked(
                self.trigrams.iter().map(|(t, &n)| (&t.as_bytes()[..], n)),
                total_trigrams,
            ),
        }
    }
}

/// Most frequent first, ties in byte-lexicographic order.
fn ranked<'a>(items: impl Iterator<Item = (&'a [u8], u64)>, total: u64) -> CoverageCurve {
    let mut items: Vec<(&[u8], u64)> = items.collect();
    items.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    CoverageCurve::cumulative(
        items.into_iter().enumerate().map(|(i, (_, n))| (i + 1, n)),
        total,
    )
}

pub fn coverage_stats<'a, I>(docs: I, cfg: &SplitConfig) -> CoverageReport
where
    I: IntoIterator<Item = &'a Document>,
{
    let mut acc = CoverageAccumulator::default();
    for doc in docs {
        acc.add_text(&doc.text, cfg);
    }
    acc.finish()
}
