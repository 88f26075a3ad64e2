//! Next-word decoding against a compiled dictionary.
//!
//! The dictionary is a binary `d × v` matrix holding one activation pattern
//! per candidate word, stored as CSR rows. Decoding scores each word by the
//! mean sigmoid activation over its rows, softmaxes the scores and picks the
//! best word.

use std::collections::HashSet;
use std::io::{BufRead, Read, Write};

use serde::Serialize;

use crate::binio;
use crate::error::{Error, Result};
use crate::splitter::{join, split, SplitConfig, Token};
use crate::trigram::{pattern, tag_pattern, HashAlgorithm, SparsePattern, TFreeConfig};

/// End-of-text pseudo-word. Hashed like a control tag; never added
/// implicitly.
pub const END_OF_TEXT: &str = "<eot>";

const MAGIC: &[u8; 4] = b"TFDC";
const VERSION: u32 = 1;

/// Candidate next words and their precompiled patterns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    cfg: TFreeConfig,
    tokens: Vec<String>,
    offsets: Vec<usize>,
    indices: Vec<u32>,
}

/// Outcome of one decoding step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecodeResult {
    pub token: String,
    pub index: usize,
    /// Softmax-normalized score of the chosen word.
    pub score: f64,
    /// Best `r` words with their softmax scores, when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank_scores: Option<Vec<(String, f64)>>,
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn entry_pattern(word: &str, cfg: &TFreeConfig, split_cfg: &SplitConfig) -> Result<SparsePattern> {
    if word == END_OF_TEXT {
        return tag_pattern(word, cfg);
    }
    let token = Token::parse(word, split_cfg)
        .map_err(|_| Error::input(format!("dictionary word {word:?} is not a single token")))?;
    Ok(pattern(&token, cfg))
}

impl Dictionary {
    /// Compiles `words` with the default split rules.
    pub fn compile<S: AsRef<str>>(words: &[S], cfg: &TFreeConfig) -> Result<Self> {
        Self::compile_with(words, cfg, &SplitConfig::default())
    }

    /// Deduplicates `words` (first occurrence wins) and precomputes each
    /// pattern. Every word must be one token under `split_cfg`, a control
    /// tag, or [`END_OF_TEXT`].
    pub fn compile_with<S: AsRef<str>>(
        words: &[S],
        cfg: &TFreeConfig,
        split_cfg: &SplitConfig,
    ) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::input("dictionary needs at least one word"));
        }
        let mut seen = HashSet::with_capacity(words.len());
        let mut dict = Dictionary {
            cfg: *cfg,
            tokens: Vec::with_capacity(words.len()),
            offsets: vec![0],
            indices: Vec::new(),
        };
        for word in words {
            let word = word.as_ref();
            if !seen.insert(word) {
                continue;
            }
            let pat = entry_pattern(word, cfg, split_cfg)?;
            dict.tokens.push(word.to_string());
            dict.indices.extend_from_slice(pat.indices());
            dict.offsets.push(dict.indices.len());
        }
        Ok(dict)
    }

    pub fn config(&self) -> &TFreeConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, i: usize) -> &str {
        &self.tokens[i]
    }

    /// Active rows of word `i`.
    pub fn row(&self, i: usize) -> &[u32] {
        &self.indices[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn row_weight(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn position(&self, word: &str) -> Option<usize> {
        self.tokens.iter().position(|t| t == word)
    }

    /// Number of stored activations, i.e. the cost of one scoring pass.
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    fn check_logits(&self, logits: &[f64]) -> Result<()> {
        if logits.len() != self.cfg.v() {
            return Err(Error::input(format!(
                "expected {} logits, got {}",
                self.cfg.v(),
                logits.len()
            )));
        }
        if let Some(j) = logits.iter().position(|x| !x.is_finite()) {
            return Err(Error::input(format!("logit {j} is not finite")));
        }
        Ok(())
    }

    /// Mean sigmoid activation over each word's rows (before softmax).
    pub fn scores(&self, logits: &[f64]) -> Result<Vec<f64>> {
        self.check_logits(logits)?;
        let probs: Vec<f64> = logits.iter().map(|&z| sigmoid(z)).collect();
        Ok((0..self.len())
            .map(|i| {
                let row = self.row(i);
                let sum: f64 = row.iter().map(|&j| probs[j as usize]).sum();
                sum / row.len() as f64
            })
            .collect())
    }

    /// Picks the next word. Ties go to the lowest dictionary index.
    pub fn decode(&self, logits: &[f64]) -> Result<DecodeResult> {
        self.decode_top(logits, 0)
    }

    /// Like [`decode`](Self::decode), also reporting the best `top` words.
    pub fn decode_top(&self, logits: &[f64], top: usize) -> Result<DecodeResult> {
        let probs = softmax(&self.scores(logits)?);
        let mut best = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > probs[best] {
                best = i;
            }
        }
        let rank_scores = (top > 0).then(|| {
            let mut order: Vec<usize> = (0..probs.len()).collect();
            order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
            order
                .into_iter()
                .take(top)
                .map(|i| (self.tokens[i].clone(), probs[i]))
                .collect()
        });
        Ok(DecodeResult {
            token: self.tokens[best].clone(),
            index: best,
            score: probs[best],
            rank_scores,
        })
    }

    /// Writes the compiled cache: `TFDC`, version, `v` (u64), `m`, `k`
    /// (u32), hash name, `d` (u64), `d+1` row offsets (u64), the index count
    /// (u64) and indices (u32), then each word as u64 length + UTF-8 bytes.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        binio::write_u32(w, VERSION)?;
        binio::write_u64(w, self.cfg.v() as u64)?;
        binio::write_u32(w, self.cfg.m() as u32)?;
        binio::write_u32(w, self.cfg.k() as u32)?;
        binio::write_str(w, self.cfg.hash().name())?;
        binio::write_u64(w, self.len() as u64)?;
        let mut buf = Vec::with_capacity(self.offsets.len() * 8 + self.indices.len() * 4);
        for &o in &self.offsets {
            buf.extend_from_slice(&(o as u64).to_le_bytes());
        }
        buf.extend_from_slice(&(self.indices.len() as u64).to_le_bytes());
        for &i in &self.indices {
            buf.extend_from_slice(&i.to_le_bytes());
        }
        for t in &self.tokens {
            buf.extend_from_slice(&(t.len() as u64).to_le_bytes());
            buf.extend_from_slice(t.as_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        const WHAT: &str = "dictionary cache";
        binio::read_magic(r, MAGIC, WHAT)?;
        let version = binio::read_u32(r, WHAT)?;
        if version != VERSION {
            return Err(Error::format(
                WHAT,
                format!("unsupported version {version}"),
            ));
        }
        let v = binio::read_len(r, WHAT)?;
        let m = binio::read_u32(r, WHAT)? as usize;
        let k = binio::read_u32(r, WHAT)? as usize;
        let hash: HashAlgorithm = binio::read_str(r, WHAT)?.parse()?;
        let cfg = TFreeConfig::with_hash(v, m, k, hash)?;
        let d = binio::read_len(r, WHAT)?;
        if d == 0 {
            return Err(Error::format(WHAT, "empty dictionary"));
        }
        let mut offsets = Vec::with_capacity(d.min(1 << 24) + 1);
        for _ in 0..=d {
            offsets.push(binio::read_len(r, WHAT)?);
        }
        let nnz = binio::read_len(r, WHAT)?;
        if offsets[0] != 0 || offsets[d] != nnz || offsets.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::format(WHAT, "row offsets are inconsistent"));
        }
        let raw = binio::read_bytes(r, nnz * 4, WHAT)?;
        let indices: Vec<u32> = raw
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        for i in 0..d {
            let row = &indices[offsets[i]..offsets[i + 1]];
            if row.windows(2).any(|w| w[1] <= w[0]) || row.iter().any(|&j| j as usize >= v) {
                return Err(Error::format(
                    WHAT,
                    format!("row {i} is not a valid pattern"),
                ));
            }
        }
        let mut tokens = Vec::with_capacity(d.min(1 << 24));
        for _ in 0..d {
            let len = binio::read_len(r, WHAT)?;
            let bytes = binio::read_bytes(r, len, WHAT)?;
            tokens.push(
                String::from_utf8(bytes)
                    .map_err(|e| Error::format(WHAT, format!("word is not UTF-8: {e}")))?,
            );
        }
        Ok(Dictionary {
            cfg,
            tokens,
            offsets,
            indices,
        })
    }
}

/// Numerically stable softmax.
pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Reads a word list: one word per line, blank lines and lines starting
/// with `#` skipped. Only the line terminator is stripped.
pub fn read_wordlist<R: BufRead>(input: R) -> Result<Vec<String>> {
    let mut words = Vec::new();
    for line in input.lines() {
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        words.push(line.to_string());
    }
    Ok(words)
}

/// Anything that maps a token context to `v` next-word logits.
pub trait LogitModel {
    fn logits(&self, context: &[Token]) -> Result<Vec<f64>>;
}

impl<F> LogitModel for F
where
    F: Fn(&[Token]) -> Result<Vec<f64>>,
{
    fn logits(&self, context: &[Token]) -> Result<Vec<f64>> {
        self(context)
    }
}

/// Greedy decoding: appends the best dictionary word `steps` times, or
/// until [`END_OF_TEXT`] is chosen.
pub fn greedy_generate<M: LogitModel + ?Sized>(
    prefix: &str,
    model: &M,
    dict: &Dictionary,
    steps: usize,
    split_cfg: &SplitConfig,
) -> Result<String> {
    if steps == 0 {
        return Ok(prefix.to_string());
    }
    let mut context = split(prefix, split_cfg);
    for _ in 0..steps {
        let next = dict.decode(&model.logits(&context)?)?;
        if next.token == END_OF_TEXT {
            break;
        }
        context.push(Token::parse(&next.token, split_cfg)?);
    }
    Ok(join(&context, split_cfg))
}
