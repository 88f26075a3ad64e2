//! Trigram extraction and sparse activation patterns.
//!
//! A content token is wrapped in boundary spaces and cut into 3-byte
//! windows. Each window is hashed `m` times (rounds `1..=m`, the first `k`
//! on the ASCII-lowercased window) and every hash modulo `v` switches one
//! row on. Control tokens go through the same hashing on their tag, without
//! the boundary wrap.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::fnv1a64;
use crate::splitter::Token;

pub const BOUNDARY: u8 = b' ';
const ROUND_SEPARATOR: u8 = b'_';

pub const DEFAULT_V: usize = 8000;
pub const DEFAULT_M: usize = 10;
pub const DEFAULT_K: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum HashAlgorithm {
    #[default]
    Fnv1a64,
}

impl HashAlgorithm {
    pub fn name(self) -> &'static str {
        match self {
            HashAlgorithm::Fnv1a64 => "fnv1a64",
        }
    }

    #[inline]
    fn hash(self, bytes: &[u8]) -> u64 {
        match self {
            HashAlgorithm::Fnv1a64 => fnv1a64(bytes),
        }
    }
}

impl fmt::Display for HashAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HashAlgorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fnv1a64" => Ok(HashAlgorithm::Fnv1a64),
            other => Err(Error::input(format!("unknown hash algorithm {other:?}"))),
        }
    }
}

/// The hashing hyperparameters: `v` rows, `m` activations per trigram, `k`
/// of them computed on the lowercased trigram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TFreeConfig {
    v: usize,
    m: usize,
    k: usize,
    hash: HashAlgorithm,
}

impl Default for TFreeConfig {
    fn default() -> Self {
        Self {
            v: DEFAULT_V,
            m: DEFAULT_M,
            k: DEFAULT_K,
            hash: HashAlgorithm::Fnv1a64,
        }
    }
}

impl TFreeConfig {
    pub fn new(v: usize, m: usize, k: usize) -> Result<Self> {
        Self::with_hash(v, m, k, HashAlgorithm::Fnv1a64)
    }

    pub fn with_hash(v: usize, m: usize, k: usize, hash: HashAlgorithm) -> Result<Self> {
        if v == 0 || v > u32::MAX as usize {
            return Err(Error::input(format!("v must be in 1..=2^32-1, got {v}")));
        }
        if m == 0 {
            return Err(Error::input("m must be at least 1"));
        }
        if k >= m {
            return Err(Error::input(format!("k must be below m (k={k}, m={m})")));
        }
        Ok(Self { v, m, k, hash })
    }

    /// m=7, k=3, the setting used for the 3B models.
    pub fn preset_3b() -> Self {
        Self::new(DEFAULT_V, 7, 3).expect("valid preset")
    }

    pub fn v(&self) -> usize {
        self.v
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn hash(&self) -> HashAlgorithm {
        self.hash
    }

    /// Index activated by hash round `round` (1-based) of `trigram`.
    #[inline]
    pub fn index(&self, trigram: Trigram, round: usize) -> u32 {
        let window = if round <= self.k {
            trigram.to_ascii_lowercase()
        } else {
            trigram
        };
        let mut buf = [0u8; 3 + 1 + 20];
        buf[..3].copy_from_slice(&window.0);
        buf[3] = ROUND_SEPARATOR;
        let len = 4 + write_decimal(round, &mut buf[4..]);
        (self.hash.hash(&buf[..len]) % self.v as u64) as u32
    }
}

fn write_decimal(mut n: usize, out: &mut [u8]) -> usize {
    let mut digits = [0u8; 20];
    let mut len = 0;
    loop {
        digits[len] = b'0' + (n % 10) as u8;
        len += 1;
        n /= 10;
        if n == 0 {
            break;
        }
    }
    for i in 0..len {
        out[i] = digits[len - 1 - i];
    }
    len
}

/// Three consecutive bytes of a (boundary-wrapped) token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Trigram(pub [u8; 3]);

impl Trigram {
    pub fn as_bytes(&self) -> &[u8; 3] {
        &self.0
    }

    pub fn to_ascii_lowercase(self) -> Trigram {
        Trigram(self.0.map(|b| b.to_ascii_lowercase()))
    }
}

impl fmt::Display for Trigram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&String::from_utf8_lossy(&self.0))
    }
}

/// Sliding 3-byte windows over ` token ` (boundary spaces added).
pub fn trigrams(token_text: &str) -> Result<Vec<Trigram>> {
    if token_text.is_empty() {
        return Err(Error::input("cannot take trigrams of an empty token"));
    }
    let mut wrapped = Vec::with_capacity(token_text.len() + 2);
    wrapped.push(BOUNDARY);
    wrapped.extend_from_slice(token_text.as_bytes());
    wrapped.push(BOUNDARY);
    Ok(windows(&wrapped))
}

fn windows(bytes: &[u8]) -> Vec<Trigram> {
    bytes
        .windows(3)
        .map(|w| Trigram([w[0], w[1], w[2]]))
        .collect()
}

/// Trigrams the hasher sees for `token`: wrapped text for content tokens,
/// the bare tag for control tokens.
pub fn token_trigrams(token: &Token) -> Vec<Trigram> {
    match token.tag() {
        Some(tag) => windows(tag.as_bytes()),
        None => trigrams(&token.text()).expect("content tokens are never empty"),
    }
}

/// The set of active rows for one token, strictly ascending.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct SparsePattern {
    indices: Vec<u32>,
}

impl SparsePattern {
    pub fn from_indices(mut indices: Vec<u32>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self { indices }
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: u32) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    pub fn intersection_len(&self, other: &SparsePattern) -> usize {
        let (mut a, mut b) = (
            self.indices.iter().peekable(),
            other.indices.iter().peekable(),
        );
        let mut n = 0;
        while let (Some(&&x), Some(&&y)) = (a.peek(), b.peek()) {
            match x.cmp(&y) {
                std::cmp::Ordering::Less => {
                    a.next();
                }
                std::cmp::Ordering::Greater => {
                    b.next();
                }
                std::cmp::Ordering::Equal => {
                    n += 1;
                    a.next();
                    b.next();
                }
            }
        }
        n
    }

    pub fn is_superset_of(&self, other: &SparsePattern) -> bool {
        self.intersection_len(other) == other.len()
    }

    /// Binary expansion into a dense 0/1 vector of length `v`.
    pub fn to_dense(&self, v: usize) -> Vec<f64> {
        let mut y = vec![0.0; v];
        for &i in &self.indices {
            y[i as usize] = 1.0;
        }
        y
    }
}

fn pattern_of(trigrams: &[Trigram], cfg: &TFreeConfig) -> SparsePattern {
    let mut indices = Vec::with_capacity(trigrams.len() * cfg.m);
    for &tri in trigrams {
        for round in 1..=cfg.m {
            indices.push(cfg.index(tri, round));
        }
    }
    SparsePattern::from_indices(indices)
}

/// Activation pattern of a token.
pub fn pattern(token: &Token, cfg: &TFreeConfig) -> SparsePattern {
    pattern_of(&token_trigrams(token), cfg)
}

/// Activation pattern of a content string (wrapped with boundaries).
pub fn text_pattern(token_text: &str, cfg: &TFreeConfig) -> Result<SparsePattern> {
    Ok(pattern_of(&trigrams(token_text)?, cfg))
}

/// Activation pattern of a pseudo-word tag such as `<eot>` (not wrapped).
pub fn tag_pattern(tag: &str, cfg: &TFreeConfig) -> Result<SparsePattern> {
    if tag.len() < 3 {
        return Err(Error::input(format!(
            "tag {tag:?} is shorter than a trigram"
        )));
    }
    Ok(pattern_of(&windows(tag.as_bytes()), cfg))
}

/// Rows produced by the lowercased rounds `1..=k` alone. Any case variant of
/// the token with the same lowercase form activates all of them.
pub fn lowercase_rows(token: &Token, cfg: &TFreeConfig) -> SparsePattern {
    let mut indices = Vec::new();
    for tri in token_trigrams(token) {
        for round in 1..=cfg.k {
            indices.push(cfg.index(tri, round));
        }
    }
    SparsePattern::from_indices(indices)
}

/// Number of rows two tokens share.
pub fn lowercase_overlap(a: &Token, b: &Token, cfg: &TFreeConfig) -> usize {
    pattern(a, cfg).intersection_len(&pattern(b, cfg))
}

/// Memoizes the `m` indices of each trigram. Results are identical to
/// [`pattern`]; only repeated hashing is skipped.
#[derive(Debug)]
pub struct PatternCache {
    cfg: TFreeConfig,
    rows: RwLock<HashMap<Trigram, Box<[u32]>>>,
}

impl PatternCache {
    pub fn new(cfg: TFreeConfig) -> Self {
        Self {
            cfg,
            rows: RwLock::new(HashMap::new()),
        }
    }

    pub fn config(&self) -> &TFreeConfig {
        &self.cfg
    }

    pub fn pattern(&self, token: &Token) -> SparsePattern {
        let trigrams = token_trigrams(token);
        let mut indices = Vec::with_capacity(trigrams.len() * self.cfg.m);
        for tri in trigrams {
            if let Some(rows) = self.rows.read().expect("cache lock").get(&tri) {
                indices.extend_from_slice(rows);
                continue;
            }
            let rows: Box<[u32]> = (1..=self.cfg.m).map(|r| self.cfg.index(tri, r)).collect();
            indices.extend_from_slice(&rows);
            self.rows.write().expect("cache lock").insert(tri, rows);
        }
        SparsePattern::from_indices(indices)
    }

    pub fn len(&self) -> usize {
        self.rows.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Tokens covered by the default conformance file.
pub const GOLDEN_TOKENS: [&str; 20] = [
    "Hello",
    "hello",
    "word",
    "Word",
    "!",
    "2",
    "0",
    "In",
    "the",
    "a",
    "ab",
    "snake_case",
    "café",
    "naïve",
    "Straße",
    "日本語",
    "supercalifragilistic",
    "T-Free",
    "x_y",
    "QQQQ",
];

/// One line of a conformance file: a token and its sorted rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldenRecord {
    pub token: String,
    pub indices: Vec<u32>,
}

/// Writes conformance vectors as `token<TAB>i0 i1 ...` lines after a
/// `# v=.. m=.. k=.. hash=..` header. Tokens must not contain tabs or
/// newlines.
pub fn write_golden<W: Write + ?Sized>(
    out: &mut W,
    cfg: &TFreeConfig,
    tokens: &[&str],
) -> Result<()> {
    writeln!(
        out,
        "# v={} m={} k={} hash={}",
        cfg.v, cfg.m, cfg.k, cfg.hash
    )?;
    for tok in tokens {
        if tok.contains(['\t', '\n', '\r']) {
            return Err(Error::input(format!(
                "golden token {tok:?} contains a tab or newline"
            )));
        }
        let pat = text_pattern(tok, cfg)?;
        let rows: Vec<String> = pat.indices().iter().map(u32::to_string).collect();
        writeln!(out, "{tok}\t{}", rows.join(" "))?;
    }
    Ok(())
}

/// Reads a conformance file back, returning its config and records.
pub fn read_golden<R: BufRead>(input: R) -> Result<(TFreeConfig, Vec<GoldenRecord>)> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format("golden file", "missing header"))??;
    let cfg = parse_golden_header(&header)?;
    let mut records = Vec::new();
    for line in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let (token, rows) = line
            .split_once('\t')
            .ok_or_else(|| Error::format("golden file", format!("no tab in {line:?}")))?;
        let indices = rows
            .split_ascii_whitespace()
            .map(|s| {
                s.parse::<u32>()
                    .map_err(|e| Error::format("golden file", format!("{s:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        records.push(GoldenRecord {
            token: token.to_string(),
            indices,
        });
    }
    Ok((cfg, records))
}

fn parse_golden_header(line: &str) -> Result<TFreeConfig> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| Error::format("golden file", "header must start with '#'"))?;
    let (mut v, mut m, mut k, mut hash) = (None, None, None, HashAlgorithm::default());
    for field in body.split_ascii_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::format("golden file", format!("bad header field {field:?}")))?;
        let num = || {
            value
                .parse::<usize>()
                .map_err(|e| Error::format("golden file", format!("{field:?}: {e}")))
        };
        match key {
            "v" => v = Some(num()?),
            "m" => m = Some(num()?),
            "k" => k = Some(num()?),
            "hash" => hash = value.parse()?,
            _ => {}
        }
    }
    match (v, m, k) {
        (Some(v), Some(m), Some(k)) => TFreeConfig::with_hash(v, m, k, hash),
        _ => Err(Error::format("golden file", "header needs v, m and k")),
    }
}
