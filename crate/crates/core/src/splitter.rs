//! Word splitting and reconstruction.
//!
//! Text is cut into words (runs of word characters), single digits and
//! single special characters. Whitespace between two of those is implicit
//! whenever it matches what the rule set predicts; otherwise it is spelled
//! out with `<ws>`/`<no_ws>` control tokens so that [`join`] can rebuild the
//! original text byte for byte.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Characters before which no whitespace is implied.
pub const DEFAULT_NO_WS_BEFORE: &str = "$.,;:#?!=-+*/\\()<>[]&@";
/// Characters after which no whitespace is implied.
pub const DEFAULT_NO_WS_AFTER: &str = "#$=-+*/'\\\"(<[~^&@";

pub const DEFAULT_MAX_TOKEN_BYTES: usize = 32;
const MIN_TOKEN_BYTES: usize = 4;
const MAX_RUN_LEVEL: u8 = 3;

/// The whitespace character a whitespace token stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Whitespace {
    Space,
    Newline,
    /// Tabs, carriage returns and any other Unicode whitespace. Never merged
    /// into runs.
    Other(char),
}

impl Whitespace {
    fn from_char(c: char) -> Self {
        match c {
            ' ' => Whitespace::Space,
            '\n' => Whitespace::Newline,
            other => Whitespace::Other(other),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Whitespace::Space => ' ',
            Whitespace::Newline => '\n',
            Whitespace::Other(c) => c,
        }
    }

    fn mergeable(self) -> bool {
        !matches!(self, Whitespace::Other(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Word,
    Digit,
    Special,
    Ws,
    NoWs,
    WsRun,
}

impl TokenKind {
    pub fn name(self) -> &'static str {
        match self {
            TokenKind::Word => "word",
            TokenKind::Digit => "digit",
            TokenKind::Special => "special",
            TokenKind::Ws => "ws",
            TokenKind::NoWs => "no_ws",
            TokenKind::WsRun => "ws_run",
        }
    }
}

/// One atomic unit of split text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Token {
    /// A run of word characters (letters, underscore, non-ASCII-digit
    /// alphanumerics).
    Word(String),
    /// One of `0`..=`9`.
    Digit(char),
    /// One character that is neither a word character, a digit nor
    /// whitespace.
    Special(char),
    /// A single explicit whitespace character.
    Ws(Whitespace),
    /// Explicit absence of the whitespace the rule set would insert.
    NoWs,
    /// `2^level` consecutive copies of one whitespace character.
    WsRun(Whitespace, u8),
}

impl Token {
    pub fn kind(&self) -> TokenKind {
        match self {
            Token::Word(_) => TokenKind::Word,
            Token::Digit(_) => TokenKind::Digit,
            Token::Special(_) => TokenKind::Special,
            Token::Ws(_) => TokenKind::Ws,
            Token::NoWs => TokenKind::NoWs,
            Token::WsRun(..) => TokenKind::WsRun,
        }
    }

    pub fn is_control(&self) -> bool {
        matches!(self, Token::Ws(_) | Token::NoWs | Token::WsRun(..))
    }

    /// The text a content token contributes. Empty for control tokens.
    pub fn text(&self) -> String {
        match self {
            Token::Word(w) => w.clone(),
            Token::Digit(c) | Token::Special(c) => c.to_string(),
            _ => String::new(),
        }
    }

    /// Canonical tag of a control token, e.g. `<ws>`, `<no_ws>`, `<ws4>`.
    /// Newline tokens use `<nl>`, `<nl2>` and so on; other whitespace is
    /// tagged with the character itself, e.g. `<ws\t>`.
    pub fn tag(&self) -> Option<String> {
        let base = |ws: Whitespace| match ws {
            Whitespace::Space => "ws".to_string(),
            Whitespace::Newline => "nl".to_string(),
            Whitespace::Other(c) => format!("ws{c}"),
        };
        match *self {
            Token::Ws(ws) => Some(format!("<{}>", base(ws))),
            Token::NoWs => Some("<no_ws>".to_string()),
            Token::WsRun(ws, level) => Some(format!("<{}{}>", base(ws), 1u32 << level)),
            _ => None,
        }
    }

    /// The string the trigram hasher consumes: the word text for content
    /// tokens, the tag for control tokens.
    pub fn hash_key(&self) -> String {
        self.tag().unwrap_or_else(|| self.text())
    }

    /// Parses a canonical control tag back into its token.
    pub fn from_tag(tag: &str) -> Option<Token> {
        let inner = tag.strip_prefix('<')?.strip_suffix('>')?;
        if inner == "no_ws" {
            return Some(Token::NoWs);
        }
        let (ws, count) = if let Some(rest) = inner.strip_prefix("nl") {
            (Whitespace::Newline, rest)
        } else {
            let rest = inner.strip_prefix("ws")?;
            let mut chars = rest.chars();
            match chars.next() {
                Some(c) if c.is_whitespace() && c != ' ' && c != '\n' => {
                    return chars
                        .as_str()
                        .is_empty()
                        .then_some(Token::Ws(Whitespace::Other(c)));
                }
                _ => (Whitespace::Space, rest),
            }
        };
        match count {
            "" => Some(Token::Ws(ws)),
            "2" => Some(Token::WsRun(ws, 1)),
            "4" => Some(Token::WsRun(ws, 2)),
            "8" => Some(Token::WsRun(ws, 3)),
            _ => None,
        }
    }

    /// Interprets a single dictionary or vocabulary entry as exactly one
    /// token: either a control tag or a string that splits into one content
    /// token.
    pub fn parse(entry: &str, cfg: &SplitConfig) -> Result<Token> {
        if let Some(tok) = Token::from_tag(entry) {
            return Ok(tok);
        }
        let mut tokens = split(entry, cfg);
        match (tokens.len(), tokens.first()) {
            (1, Some(t)) if !t.is_control() => Ok(tokens.remove(0)),
            _ => Err(Error::input(format!("{entry:?} is not a single token"))),
        }
    }

    fn write_surface(&self, out: &mut String) {
        match self {
            Token::Word(w) => out.push_str(w),
            Token::Digit(c) | Token::Special(c) => out.push(*c),
            Token::Ws(ws) => out.push(ws.as_char()),
            Token::NoWs => {}
            Token::WsRun(ws, level) => {
                for _ in 0..(1usize << level) {
                    out.push(ws.as_char());
                }
            }
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.tag() {
            Some(tag) => f.write_str(&tag),
            None => f.write_str(&self.text()),
        }
    }
}

/// Options for [`split`] and [`join`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitConfig {
    max_token_bytes: usize,
    favor_no_ws_before: BTreeSet<char>,
    favor_no_ws_after: BTreeSet<char>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            max_token_bytes: DEFAULT_MAX_TOKEN_BYTES,
            favor_no_ws_before: DEFAULT_NO_WS_BEFORE.chars().collect(),
            favor_no_ws_after: DEFAULT_NO_WS_AFTER.chars().collect(),
        }
    }
}

impl SplitConfig {
    pub fn new(max_token_bytes: usize) -> Result<Self> {
        Self::default().with_max_token_bytes(max_token_bytes)
    }

    pub fn with_max_token_bytes(mut self, max_token_bytes: usize) -> Result<Self> {
        if max_token_bytes < MIN_TOKEN_BYTES {
            return Err(Error::input(format!(
                "max_token_bytes must be at least {MIN_TOKEN_BYTES}, got {max_token_bytes}"
            )));
        }
        self.max_token_bytes = max_token_bytes;
        Ok(self)
    }

    pub fn with_no_ws_before(mut self, chars: &str) -> Self {
        self.favor_no_ws_before = chars.chars().collect();
        self
    }

    pub fn with_no_ws_after(mut self, chars: &str) -> Self {
        self.favor_no_ws_after = chars.chars().collect();
        self
    }

    pub fn max_token_bytes(&self) -> usize {
        self.max_token_bytes
    }

    pub fn favor_no_ws_before(&self) -> &BTreeSet<char> {
        &self.favor_no_ws_before
    }

    pub fn favor_no_ws_after(&self) -> &BTreeSet<char> {
        &self.favor_no_ws_after
    }

    /// Whether a single space is implied between two adjacent content
    /// tokens. Either rule suppressing whitespace wins.
    pub fn implies_space(&self, left: &Token, right: &Token) -> bool {
        let no_ws_after = match left {
            Token::Digit(_) => true,
            Token::Special(c) => self.favor_no_ws_after.contains(c),
            _ => false,
        };
        let no_ws_before = match right {
            Token::Special(c) => self.favor_no_ws_before.contains(c),
            Token::Digit(_) => matches!(left, Token::Digit(_)),
            _ => false,
        };
        !(no_ws_after || no_ws_before)
    }
}

pub fn is_word_char(c: char) -> bool {
    c == '_' || (c.is_alphanumeric() && !c.is_ascii_digit())
}

enum Piece {
    Content(Token),
    Space(char),
}

/// Splits `text` into tokens. See the module docs for the whitespace rules.
pub fn split(text: &str, cfg: &SplitConfig) -> Vec<Token> {
    let pieces = pieces(text, cfg.max_token_bytes);

    let mut out = Vec::with_capacity(pieces.len());
    let mut gap = String::new();
    let mut last: Option<usize> = None;

    for piece in pieces {
        match piece {
            Piece::Space(c) => gap.push(c),
            Piece::Content(tok) => {
                match last.map(|i| &out[i]) {
                    Some(prev) => {
                        let implied = cfg.implies_space(prev, &tok);
                        match (gap.as_str(), implied) {
                            ("", true) => out.push(Token::NoWs),
                            (" ", true) | ("", false) => {}
                            (g, _) => push_literal_whitespace(g, &mut out),
                        }
                    }
                    None => push_literal_whitespace(&gap, &mut out),
                }
                gap.clear();
                out.push(tok);
                last = Some(out.len() - 1);
            }
        }
    }
    push_literal_whitespace(&gap, &mut out);
    out
}

/// Validates UTF-8 before splitting.
pub fn split_bytes(bytes: &[u8], cfg: &SplitConfig) -> Result<Vec<Token>> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::input(format!("text is not valid UTF-8: {e}")))?;
    Ok(split(text, cfg))
}

fn pieces(text: &str, max_bytes: usize) -> Vec<Piece> {
    let mut out = Vec::new();
    let mut word_start: Option<usize> = None;

    let flush = |out: &mut Vec<Piece>, word: &str| {
        for chunk in chunk_word(word, max_bytes) {
            out.push(Piece::Content(Token::Word(chunk.to_string())));
        }
    };

    for (i, c) in text.char_indices() {
        if is_word_char(c) {
            word_start.get_or_insert(i);
            continue;
        }
        if let Some(start) = word_start.take() {
            flush(&mut out, &text[start..i]);
        }
        out.push(if c.is_ascii_digit() {
            Piece::Content(Token::Digit(c))
        } else if c.is_whitespace() {
            Piece::Space(c)
        } else {
            Piece::Content(Token::Special(c))
        });
    }
    if let Some(start) = word_start {
        flush(&mut out, &text[start..]);
    }
    out
}

/// Cuts a word into pieces of at most `max_bytes` bytes on char boundaries.
fn chunk_word(word: &str, max_bytes: usize) -> impl Iterator<Item = &str> {
    let mut rest = word;
    std::iter::from_fn(move || {
        if rest.is_empty() {
            return None;
        }
        let mut end = rest.len().min(max_bytes);
        while !rest.is_char_boundary(end) {
            end -= 1;
        }
        let (head, tail) = rest.split_at(end);
        rest = tail;
        Some(head)
    })
}

fn push_literal_whitespace(gap: &str, out: &mut Vec<Token>) {
    let mut chars = gap.chars().peekable();
    while let Some(c) = chars.next() {
        let ws = Whitespace::from_char(c);
        if !ws.mergeable() {
            out.push(Token::Ws(ws));
            continue;
        }
        let mut run = 1usize;
        while chars.peek() == Some(&c) {
            chars.next();
            run += 1;
        }
        for level in (1..=MAX_RUN_LEVEL).rev() {
            let size = 1usize << level;
            while run >= size {
                out.push(Token::WsRun(ws, level));
                run -= size;
            }
        }
        if run == 1 {
            out.push(Token::Ws(ws));
        }
    }
}

/// Rebuilds text from tokens, inserting the whitespace the rule set implies
/// unless explicit control tokens say otherwise.
pub fn join(tokens: &[Token], cfg: &SplitConfig) -> String {
    let mut out = String::new();
    let mut last: Option<&Token> = None;
    let mut pending: Vec<&Token> = Vec::new();

    for tok in tokens {
        if tok.is_control() {
            pending.push(tok);
            continue;
        }
        let explicit = pending.iter().any(|t| !matches!(t, Token::NoWs));
        if explicit {
            pending.iter().for_each(|t| t.write_surface(&mut out));
        } else if let Some(prev) = last {
            if pending.is_empty() && cfg.implies_space(prev, tok) {
                out.push(' ');
            }
        }
        pending.clear();
        tok.write_surface(&mut out);
        last = Some(tok);
    }
    pending.iter().for_each(|t| t.write_surface(&mut out));
    out
}
