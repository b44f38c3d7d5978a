//! A small C/C++ lexer that works on raw bytes.
//!
//! The lexer produces preprocessing tokens with byte spans so that callers can
//! map tokens back onto the exact source text. No preprocessing happens here:
//! directive lines are lexed like any other text and only flagged.

use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Number,
    Str,
    Char,
    /// `<stdio.h>` after `#include`.
    HeaderName,
    Punct,
    Comment,
    /// A byte the lexer could not place in any token class.
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Range<usize>,
    /// 1-based line of the first byte.
    pub line: u32,
    /// Token belongs to a preprocessor directive line.
    pub directive: bool,
}

impl Token {
    pub fn text<'a>(&self, src: &'a [u8]) -> &'a [u8] {
        &src[self.span.clone()]
    }

    pub fn is(&self, src: &[u8], s: &str) -> bool {
        self.kind != TokenKind::Comment && self.text(src) == s.as_bytes()
    }
}

const PUNCT4: &[&str] = &["%:%:"];
const PUNCT3: &[&str] = &["<<=", ">>=", "...", "->*", "<=>"];
const PUNCT2: &[&str] = &[
    "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "*=", "/=", "%=", "+=", "-=", "&=", "^=", "|=",
    "##", "::", ".*", "<:", ":>", "<%", "%>", "%:",
];
const PUNCT1: &[u8] = b"[](){}.&*+-~!/%<>^|?:;=,#";

fn is_ident_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_' || b == b'$' || b >= 0x80
}

fn is_ident_continue(b: u8) -> bool {
    is_ident_start(b) || b.is_ascii_digit()
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    /// No token seen yet on the current logical line.
    line_start: bool,
    in_directive: bool,
    /// Tokens seen so far on the current directive line (for `#include <...>`).
    directive_tokens: u8,
    directive_is_include: bool,
    tokens: Vec<Token>,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a [u8]) -> Self {
        Lexer {
            src,
            pos: 0,
            line: 1,
            line_start: true,
            in_directive: false,
            directive_tokens: 0,
            directive_is_include: false,
            tokens: Vec::new(),
        }
    }

    fn peek(&self, off: usize) -> Option<u8> {
        self.src.get(self.pos + off).copied()
    }

    fn starts_with(&self, s: &str) -> bool {
        self.src[self.pos..].starts_with(s.as_bytes())
    }

    /// Length of a backslash-newline splice at `pos`, if any.
    fn splice_len(&self, pos: usize) -> usize {
        if self.src.get(pos) != Some(&b'\\') {
            return 0;
        }
        match (self.src.get(pos + 1), self.src.get(pos + 2)) {
            (Some(b'\n'), _) => 2,
            (Some(b'\r'), Some(b'\n')) => 3,
            _ => 0,
        }
    }

    fn advance(&mut self, n: usize) {
        for _ in 0..n {
            if self.src[self.pos] == b'\n' {
                self.line += 1;
            }
            self.pos += 1;
        }
    }

    fn push(&mut self, kind: TokenKind, start: usize, line: u32) {
        let directive = self.in_directive;
        if kind != TokenKind::Comment {
            if self.line_start && (&self.src[start..self.pos] == b"#" || &self.src[start..self.pos] == b"%:") {
                self.in_directive = true;
                self.directive_tokens = 0;
                self.directive_is_include = false;
            }
            if self.in_directive {
                if self.directive_tokens == 1 {
                    let word = &self.src[start..self.pos];
                    self.directive_is_include = word == b"include" || word == b"include_next" || word == b"import";
                }
                self.directive_tokens = self.directive_tokens.saturating_add(1);
            }
            self.line_start = false;
        }
        self.tokens.push(Token { kind, span: start..self.pos, line, directive: directive || self.in_directive });
    }

    fn run(mut self) -> Vec<Token> {
        while self.pos < self.src.len() {
            let b = self.src[self.pos];
            let start = self.pos;
            let line = self.line;

            if b == b'\n' {
                self.advance(1);
                self.line_start = true;
                self.in_directive = false;
                continue;
            }
            if b.is_ascii_whitespace() {
                self.advance(1);
                continue;
            }
            let splice = self.splice_len(self.pos);
            if splice > 0 {
                self.advance(splice);
                continue;
            }

            if self.starts_with("//") {
                // Line comment; a trailing backslash continues it.
                while self.pos < self.src.len() {
                    let s = self.splice_len(self.pos);
                    if s > 0 {
                        self.advance(s);
                        continue;
                    }
                    if self.src[self.pos] == b'\n' {
                        break;
                    }
                    self.advance(1);
                }
                self.push(TokenKind::Comment, start, line);
                continue;
            }
            if self.starts_with("/*") {
                self.advance(2);
                let mut closed = false;
                while self.pos < self.src.len() {
                    if self.starts_with("*/") {
                        self.advance(2);
                        closed = true;
                        break;
                    }
                    self.advance(1);
                }
                if !closed {
                    log::warn!("unterminated block comment at line {line}");
                }
                self.push(TokenKind::Comment, start, line);
                continue;
            }

            if self.in_directive && self.directive_is_include && self.directive_tokens == 2 && b == b'<' {
                if let Some(end) = self.src[self.pos..].iter().take_while(|&&c| c != b'\n').position(|&c| c == b'>') {
                    self.advance(end + 1);
                    self.push(TokenKind::HeaderName, start, line);
                    continue;
                }
            }

            if let Some(prefix) = self.literal_prefix() {
                let quote = self.src[self.pos + prefix];
                if prefix > 0 && self.src[self.pos + prefix - 1] == b'R' && quote == b'"' {
                    self.advance(prefix);
                    self.raw_string(line);
                    self.push(TokenKind::Str, start, line);
                } else {
                    self.advance(prefix);
                    self.quoted(quote, line);
                    let kind = if quote == b'"' { TokenKind::Str } else { TokenKind::Char };
                    self.push(kind, start, line);
                }
                continue;
            }

            if is_ident_start(b) {
                while self.pos < self.src.len() && is_ident_continue(self.src[self.pos]) {
                    self.advance(1);
                }
                self.push(TokenKind::Ident, start, line);
                continue;
            }

            if b.is_ascii_digit() || (b == b'.' && self.peek(1).is_some_and(|c| c.is_ascii_digit())) {
                self.advance(1);
                while let Some(c) = self.peek(0) {
                    let exponent_sign =
                        (c == b'+' || c == b'-') && matches!(self.src[self.pos - 1], b'e' | b'E' | b'p' | b'P');
                    if exponent_sign || c.is_ascii_alphanumeric() || c == b'_' || c == b'.' {
                        self.advance(1);
                    } else if c == b'\'' && self.peek(1).is_some_and(|d| d.is_ascii_alphanumeric()) {
                        // C23 / C++14 digit separator
                        self.advance(1);
                    } else {
                        break;
                    }
                }
                self.push(TokenKind::Number, start, line);
                continue;
            }

            let punct_len = PUNCT4
                .iter()
                .chain(PUNCT3)
                .chain(PUNCT2)
                .find(|p| self.starts_with(p))
                .map(|p| p.len())
                .or_else(|| PUNCT1.contains(&b).then_some(1));
            if let Some(n) = punct_len {
                self.advance(n);
                self.push(TokenKind::Punct, start, line);
                continue;
            }

            log::warn!("unlexable byte 0x{b:02x} at line {line}");
            self.advance(1);
            self.push(TokenKind::Unknown, start, line);
        }
        self.tokens
    }

    /// If a string or character literal starts here, the length of its
    /// encoding prefix (`L`, `u8`, `R`, ...).
    fn literal_prefix(&self) -> Option<usize> {
        const PREFIXES: &[&str] = &["u8R", "LR", "uR", "UR", "u8", "R", "L", "u", "U", ""];
        for p in PREFIXES {
            if self.starts_with(p) {
                match self.peek(p.len()) {
                    Some(b'"') => return Some(p.len()),
                    Some(b'\'') if !p.ends_with('R') => return Some(p.len()),
                    _ => {}
                }
            }
        }
        None
    }

    fn quoted(&mut self, quote: u8, line: u32) {
        self.advance(1);
        while let Some(c) = self.peek(0) {
            match c {
                b'\\' => {
                    let n = if self.pos + 1 < self.src.len() { 2 } else { 1 };
                    self.advance(n);
                }
                b'\n' => {
                    log::warn!("unterminated literal at line {line}");
                    return;
                }
                _ if c == quote => {
                    self.advance(1);
                    return;
                }
                _ => self.advance(1),
            }
        }
        log::warn!("unterminated literal at line {line}");
    }

    fn raw_string(&mut self, line: u32) {
        // R"delim( ... )delim"
        self.advance(1);
        let delim_start = self.pos;
        while let Some(c) = self.peek(0) {
            if c == b'(' || c == b'\n' {
                break;
            }
            self.advance(1);
        }
        let mut close = Vec::with_capacity(self.pos - delim_start + 2);
        close.push(b')');
        close.extend_from_slice(&self.src[delim_start..self.pos]);
        close.push(b'"');
        while self.pos < self.src.len() {
            if self.src[self.pos..].starts_with(&close) {
                self.advance(close.len());
                return;
            }
            self.advance(1);
        }
        log::warn!("unterminated raw string at line {line}");
    }
}

/// Lex `src` into tokens, comments included.
pub fn lex(src: &[u8]) -> Vec<Token> {
    Lexer::new(src).run()
}

/// Number of C lexical tokens in `text`. Comments and whitespace count zero;
/// unlexable bytes count one each.
pub fn count_tokens(text: &str) -> usize {
    lex(text.as_bytes()).iter().filter(|t| t.kind != TokenKind::Comment).count()
}
