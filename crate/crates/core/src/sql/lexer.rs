//! Tokenizer for the Spider SQL dialect.

use super::SqlError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    /// Bare word, lowercased. Keywords are words too; the parser decides.
    Word(String),
    /// Backtick-quoted identifier, lowercased.
    QuotedIdent(String),
    Number(String),
    Str(String),
    Sym(Sym),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Sym {
    LParen,
    RParen,
    Comma,
    Dot,
    Star,
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
    Plus,
    Minus,
    Slash,
    Semi,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub start: usize,
    pub end: usize,
}

/// What the input looked like at its very end, for prefix checking.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Tail {
    Complete,
    /// Last token is a word that touches the end of input and may still grow.
    PartialWord,
    /// Input ends inside a string literal; the last token holds what was read.
    OpenString,
    /// Input ends with `!`, which only makes sense as the start of `!=`.
    Bang,
    /// Last token is a number touching the end; more characters may turn it
    /// into a word (`1a`).
    PartialNumber,
    /// Input ends with a bare `.`, which may still start a number (`.5`).
    TrailingDot,
}

pub(crate) const RESERVED: &[&str] = &[
    "select", "distinct", "from", "as", "join", "on", "where", "and", "or", "not", "between",
    "in", "like", "is", "null", "group", "by", "having", "order", "asc", "desc", "limit",
    "union", "intersect", "except", "exists",
];

pub(crate) fn is_reserved(word: &str) -> bool {
    RESERVED.contains(&word)
}

pub(crate) fn tokenize(text: &str) -> Result<Vec<Token>, SqlError> {
    lex(text, false).map(|(tokens, _)| tokens)
}

/// Lexes a possibly truncated statement.
pub(crate) fn tokenize_prefix(text: &str) -> Result<(Vec<Token>, Tail), SqlError> {
    lex(text, true)
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn lex(text: &str, prefix: bool) -> Result<(Vec<Token>, Tail), SqlError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut tail = Tail::Complete;
    let mut chars = text.char_indices().peekable();

    while let Some(&(start, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            tail = Tail::Complete;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && bytes.get(start + 1).is_some_and(u8::is_ascii_digit))
        {
            let mut end = start;
            let mut seen_dot = false;
            while let Some(&(i, d)) = chars.peek() {
                if d.is_ascii_digit() {
                    end = i + 1;
                    chars.next();
                } else if d == '.' && !seen_dot {
                    seen_dot = true;
                    end = i + 1;
                    chars.next();
                } else {
                    break;
                }
            }
            // `12abc` is a word in SQLite terms; keep it as one token.
            if chars.peek().is_some_and(|&(_, d)| is_word_char(d)) {
                while let Some(&(i, d)) = chars.peek() {
                    if !is_word_char(d) {
                        break;
                    }
                    end = i + d.len_utf8();
                    chars.next();
                }
                out.push(Token { tok: Tok::Word(text[start..end].to_lowercase()), start, end });
                if end == text.len() {
                    tail = Tail::PartialWord;
                }
                continue;
            }
            out.push(Token { tok: Tok::Number(text[start..end].to_string()), start, end });
            if end == text.len() {
                tail = Tail::PartialNumber;
            }
            continue;
        }
        if is_word_char(c) {
            let mut end = start;
            while let Some(&(i, d)) = chars.peek() {
                if !is_word_char(d) {
                    break;
                }
                end = i + d.len_utf8();
                chars.next();
            }
            out.push(Token { tok: Tok::Word(text[start..end].to_lowercase()), start, end });
            if end == text.len() {
                tail = Tail::PartialWord;
            }
            continue;
        }
        if c == '\'' || c == '"' || c == '`' {
            chars.next();
            let mut value = String::new();
            let mut closed = false;
            let mut end = text.len();
            while let Some((i, d)) = chars.next() {
                if d == c {
                    if chars.peek().is_some_and(|&(_, e)| e == c) {
                        value.push(c);
                        chars.next();
                        continue;
                    }
                    closed = true;
                    end = i + 1;
                    break;
                }
                value.push(d);
            }
            if !closed {
                if prefix {
                    tail = Tail::OpenString;
                } else {
                    return Err(SqlError::Parse {
                        offset: start,
                        message: "unterminated quoted literal".into(),
                    });
                }
            }
            let tok = if c == '`' {
                Tok::QuotedIdent(value.to_lowercase())
            } else {
                Tok::Str(value)
            };
            out.push(Token { tok, start, end });
            continue;
        }
        chars.next();
        let next = chars.peek().map(|&(_, d)| d);
        let sym = match c {
            '(' => Sym::LParen,
            ')' => Sym::RParen,
            ',' => Sym::Comma,
            '.' => Sym::Dot,
            '*' => Sym::Star,
            '+' => Sym::Plus,
            '-' => Sym::Minus,
            '/' => Sym::Slash,
            ';' => Sym::Semi,
            '=' => {
                if next == Some('=') {
                    chars.next();
                }
                Sym::Eq
            }
            '!' => match next {
                Some('=') => {
                    chars.next();
                    Sym::Ne
                }
                None if prefix => {
                    tail = Tail::Bang;
                    Sym::Ne
                }
                _ => {
                    return Err(SqlError::Parse { offset: start, message: "stray `!`".into() })
                }
            },
            '<' => match next {
                Some('=') => {
                    chars.next();
                    Sym::Le
                }
                Some('>') => {
                    chars.next();
                    Sym::Ne
                }
                _ => Sym::Lt,
            },
            '>' => {
                if next == Some('=') {
                    chars.next();
                    Sym::Ge
                } else {
                    Sym::Gt
                }
            }
            other => {
                return Err(SqlError::Parse {
                    offset: start,
                    message: format!("unexpected character `{other}`"),
                })
            }
        };
        let end = chars.peek().map_or(text.len(), |&(i, _)| i);
        if sym == Sym::Dot && end == text.len() && prefix {
            tail = Tail::TrailingDot;
        }
        out.push(Token { tok: Tok::Sym(sym), start, end });
    }
    Ok((out, tail))
}
