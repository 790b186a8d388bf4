use super::ast::Span;
use serde::{Deserialize, Serialize};
use std::fmt;

pub const KEYWORDS: [&str; 13] = [
    "let", "if", "else", "for", "in", "return", "log", "and", "or", "not", "true", "false", "null",
];

const PUNCT2: [&str; 4] = ["==", "!=", "<=", ">="];
const PUNCT1: &str = "()[]{},;=<>+-*/";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Ident,
    Number,
    String,
    Keyword,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    /// Source text of the token; string literals keep their quotes.
    pub lexeme: String,
    pub line: u32,
    pub column: u32,
    pub span: Span,
}

impl Token {
    pub fn is(&self, kind: TokenKind, lexeme: &str) -> bool {
        self.kind == kind && self.lexeme == lexeme
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            TokenKind::Ident => write!(f, "identifier `{}`", self.lexeme),
            TokenKind::Number => write!(f, "number {}", self.lexeme),
            TokenKind::String => write!(f, "string {}", self.lexeme),
            TokenKind::Keyword => write!(f, "keyword `{}`", self.lexeme),
            TokenKind::Punct => write!(f, "`{}`", self.lexeme),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexError {
    pub message: String,
    pub span: Span,
}

impl fmt::Display for LexError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}: {}",
            self.span.line, self.span.column, self.message
        )
    }
}

impl std::error::Error for LexError {}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    column: u32,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.src[self.pos..].chars();
        it.next();
        it.next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn span_from(&self, start: usize, line: u32, column: u32) -> Span {
        Span {
            start,
            end: self.pos,
            line,
            column,
        }
    }
}

/// Decodes the body of a string literal produced by [`tokenize`].
pub fn unescape(lexeme: &str) -> String {
    let inner = &lexeme[1..lexeme.len() - 1];
    let mut out = String::with_capacity(inner.len());
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some('r') => out.push('\r'),
            Some(other) => out.push(other),
            None => {}
        }
    }
    out
}

/// Quotes `s` as a string literal that [`tokenize`] reads back unchanged.
pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    let mut cur = Cursor {
        src,
        pos: 0,
        line: 1,
        column: 1,
    };
    let mut tokens = Vec::new();
    while let Some(c) = cur.peek() {
        let (start, line, column) = (cur.pos, cur.line, cur.column);
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if c == '#' || (c == '/' && cur.peek2() == Some('/')) {
            while cur.peek().is_some_and(|c| c != '\n') {
                cur.bump();
            }
            continue;
        }
        let kind = if c.is_ascii_alphabetic() || c == '_' {
            while cur
                .peek()
                .is_some_and(|c| c.is_ascii_alphanumeric() || c == '_')
            {
                cur.bump();
            }
            if KEYWORDS.contains(&&src[start..cur.pos]) {
                TokenKind::Keyword
            } else {
                TokenKind::Ident
            }
        } else if c.is_ascii_digit() {
            while cur.peek().is_some_and(|c| c.is_ascii_digit()) {
                cur.bump();
            }
            if cur.peek() == Some('.') && cur.peek2().is_some_and(|c| c.is_ascii_digit()) {
                cur.bump();
                while cur.peek().is_some_and(|c| c.is_ascii_digit()) {
                    cur.bump();
                }
            }
            TokenKind::Number
        } else if c == '"' {
            cur.bump();
            loop {
                match cur.bump() {
                    None | Some('\n') => {
                        return Err(LexError {
                            message: "unterminated string".into(),
                            span: cur.span_from(start, line, column),
                        })
                    }
                    Some('"') => break,
                    Some('\\') => match cur.bump() {
                        Some('n' | 't' | 'r' | '"' | '\\') => {}
                        other => {
                            return Err(LexError {
                                message: match other {
                                    Some(e) => format!("unknown escape \\{e}"),
                                    None => "unterminated string".into(),
                                },
                                span: cur.span_from(start, line, column),
                            })
                        }
                    },
                    Some(_) => {}
                }
            }
            TokenKind::String
        } else if PUNCT2.iter().any(|p| src[cur.pos..].starts_with(p)) {
            cur.bump();
            cur.bump();
            TokenKind::Punct
        } else if PUNCT1.contains(c) {
            cur.bump();
            TokenKind::Punct
        } else {
            cur.bump();
            return Err(LexError {
                message: format!("illegal character {c:?}"),
                span: cur.span_from(start, line, column),
            });
        };
        tokens.push(Token {
            kind,
            lexeme: src[start..cur.pos].to_string(),
            line,
            column,
            span: cur.span_from(start, line, column),
        });
    }
    Ok(tokens)
}
