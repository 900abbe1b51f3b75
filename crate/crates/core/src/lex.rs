//! Shared tokenizer for the schema and scenario languages.
//!
//! Tokens borrow identifier text from the input; nothing is allocated
//! until the parser stores a name in the syntax tree.

use crate::error::{Error, Pos, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum TokenKind<'a> {
    Ident(&'a str),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Colon,
    Semi,
    Comma,
    Dot,
    Assign, // :=
    Eof,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Token<'a> {
    pub kind: TokenKind<'a>,
    pub pos: Pos,
}

impl Token<'_> {
    pub fn describe(&self) -> String {
        match self.kind {
            TokenKind::Ident(s) => format!("`{s}`"),
            TokenKind::LBrace => "`{`".into(),
            TokenKind::RBrace => "`}`".into(),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
            TokenKind::Colon => "`:`".into(),
            TokenKind::Semi => "`;`".into(),
            TokenKind::Comma => "`,`".into(),
            TokenKind::Dot => "`.`".into(),
            TokenKind::Assign => "`:=`".into(),
            TokenKind::Eof => "end of input".into(),
        }
    }
}

/// Tokenize `//`-commented source into identifiers and punctuation.
pub(crate) fn tokenize(text: &str) -> Result<Vec<Token<'_>>> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut at = 0usize;
    let mut line: u32 = 1;
    let mut col: u32 = 1;

    macro_rules! punct {
        ($kind:expr, $pos:expr) => {{
            tokens.push(Token {
                kind: $kind,
                pos: $pos,
            });
            at += 1;
            col += 1;
        }};
    }

    while at < bytes.len() {
        let pos = Pos { line, col };
        match bytes[at] {
            b'\n' => {
                at += 1;
                line += 1;
                col = 1;
            }
            b' ' | b'\t' | b'\r' => {
                at += 1;
                col += 1;
            }
            b'/' => {
                if bytes.get(at + 1) == Some(&b'/') {
                    while at < bytes.len() && bytes[at] != b'\n' {
                        at += 1;
                    }
                } else {
                    return Err(Error::Syntax {
                        pos,
                        msg: "expected `//` comment".into(),
                    });
                }
            }
            b'{' => punct!(TokenKind::LBrace, pos),
            b'}' => punct!(TokenKind::RBrace, pos),
            b'(' => punct!(TokenKind::LParen, pos),
            b')' => punct!(TokenKind::RParen, pos),
            b';' => punct!(TokenKind::Semi, pos),
            b',' => punct!(TokenKind::Comma, pos),
            b'.' => punct!(TokenKind::Dot, pos),
            b':' => {
                if bytes.get(at + 1) == Some(&b'=') {
                    tokens.push(Token {
                        kind: TokenKind::Assign,
                        pos,
                    });
                    at += 2;
                    col += 2;
                } else {
                    punct!(TokenKind::Colon, pos);
                }
            }
            _ => {
                let first = text[at..].chars().next().expect("in bounds");
                if !(first.is_alphabetic() || first == '_') {
                    return Err(Error::Syntax {
                        pos,
                        msg: format!("unexpected character `{first}`"),
                    });
                }
                let start = at;
                while at < bytes.len() {
                    let c = bytes[at];
                    if c.is_ascii_alphanumeric() || c == b'_' {
                        at += 1;
                    } else if !c.is_ascii() {
                        let ch = text[at..].chars().next().expect("in bounds");
                        if ch.is_alphanumeric() {
                            at += ch.len_utf8();
                        } else {
                            break;
                        }
                    } else {
                        break;
                    }
                }
                let ident = &text[start..at];
                col += ident.chars().count() as u32;
                tokens.push(Token {
                    kind: TokenKind::Ident(ident),
                    pos,
                });
            }
        }
    }
    tokens.push(Token {
        kind: TokenKind::Eof,
        pos: Pos { line, col },
    });
    Ok(tokens)
}

/// Cursor over a token stream with single-token lookahead.
pub(crate) struct Cursor<'a> {
    tokens: Vec<Token<'a>>,
    at: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(tokens: Vec<Token<'a>>) -> Self {
        Cursor { tokens, at: 0 }
    }

    pub fn peek(&self) -> &Token<'a> {
        &self.tokens[self.at.min(self.tokens.len() - 1)]
    }

    pub fn next(&mut self) -> Token<'a> {
        let t = *self.peek();
        if self.at < self.tokens.len() - 1 {
            self.at += 1;
        }
        t
    }

    pub fn at_eof(&self) -> bool {
        self.peek().kind == TokenKind::Eof
    }

    pub fn expect_ident(&mut self, what: &str) -> Result<(&'a str, Pos)> {
        let t = self.next();
        match t.kind {
            TokenKind::Ident(s) => Ok((s, t.pos)),
            _ => Err(Error::Syntax {
                pos: t.pos,
                msg: format!("expected {what}, found {}", t.describe()),
            }),
        }
    }

    /// Consume an identifier token that must equal `kw`.
    pub fn expect_keyword(&mut self, kw: &str) -> Result<Pos> {
        let t = self.next();
        match t.kind {
            TokenKind::Ident(s) if s == kw => Ok(t.pos),
            _ => Err(Error::Syntax {
                pos: t.pos,
                msg: format!("expected `{kw}`, found {}", t.describe()),
            }),
        }
    }

    pub fn expect(&mut self, kind: TokenKind<'static>, what: &str) -> Result<Pos> {
        let t = self.next();
        if t.kind == kind {
            Ok(t.pos)
        } else {
            Err(Error::Syntax {
                pos: t.pos,
                msg: format!("expected {what}, found {}", t.describe()),
            })
        }
    }

    /// True and consumed if the next token is the identifier `kw`.
    pub fn eat_keyword(&mut self, kw: &str) -> bool {
        if let TokenKind::Ident(s) = self.peek().kind {
            if s == kw {
                self.next();
                return true;
            }
        }
        false
    }

    pub fn eat(&mut self, kind: TokenKind<'static>) -> bool {
        if self.peek().kind == kind {
            self.next();
            return true;
        }
        false
    }
}
