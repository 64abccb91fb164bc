//! Tokenizer for equilibrium and plan documents.

use super::{Diagnostic, Severity};

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    /// Decimal literal, kept as written.
    Number(String),
    Str(String),
    Punct(char),
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    /// 1-based line and column of the first character.
    pub line: usize,
    pub column: usize,
    pub text: String,
}

impl Token {
    pub fn is_punct(&self, c: char) -> bool {
        self.kind == TokenKind::Punct(c)
    }

    pub fn is_word(&self, w: &str) -> bool {
        matches!(&self.kind, TokenKind::Ident(s) if s == w)
    }
}

const PUNCT: &[char] = &['{', '}', '(', ')', ',', '.', ':', '=', ';'];

fn ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, Vec<Diagnostic>> {
    let chars: Vec<char> = src.chars().collect();
    let mut tokens = Vec::new();
    let mut errors = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        let advance = |i: &mut usize, col: &mut usize| {
            *i += 1;
            *col += 1;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(&mut i, &mut col);
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut col);
            }
            continue;
        }
        if ident_start(c) {
            let begin = i;
            while i < chars.len() && ident_continue(chars[i]) {
                advance(&mut i, &mut col);
            }
            let text: String = chars[begin..i].iter().collect();
            tokens.push(Token {
                kind: TokenKind::Ident(text.clone()),
                line: start_line,
                column: start_col,
                text,
            });
            continue;
        }
        let negative = c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit());
        if c.is_ascii_digit() || negative {
            let begin = i;
            if negative {
                advance(&mut i, &mut col);
            }
            while i < chars.len() && chars[i].is_ascii_digit() {
                advance(&mut i, &mut col);
            }
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                advance(&mut i, &mut col);
                while i < chars.len() && chars[i].is_ascii_digit() {
                    advance(&mut i, &mut col);
                }
            }
            let text: String = chars[begin..i].iter().collect();
            tokens.push(Token {
                kind: TokenKind::Number(text.clone()),
                line: start_line,
                column: start_col,
                text,
            });
            continue;
        }
        if c == '"' {
            let begin = i;
            advance(&mut i, &mut col);
            let mut value = String::new();
            let mut closed = false;
            while i < chars.len() {
                match chars[i] {
                    '"' => {
                        advance(&mut i, &mut col);
                        closed = true;
                        break;
                    }
                    '\\' if i + 1 < chars.len() => {
                        let esc = chars[i + 1];
                        value.push(match esc {
                            'n' => '\n',
                            't' => '\t',
                            other => other,
                        });
                        advance(&mut i, &mut col);
                        if esc == '\n' {
                            i += 1;
                            line += 1;
                            col = 1;
                        } else {
                            advance(&mut i, &mut col);
                        }
                    }
                    '\n' => break,
                    other => {
                        value.push(other);
                        advance(&mut i, &mut col);
                    }
                }
            }
            let text: String = chars[begin..i].iter().collect();
            if !closed {
                errors.push(Diagnostic {
                    line: start_line,
                    column: start_col,
                    severity: Severity::Error,
                    message: "unterminated string".to_owned(),
                    token: text,
                });
                continue;
            }
            tokens.push(Token {
                kind: TokenKind::Str(value),
                line: start_line,
                column: start_col,
                text,
            });
            continue;
        }
        if PUNCT.contains(&c) {
            advance(&mut i, &mut col);
            tokens.push(Token {
                kind: TokenKind::Punct(c),
                line: start_line,
                column: start_col,
                text: c.to_string(),
            });
            continue;
        }
        errors.push(Diagnostic {
            line: start_line,
            column: start_col,
            severity: Severity::Error,
            message: format!("unexpected character {c:?}"),
            token: c.to_string(),
        });
        advance(&mut i, &mut col);
    }
    if !errors.is_empty() {
        return Err(errors);
    }
    tokens.push(Token {
        kind: TokenKind::Eof,
        line,
        column: col,
        text: String::new(),
    });
    Ok(tokens)
}
