//! Tokenizer with layout resolution.
//!
//! A declaration starts at column 1; indented lines continue it. Two
//! column-1 lines are glued into one declaration when the first is a lone
//! `@annotation`, or when the first is a signature `f : τ` and the second
//! is the matching definition `f … = e`.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use super::ast::Span;
use crate::rational::{parse_decimal, Q};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Keyword {
    Type,
    Forall,
    Exists,
    Foreach,
    Let,
    In,
    If,
    Then,
    Else,
    And,
    Or,
    Not,
    True,
    False,
    Fold,
    Tensor,
    Vector,
    Index,
    Rat,
    Bool,
    Nat,
    /// The kind `Type` in Pi binders.
    TypeKind,
}

impl Keyword {
    fn lookup(word: &str) -> Option<Keyword> {
        use Keyword::*;
        Some(match word {
            "type" => Type,
            "forall" => Forall,
            "exists" => Exists,
            "foreach" => Foreach,
            "let" => Let,
            "in" => In,
            "if" => If,
            "then" => Then,
            "else" => Else,
            "and" => And,
            "or" => Or,
            "not" => Not,
            "true" => True,
            "false" => False,
            "fold" => Fold,
            "Tensor" => Tensor,
            "Vector" => Vector,
            "Index" => Index,
            "Rat" => Rat,
            "Bool" => Bool,
            "Nat" => Nat,
            "Type" => TypeKind,
            _ => return None,
        })
    }

    pub fn text(self) -> &'static str {
        use Keyword::*;
        match self {
            Type => "type",
            Forall => "forall",
            Exists => "exists",
            Foreach => "foreach",
            Let => "let",
            In => "in",
            If => "if",
            Then => "then",
            Else => "else",
            And => "and",
            Or => "or",
            Not => "not",
            True => "true",
            False => "false",
            Fold => "fold",
            Tensor => "Tensor",
            Vector => "Vector",
            Index => "Index",
            Rat => "Rat",
            Bool => "Bool",
            Nat => "Nat",
            TypeKind => "Type",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Symbol {
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Dot,
    Colon,
    Assign,
    EqEq,
    NotEq,
    Leq,
    Lt,
    Geq,
    Gt,
    Implies,
    Arrow,
    Plus,
    Minus,
    Star,
    Slash,
    Bang,
    Backslash,
}

impl Symbol {
    pub fn text(self) -> &'static str {
        use Symbol::*;
        match self {
            LParen => "(",
            RParen => ")",
            LBracket => "[",
            RBracket => "]",
            Comma => ",",
            Dot => ".",
            Colon => ":",
            Assign => "=",
            EqEq => "==",
            NotEq => "!=",
            Leq => "<=",
            Lt => "<",
            Geq => ">=",
            Gt => ">",
            Implies => "=>",
            Arrow => "->",
            Plus => "+",
            Minus => "-",
            Star => "*",
            Slash => "/",
            Bang => "!",
            Backslash => "\\",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Nat(u64),
    /// Decimal numeral with a fractional part, kept exact.
    Rat(Q),
    /// `@network`, `@dataset`, `@parameter`, `@property`.
    Annotation(String),
    Keyword(Keyword),
    Symbol(Symbol),
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Ident(s) => write!(f, "identifier `{s}`"),
            TokenKind::Nat(n) => write!(f, "numeral `{n}`"),
            TokenKind::Rat(q) => write!(f, "numeral `{}`", crate::rational::format_exact(q)),
            TokenKind::Annotation(a) => write!(f, "`@{a}`"),
            TokenKind::Keyword(k) => write!(f, "`{}`", k.text()),
            TokenKind::Symbol(s) => write!(f, "`{}`", s.text()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
    /// First token of a top-level declaration.
    pub starts_decl: bool,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("{span}: {message}")]
pub struct LexError {
    pub span: Span,
    pub message: String,
}

pub fn tokenize(source: &str) -> Result<Vec<Token>, LexError> {
    let mut tokens = Vec::new();
    // (token index, column) of the first token on each line
    let mut line_heads: Vec<(usize, u32)> = Vec::new();

    for (line_no, line) in source.lines().enumerate() {
        let line_no = line_no as u32 + 1;
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        let mut first = true;
        while i < chars.len() {
            let c = chars[i];
            let span = Span::new(line_no, i as u32 + 1);
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c == '-' && chars.get(i + 1) == Some(&'-') {
                break;
            }
            let start = i;
            let kind = if c.is_ascii_digit() {
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let mut fractional = false;
                if i < chars.len() && chars[i] == '.' {
                    if chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                        i += 1;
                        fractional = true;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    } else if chars.get(i + 1).is_some_and(|d| !d.is_whitespace()) {
                        return Err(LexError { span, message: "malformed numeral".into() });
                    }
                }
                if i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '.') {
                    if !(chars[i] == '.' && !fractional) {
                        return Err(LexError { span, message: "malformed numeral".into() });
                    }
                }
                let text: String = chars[start..i].iter().collect();
                if fractional {
                    TokenKind::Rat(parse_decimal(&text).ok_or_else(|| LexError {
                        span,
                        message: "malformed numeral".into(),
                    })?)
                } else {
                    TokenKind::Nat(text.parse().map_err(|_| LexError {
                        span,
                        message: "numeral out of range".into(),
                    })?)
                }
            } else if c.is_alphabetic() || c == '_' {
                while i < chars.len() && is_ident_char(chars[i]) {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                match Keyword::lookup(&word) {
                    Some(k) => TokenKind::Keyword(k),
                    None => TokenKind::Ident(word),
                }
            } else if c == '@' {
                i += 1;
                while i < chars.len() && is_ident_char(chars[i]) {
                    i += 1;
                }
                let word: String = chars[start + 1..i].iter().collect();
                match word.as_str() {
                    "network" | "dataset" | "parameter" | "property" => TokenKind::Annotation(word),
                    _ => {
                        return Err(LexError { span, message: alloc::format!("unknown annotation `@{word}`") })
                    }
                }
            } else {
                let next = chars.get(i + 1).copied();
                let (sym, width) = match (c, next) {
                    ('=', Some('=')) => (Symbol::EqEq, 2),
                    ('=', Some('>')) => (Symbol::Implies, 2),
                    ('!', Some('=')) => (Symbol::NotEq, 2),
                    ('<', Some('=')) => (Symbol::Leq, 2),
                    ('>', Some('=')) => (Symbol::Geq, 2),
                    ('-', Some('>')) => (Symbol::Arrow, 2),
                    ('=', _) => (Symbol::Assign, 1),
                    ('<', _) => (Symbol::Lt, 1),
                    ('>', _) => (Symbol::Gt, 1),
                    ('(', _) => (Symbol::LParen, 1),
                    (')', _) => (Symbol::RParen, 1),
                    ('[', _) => (Symbol::LBracket, 1),
                    (']', _) => (Symbol::RBracket, 1),
                    (',', _) => (Symbol::Comma, 1),
                    ('.', _) => (Symbol::Dot, 1),
                    (':', _) => (Symbol::Colon, 1),
                    ('+', _) => (Symbol::Plus, 1),
                    ('-', _) => (Symbol::Minus, 1),
                    ('*', _) => (Symbol::Star, 1),
                    ('/', _) => (Symbol::Slash, 1),
                    ('!', _) => (Symbol::Bang, 1),
                    ('\\', _) => (Symbol::Backslash, 1),
                    _ => {
                        return Err(LexError {
                            span,
                            message: alloc::format!("illegal character `{c}`"),
                        })
                    }
                };
                i += width;
                TokenKind::Symbol(sym)
            };
            if first {
                line_heads.push((tokens.len(), span.col));
                first = false;
            }
            tokens.push(Token { kind, span, starts_decl: false });
        }
    }

    resolve_layout(&mut tokens, &line_heads);
    Ok(tokens)
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\''
}

fn resolve_layout(tokens: &mut [Token], line_heads: &[(usize, u32)]) {
    // Column-1 lines open groups; indented lines extend the open group.
    let mut groups: Vec<(usize, usize)> = Vec::new();
    for &(idx, col) in line_heads {
        if col == 1 || groups.is_empty() {
            groups.push((idx, idx));
        }
    }
    for g in 0..groups.len() {
        let end = groups.get(g + 1).map_or(tokens.len(), |next| next.0);
        groups[g].1 = end;
    }

    // `last` is the previous line group on its own; glued groups still
    // decide gluing by their latest line.
    let mut last: Option<(usize, usize)> = None;
    for &(start, end) in &groups {
        let glue = last.is_some_and(|(ps, pe)| {
            let prev = &tokens[ps..pe];
            let cur = &tokens[start..end];
            let lone_annotation = prev.len() == 1 && matches!(prev[0].kind, TokenKind::Annotation(_));
            let prev_is_signature = prev.len() >= 2
                && matches!(prev[0].kind, TokenKind::Ident(_))
                && prev[1].kind == TokenKind::Symbol(Symbol::Colon);
            let cur_is_definition = cur.len() >= 2
                && cur[0].kind == prev[0].kind
                && cur[1].kind != TokenKind::Symbol(Symbol::Colon);
            lone_annotation || (prev_is_signature && cur_is_definition)
        });
        if !glue {
            tokens[start].starts_decl = true;
        }
        last = Some((start, end));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    #[test]
    fn empty_source_has_no_tokens() {
        assert!(tokenize("").unwrap().is_empty());
        assert!(tokenize("-- only a comment\n\n").unwrap().is_empty());
    }

    #[test]
    fn quantifier_tokens() {
        let kinds: Vec<TokenKind> = tokenize("forall x . x >= 0.0").unwrap().into_iter().map(|t| t.kind).collect();
        assert_eq!(
            kinds,
            alloc::vec![
                TokenKind::Keyword(Keyword::Forall),
                TokenKind::Ident("x".into()),
                TokenKind::Symbol(Symbol::Dot),
                TokenKind::Ident("x".into()),
                TokenKind::Symbol(Symbol::Geq),
                TokenKind::Rat(int(0)),
            ]
        );
    }

    #[test]
    fn illegal_character_reports_position() {
        let err = tokenize("safe = 1\nx = 2 # 3").unwrap_err();
        assert_eq!(err.span, Span::new(2, 7));
    }

    #[test]
    fn malformed_numerals() {
        assert!(tokenize("x = 1.2.3").is_err());
        assert!(tokenize("x = 12abc").is_err());
        assert!(tokenize("x = 1.e").is_err());
    }

    #[test]
    fn signature_and_definition_form_one_declaration() {
        let src = "f : Rat -> Rat\nf x = x\n\ng : Rat\ng = 1.0\n@property\np : Bool\np = true\n";
        let starts = tokenize(src).unwrap().iter().filter(|t| t.starts_decl).count();
        assert_eq!(starts, 3);
    }

    #[test]
    fn indented_lines_continue() {
        let src = "p : Bool\np = true and\n  false\nq = 1";
        let toks = tokenize(src).unwrap();
        assert_eq!(toks.iter().filter(|t| t.starts_decl).count(), 2);
    }
}
