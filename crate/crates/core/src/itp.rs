//! Proof-assistant interface text.
//!
//! A verified property is exported as an Agda-style module: the program's
//! type synonyms and definitions are rendered as they were written, the
//! external resources and the property itself become postulates, and a
//! header records the cache directory and manifest hash together with a
//! pragma that re-runs the cache check. Keywords and operators are
//! rendered through a [`RenderTable`], and [`unrender`] maps the text back
//! so the round trip can be checked structurally.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::frontend::{print_decl, print_expr, print_type, Decl, DeclKind, Program, TypeKind};

/// `(key, source spelling, default target spelling)` for every token the
/// table renders. Tokens not listed are copied verbatim.
pub const TOKENS: &[(&str, &str, &str)] = &[
    ("rat", "Rat", "ℚ"),
    ("bool", "Bool", "Bool"),
    ("nat", "Nat", "ℕ"),
    ("tensor", "Tensor", "Tensor"),
    ("vector", "Vector", "Vector"),
    ("index", "Index", "Fin"),
    ("kind", "Type", "Set"),
    ("arrow", "->", "→"),
    ("binder", ".", "→"),
    ("implies", "=>", "→"),
    ("forall", "forall", "∀"),
    ("foreach", "foreach", "∀"),
    ("exists", "exists", "∃"),
    ("lambda", "\\", "λ"),
    ("and", "and", "∧"),
    ("or", "or", "∨"),
    ("not", "not", "¬"),
    ("eq", "==", "≡"),
    ("neq", "!=", "≢"),
    ("le", "<=", "≤"),
    ("lt", "<", "<"),
    ("ge", ">=", "≥"),
    ("gt", ">", ">"),
    ("add", "+", "+"),
    ("sub", "-", "-"),
    ("mul", "*", "*"),
    ("div", "/", "/"),
    ("lookup", "!", "!"),
    ("true", "true", "true"),
    ("false", "false", "false"),
    ("if", "if", "if"),
    ("then", "then", "then"),
    ("else", "else", "else"),
    ("let", "let", "let"),
    ("in", "in", "in"),
    ("fold", "fold", "fold"),
];

/// Settings outside the token map.
pub const SETTINGS: &[(&str, &str)] = &[
    ("universe", "Set"),
    ("comment", "--"),
    ("imports", "open import Data.Bool using (Bool; true; false)\nopen import Data.Rational using (ℚ)"),
    ("check_command", "specbridge check-cache"),
    ("pragma", "SPECBRIDGE-CHECK"),
];

// Source spellings whose target may coincide; told apart by position.
const ARROWS: [&str; 3] = ["->", ".", "=>"];

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ExportError {
    #[error("property `{property}` is {status}; only verified properties are exported (use --allow-unverified to override)")]
    NotVerified { property: String, status: String },
    #[error("no property named `{0}`")]
    UnknownProperty(String),
    #[error("only Bool properties can be exported; `{name}` has type {ty}")]
    PropertyType { name: String, ty: String },
    #[error("unknown rendering table key `{0}`")]
    UnknownKey(String),
    #[error("rendering table maps both `{a}` and `{b}` to `{target}`")]
    AmbiguousTable { a: String, b: String, target: String },
    #[error("rendering table entry `{0}` is empty")]
    EmptyEntry(String),
    #[error("identifier `{name}` clashes with the rendering of `{token}`")]
    NameClash { name: String, token: String },
    #[error("line {line}: {detail}")]
    Malformed { line: usize, detail: String },
}

impl ExportError {
    pub fn code(&self) -> &'static str {
        match self {
            ExportError::NotVerified { .. } => "E-NOT-VERIFIED",
            ExportError::UnknownProperty(_) => "E-UNKNOWN-PROPERTY",
            ExportError::PropertyType { .. } => "E-UNSUPPORTED",
            ExportError::UnknownKey(_) | ExportError::AmbiguousTable { .. } | ExportError::EmptyEntry(_) => "E-RENDER-TABLE",
            ExportError::NameClash { .. } => "E-NAME-CLASH",
            ExportError::Malformed { .. } => "E-MALFORMED",
        }
    }
}

/// Target spellings for source tokens, plus a few layout settings.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RenderTable {
    tokens: BTreeMap<String, String>,
    settings: BTreeMap<String, String>,
}

impl Default for RenderTable {
    fn default() -> Self {
        RenderTable {
            tokens: TOKENS.iter().map(|(k, _, v)| (k.to_string(), v.to_string())).collect(),
            settings: SETTINGS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

impl RenderTable {
    /// Overrides one entry, token or setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ExportError> {
        if let Some(slot) = self.tokens.get_mut(key).or_else(|| self.settings.get_mut(key)) {
            *slot = value.to_string();
            Ok(())
        } else {
            Err(ExportError::UnknownKey(key.to_string()))
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.tokens.get(key).or_else(|| self.settings.get(key)).map(String::as_str)
    }

    fn setting(&self, key: &str) -> &str {
        &self.settings[key]
    }

    /// Every target spelling must be non-empty, free of whitespace and
    /// unique, except that the three arrow-like tokens may share one.
    pub fn validate(&self) -> Result<(), ExportError> {
        let mut seen: BTreeMap<&str, &str> = BTreeMap::new();
        for (key, source, _) in TOKENS {
            let target = self.tokens[*key].as_str();
            if target.is_empty() || target.chars().any(char::is_whitespace) {
                return Err(ExportError::EmptyEntry(key.to_string()));
            }
            if let Some(prev) = seen.insert(target, source) {
                let both_arrows = ARROWS.contains(&prev) && ARROWS.contains(source);
                let both_forall = [prev, *source].iter().all(|s| *s == "forall" || *s == "foreach");
                if !(both_arrows || both_forall) {
                    return Err(ExportError::AmbiguousTable { a: prev.into(), b: source.to_string(), target: target.into() });
                }
            }
        }
        for key in ["universe", "comment", "pragma"] {
            if self.settings[key].trim().is_empty() {
                return Err(ExportError::EmptyEntry(key.into()));
            }
        }
        Ok(())
    }

    fn forward(&self) -> BTreeMap<&str, &str> {
        TOKENS.iter().map(|(k, s, _)| (*s, self.tokens[*k].as_str())).collect()
    }

    fn backward(&self) -> BTreeMap<&str, Vec<&'static str>> {
        let mut out: BTreeMap<&str, Vec<&'static str>> = BTreeMap::new();
        for (k, s, _) in TOKENS {
            out.entry(self.tokens[*k].as_str()).or_default().push(s);
        }
        out
    }
}

/// Where the exported property's backing evidence lives.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CacheRef {
    pub dir: String,
    pub hash_algorithm: String,
    pub manifest_hash: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExportRequest<'a> {
    pub property: &'a str,
    pub module: &'a str,
    pub source_name: &'a str,
    pub cache: &'a CacheRef,
    /// Status name read from the cache.
    pub status: &'a str,
    pub allow_unverified: bool,
}

/// Module name derived from a file stem: alphanumeric words, capitalised.
pub fn module_name(stem: &str) -> String {
    let mut out = String::new();
    for word in stem.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()) {
        let mut chars = word.chars();
        if let Some(first) = chars.next() {
            out.extend(first.to_uppercase());
            out.extend(chars);
        }
    }
    if out.is_empty() || out.starts_with(|c: char| c.is_ascii_digit()) {
        out.insert_str(0, "Spec");
    }
    out
}

/// Renders the interface module for `req.property`. Other properties are
/// left out.
pub fn export_interface(program: &Program, table: &RenderTable, req: &ExportRequest<'_>) -> Result<String, ExportError> {
    table.validate()?;
    let verified = req.status == "Verified";
    if !verified && !req.allow_unverified {
        return Err(ExportError::NotVerified { property: req.property.into(), status: req.status.into() });
    }
    let decls = exported_decls(program, req.property)?;
    check_clashes(&decls, table)?;

    let c = table.setting("comment");
    let mut out = String::new();
    out.push_str(&format!("{c} Interface for property `{}` of {}.\n", req.property, req.source_name));
    out.push_str(&format!("{c} cache: {}\n", req.cache.dir));
    out.push_str(&format!("{c} manifest {}: {}\n", req.cache.hash_algorithm, req.cache.manifest_hash));
    out.push_str(&format!("{c} status: {}\n", req.status));
    if !verified {
        out.push_str(&format!(
            "{c} UNCHECKED: `{}` is {}, not Verified. The postulate below is not backed by the cache.\n",
            req.property, req.status
        ));
    }
    out.push_str(&format!(
        "{{-# {} {} --cache-dir {} #-}}\n\n",
        table.setting("pragma"),
        table.setting("check_command"),
        req.cache.dir
    ));
    out.push_str(&format!("module {} where\n\n", req.module));
    let imports = table.setting("imports");
    if !imports.trim().is_empty() {
        out.push_str(imports.trim_end());
        out.push_str("\n\n");
    }
    for d in decls {
        out.push_str(&render_decl(d, table));
        out.push('\n');
    }
    Ok(out)
}

fn exported_decls<'a>(program: &'a Program, property: &str) -> Result<Vec<&'a Decl>, ExportError> {
    let Some((_, target)) = program.decl(property).filter(|(_, d)| d.kind == DeclKind::Property) else {
        return Err(ExportError::UnknownProperty(property.into()));
    };
    if let Some(sig) = &target.signature {
        if !matches!(sig.kind, TypeKind::Bool) {
            return Err(ExportError::PropertyType { name: property.into(), ty: print_type(sig) });
        }
    }
    Ok(program.decls.iter().filter(|d| d.kind != DeclKind::Property || d.name == property).collect())
}

fn check_clashes(decls: &[&Decl], table: &RenderTable) -> Result<(), ExportError> {
    let back = table.backward();
    let mut names: Vec<String> = Vec::new();
    for d in decls {
        names.push(d.name.clone());
        let mut text = print_decl(d);
        text.retain(|c| c != '@');
        for word in words(&text) {
            names.push(word);
        }
    }
    for name in names {
        if let Some(sources) = back.get(name.as_str()) {
            if !sources.contains(&name.as_str()) {
                return Err(ExportError::NameClash { name, token: sources[0].into() });
            }
        }
    }
    Ok(())
}

fn words(text: &str) -> Vec<String> {
    scan(text).into_iter().filter_map(|t| if let Piece::Word(w) = t { Some(w) } else { None }).collect()
}

fn render_decl(d: &Decl, table: &RenderTable) -> String {
    let c = table.setting("comment");
    let printed = print_decl(d);
    match d.kind {
        DeclKind::TypeSynonym => {
            let ty = d.signature.as_ref().map(print_type).unwrap_or_default();
            format!("{} : {}\n{} = {}\n", d.name, table.setting("universe"), d.name, map_text(&ty, table))
        }
        DeclKind::Network | DeclKind::Dataset | DeclKind::Parameter => {
            let sig = d.signature.as_ref().map(print_type).unwrap_or_default();
            format!("{c} {}\npostulate\n  {} : {}\n", d.kind.as_str(), d.name, map_text(&sig, table))
        }
        DeclKind::Property => {
            let body = d.body.as_ref().map(print_expr).unwrap_or_default();
            format!("{c} property\npostulate\n  {} : {}\n", d.name, map_text(&body, table))
        }
        DeclKind::Def => {
            let mut out = String::new();
            for line in printed.lines() {
                out.push_str(&map_text(line, table));
                out.push('\n');
            }
            out
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Piece {
    Word(String),
    Number(String),
    Symbol(String),
    Other(char),
}

const SOURCE_SYMBOLS: [&str; 15] = ["->", "=>", "<=", ">=", "==", "!=", "<", ">", "\\", "!", ".", "+", "-", "*", "/"];

fn is_word_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\''
}

/// Splits source text into words, numerals, operator symbols and single
/// characters (whitespace and punctuation).
fn scan(text: &str) -> Vec<Piece> {
    scan_with(text, &SOURCE_SYMBOLS)
}

fn scan_with(text: &str, symbols: &[&str]) -> Vec<Piece> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            out.push(Piece::Number(chars[start..i].iter().collect()));
        } else if is_word_start(c) {
            let start = i;
            while i < chars.len() && is_word_char(chars[i]) {
                i += 1;
            }
            out.push(Piece::Word(chars[start..i].iter().collect()));
        } else if let Some(sym) = symbols
            .iter()
            .filter(|s| chars[i..].iter().take(s.chars().count()).copied().eq(s.chars()))
            .max_by_key(|s| s.chars().count())
        {
            i += sym.chars().count();
            out.push(Piece::Symbol(sym.to_string()));
        } else {
            out.push(Piece::Other(c));
            i += 1;
        }
    }
    out
}

/// Source text to target text, token by token.
pub fn map_text(text: &str, table: &RenderTable) -> String {
    let fwd = table.forward();
    let mut out = String::new();
    let pieces = scan(text);
    for (i, p) in pieces.iter().enumerate() {
        match p {
            Piece::Word(w) => out.push_str(fwd.get(w.as_str()).copied().unwrap_or(w)),
            Piece::Symbol(w) => {
                let target = fwd.get(w.as_str()).copied().unwrap_or(w);
                // A word-like rendering must not fuse with its neighbours.
                let wordy = |c: char| is_word_char(c) || !c.is_ascii();
                if target.starts_with(wordy) && out.ends_with(wordy) {
                    out.push(' ');
                }
                out.push_str(target);
                if target.ends_with(wordy) && matches!(pieces.get(i + 1), Some(Piece::Word(_) | Piece::Number(_))) {
                    out.push(' ');
                }
            }
            Piece::Number(n) => out.push_str(n),
            Piece::Other(c) => out.push(*c),
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Ctx {
    Type,
    Expr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Pending {
    /// Quantifier or Pi binder waiting for its `.`.
    Binder(usize),
    /// Lambda binder waiting for its `->`.
    Lambda(usize),
    /// `let` binder waiting for its `=`.
    Let(usize),
}

/// Target text back to source text. Arrow-like tokens that share a
/// rendering are told apart by the binder they close, or by `ctx`.
fn unmap_text(text: &str, table: &RenderTable, ctx: Ctx) -> String {
    let back = table.backward();
    let mut symbols: Vec<&str> = back.keys().copied().filter(|t| !t.starts_with(is_word_start)).collect();
    symbols.push("=");
    let pieces = scan_with(text, &symbols);
    let mut out = String::new();
    let mut depth = 0usize;
    let mut stack: Vec<Pending> = Vec::new();
    for p in &pieces {
        let token = match p {
            Piece::Word(w) | Piece::Symbol(w) => w.as_str(),
            Piece::Number(n) => {
                out.push_str(n);
                continue;
            }
            Piece::Other(c) => {
                match c {
                    '(' | '[' => depth += 1,
                    ')' | ']' => depth = depth.saturating_sub(1),
                    _ => {}
                }
                out.push(*c);
                continue;
            }
        };
        if token == "=" {
            if let Some(Pending::Let(d)) = stack.last() {
                if *d == depth {
                    stack.pop();
                }
            }
            out.push('=');
            continue;
        }
        let Some(sources) = back.get(token) else {
            out.push_str(token);
            continue;
        };
        let source: &str = if sources.len() == 1 {
            sources[0]
        } else if sources.iter().all(|s| ARROWS.contains(s)) {
            match stack.last() {
                Some(Pending::Binder(d)) if *d == depth => ".",
                Some(Pending::Lambda(d)) if *d == depth => "->",
                Some(_) => "->",
                None if ctx == Ctx::Type => "->",
                None => "=>",
            }
        } else {
            // Only forall and foreach share a rendering; the checker tells
            // them apart.
            "forall"
        };
        let source = if sources.contains(&source) { source } else { sources[0] };
        match source {
            "forall" | "exists" | "foreach" => stack.push(Pending::Binder(depth)),
            "\\" => stack.push(Pending::Lambda(depth)),
            "let" => stack.push(Pending::Let(depth)),
            "." | "->" => match stack.last() {
                Some(Pending::Binder(d)) if *d == depth && source == "." => {
                    stack.pop();
                }
                Some(Pending::Lambda(d)) if *d == depth && source == "->" => {
                    stack.pop();
                }
                _ => {}
            },
            _ => {}
        }
        out.push_str(source);
    }
    out
}

/// Recovers source text from an exported interface: the module's
/// declarations, without the header.
pub fn unrender(text: &str, table: &RenderTable) -> Result<String, ExportError> {
    table.validate()?;
    let comment = table.setting("comment");
    let universe = table.setting("universe");
    let mut out: Vec<String> = Vec::new();
    let mut marker: Option<String> = None;
    let mut synonym: Option<String> = None;
    let mut in_postulate = false;
    for (n, line) in text.lines().enumerate() {
        let malformed = |detail: &str| ExportError::Malformed { line: n + 1, detail: detail.into() };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            in_postulate = false;
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix(comment) {
            let rest = rest.trim();
            if ["network", "dataset", "parameter", "property"].contains(&rest) {
                marker = Some(rest.into());
            }
            continue;
        }
        if trimmed.starts_with("{-#") || trimmed.starts_with("module ") || trimmed.starts_with("open import") {
            continue;
        }
        if trimmed == "postulate" {
            in_postulate = true;
            continue;
        }
        if in_postulate {
            let kind = marker.take().ok_or_else(|| malformed("postulate without a kind marker"))?;
            let (name, rhs) = trimmed.split_once(" : ").ok_or_else(|| malformed("expected `name : ...`"))?;
            if kind == "property" {
                out.push(format!("@property\n{name} : Bool\n{name} = {}\n", unmap_text(rhs, table, Ctx::Expr)));
            } else {
                out.push(format!("@{kind}\n{name} : {}\n", unmap_text(rhs, table, Ctx::Type)));
            }
            in_postulate = false;
            continue;
        }
        if line.starts_with(char::is_whitespace) {
            return Err(malformed("unexpected indentation"));
        }
        if let Some(name) = signature_name(trimmed) {
            let rhs = trimmed[name.len()..].trim_start()[1..].trim();
            if rhs == universe {
                synonym = Some(name.into());
            } else {
                out.push(format!("{name} : {}\n", unmap_text(rhs, table, Ctx::Type)));
            }
            continue;
        }
        let (head, body) = split_definition(trimmed).ok_or_else(|| malformed("expected a signature or a definition"))?;
        if let Some(name) = synonym.take() {
            if head.trim() != name {
                return Err(malformed("type synonym without its definition"));
            }
            out.push(format!("type {name} = {}\n", unmap_text(body, table, Ctx::Type)));
        } else {
            let head = unmap_text(head, table, Ctx::Type);
            let body = unmap_text(body, table, Ctx::Expr);
            // A definition belongs to the signature right before it.
            let line = format!("{} = {body}\n", head.trim_end());
            match out.last_mut() {
                Some(prev) if prev.ends_with('\n') && is_bare_signature(prev, head.split_whitespace().next().unwrap_or("")) => {
                    prev.push_str(&line)
                }
                _ => out.push(line),
            }
        }
    }
    Ok(out.join("\n"))
}

fn signature_name(line: &str) -> Option<&str> {
    let end = line.find(|c: char| !is_word_char(c)).unwrap_or(line.len());
    if end == 0 || !line.starts_with(is_word_start) {
        return None;
    }
    line[end..].trim_start().starts_with(':').then(|| &line[..end])
}

fn is_bare_signature(chunk: &str, name: &str) -> bool {
    !chunk.starts_with('@') && chunk.lines().count() == 1 && signature_name(chunk.trim()) == Some(name)
}

/// `head = body` at bracket depth 0, skipping `==`, `=>`, `<=`, `>=`, `!=`.
fn split_definition(line: &str) -> Option<(&str, &str)> {
    let bytes = line.as_bytes();
    let mut depth = 0i32;
    for (i, &b) in bytes.iter().enumerate() {
        match b {
            b'(' | b'[' => depth += 1,
            b')' | b']' => depth -= 1,
            b'=' if depth == 0 => {
                let prev = i.checked_sub(1).map(|j| bytes[j]);
                let next = bytes.get(i + 1).copied();
                let part_of_op = matches!(prev, Some(b'=' | b'<' | b'>' | b'!')) || matches!(next, Some(b'=' | b'>'));
                if !part_of_op {
                    return Some((line[..i].trim_end(), line[i + 1..].trim_start()));
                }
            }
            _ => {}
        }
    }
    None
}

/// The program as it will be compared after a round trip: the exported
/// declarations only.
pub fn exported_program(program: &Program, property: &str) -> Result<Program, ExportError> {
    Ok(Program { decls: exported_decls(program, property)?.into_iter().cloned().collect() })
}
