//! Recursive-descent parser for the surface language.
//!
//! Precedence, loosest first: binder forms (`forall`, `exists`,
//! `foreach`, `\`, `let`, `if`), `=>` (right associative), `or`, `and`,
//! `not`, comparisons (chains such as `a <= b <= c` become conjunctions),
//! `+ -`, `* /`, unary `-`, `!`, application.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use super::ast::*;
use super::lexer::{Keyword, Symbol, Token, TokenKind};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("{span}: expected {}, found {found}", expected.join(" or "))]
pub struct ParseError {
    pub span: Span,
    pub expected: Vec<String>,
    pub found: String,
}

type PResult<T> = Result<T, ParseError>;

pub fn parse(tokens: &[Token]) -> PResult<Program> {
    let mut starts: Vec<usize> = tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.starts_decl)
        .map(|(i, _)| i)
        .collect();
    if starts.first() != Some(&0) && !tokens.is_empty() {
        starts.insert(0, 0);
    }
    let mut decls = Vec::new();
    for (n, &start) in starts.iter().enumerate() {
        let end = starts.get(n + 1).copied().unwrap_or(tokens.len());
        decls.push(parse_decl(&tokens[start..end])?);
    }
    Ok(Program { decls })
}

/// Parses a single expression, for tests and tooling.
pub fn parse_expr(tokens: &[Token]) -> PResult<Expr> {
    let mut p = Parser::new(tokens);
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}

pub fn parse_type(tokens: &[Token]) -> PResult<TypeExpr> {
    let mut p = Parser::new(tokens);
    let t = p.ty()?;
    p.finish()?;
    Ok(t)
}

fn parse_decl(tokens: &[Token]) -> PResult<Decl> {
    let mut p = Parser::new(tokens);
    let span = p.span();
    if p.eat_kw(Keyword::Type) {
        let name = p.ident()?;
        p.expect_sym(Symbol::Assign)?;
        let ty = p.ty()?;
        p.finish()?;
        return Ok(Decl { kind: DeclKind::TypeSynonym, name, span, signature: Some(ty), body: None });
    }

    let kind = match p.peek().cloned() {
        Some(TokenKind::Annotation(a)) => {
            p.bump();
            match a.as_str() {
                "network" => DeclKind::Network,
                "dataset" => DeclKind::Dataset,
                "parameter" => DeclKind::Parameter,
                _ => DeclKind::Property,
            }
        }
        _ => DeclKind::Def,
    };

    let name_span = p.span();
    let name = p.ident()?;
    let mut signature = None;
    if p.eat_sym(Symbol::Colon) {
        signature = Some(p.ty()?);
        if p.at_end() {
            if matches!(kind, DeclKind::Def | DeclKind::Property) {
                return Err(p.error(&["a definition"]));
            }
            return Ok(Decl { kind, name, span: name_span, signature, body: None });
        }
        let again = p.ident()?;
        if again != name {
            return Err(ParseError {
                span: p.prev_span(),
                expected: vec![format!("definition of `{name}`")],
                found: format!("`{again}`"),
            });
        }
    } else if kind.is_external() {
        return Err(p.error(&["`:`"]));
    }

    let mut params = Vec::new();
    while !p.at_sym(Symbol::Assign) {
        params.push(p.binder()?);
    }
    p.expect_sym(Symbol::Assign)?;
    let mut body = p.expr()?;
    p.finish()?;
    if kind.is_external() {
        return Err(ParseError {
            span: body.span,
            expected: vec!["end of declaration".into()],
            found: format!("a body for external declaration `{name}`"),
        });
    }
    for binder in params.into_iter().rev() {
        let span = binder.span;
        body = Expr::new(ExprKind::Lambda { binder, body: Box::new(body) }, span);
    }
    Ok(Decl { kind, name, span: name_span, signature, body: Some(body) })
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(tokens: &'a [Token]) -> Self {
        Parser { tokens, pos: 0 }
    }

    fn peek(&self) -> Option<&TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn peek_at(&self, offset: usize) -> Option<&TokenKind> {
        self.tokens.get(self.pos + offset).map(|t| &t.kind)
    }

    fn span(&self) -> Span {
        self.tokens
            .get(self.pos)
            .or_else(|| self.tokens.last())
            .map_or(Span::new(1, 1), |t| t.span)
    }

    fn prev_span(&self) -> Span {
        self.tokens.get(self.pos.saturating_sub(1)).map_or(Span::new(1, 1), |t| t.span)
    }

    fn bump(&mut self) {
        self.pos += 1;
    }

    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn finish(&self) -> PResult<()> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.error(&["end of declaration"]))
        }
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        ParseError {
            span: self.span(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: match self.peek() {
                Some(t) => t.to_string(),
                None => "end of declaration".into(),
            },
        }
    }

    fn at_sym(&self, s: Symbol) -> bool {
        self.peek() == Some(&TokenKind::Symbol(s))
    }

    fn at_kw(&self, k: Keyword) -> bool {
        self.peek() == Some(&TokenKind::Keyword(k))
    }

    fn eat_sym(&mut self, s: Symbol) -> bool {
        let hit = self.at_sym(s);
        if hit {
            self.bump();
        }
        hit
    }

    fn eat_kw(&mut self, k: Keyword) -> bool {
        let hit = self.at_kw(k);
        if hit {
            self.bump();
        }
        hit
    }

    fn expect_sym(&mut self, s: Symbol) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.error(&[&format!("`{}`", s.text())]))
        }
    }

    fn expect_kw(&mut self, k: Keyword) -> PResult<()> {
        if self.eat_kw(k) {
            Ok(())
        } else {
            Err(self.error(&[&format!("`{}`", k.text())]))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek() {
            Some(TokenKind::Ident(name)) => {
                let name = name.clone();
                self.bump();
                Ok(name)
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    /// `x` or `(x : τ)`.
    fn binder(&mut self) -> PResult<Binder> {
        let span = self.span();
        if self.at_sym(Symbol::LParen) && matches!(self.peek_at(1), Some(TokenKind::Ident(_))) && self.peek_at(2) == Some(&TokenKind::Symbol(Symbol::Colon)) {
            self.bump();
            let name = self.ident()?;
            self.expect_sym(Symbol::Colon)?;
            let ty = self.ty()?;
            self.expect_sym(Symbol::RParen)?;
            return Ok(Binder { name, ty: Some(ty), span });
        }
        let name = self.ident()?;
        Ok(Binder { name, ty: None, span })
    }

    // ---- types ----

    fn ty(&mut self) -> PResult<TypeExpr> {
        let span = self.span();
        if self.eat_kw(Keyword::Forall) {
            let mut binders = Vec::new();
            loop {
                if self.eat_sym(Symbol::LParen) {
                    let name = self.ident()?;
                    self.expect_sym(Symbol::Colon)?;
                    let kind = if self.eat_kw(Keyword::Nat) {
                        Kind::Nat
                    } else if self.eat_kw(Keyword::TypeKind) {
                        Kind::Type
                    } else {
                        return Err(self.error(&["`Nat`", "`Type`"]));
                    };
                    self.expect_sym(Symbol::RParen)?;
                    binders.push((name, kind));
                } else if let Some(TokenKind::Ident(_)) = self.peek() {
                    binders.push((self.ident()?, Kind::Nat));
                } else {
                    break;
                }
            }
            if binders.is_empty() {
                return Err(self.error(&["type binder"]));
            }
            self.expect_sym(Symbol::Dot)?;
            let mut body = self.ty()?;
            for (binder, kind) in binders.into_iter().rev() {
                body = TypeExpr { kind: TypeKind::Pi { binder, kind, body: Box::new(body) }, span };
            }
            return Ok(body);
        }
        let lhs = self.btype()?;
        if self.eat_sym(Symbol::Arrow) {
            let rhs = self.ty()?;
            return Ok(TypeExpr { kind: TypeKind::Fun(Box::new(lhs), Box::new(rhs)), span });
        }
        Ok(lhs)
    }

    fn btype(&mut self) -> PResult<TypeExpr> {
        let span = self.span();
        if self.eat_kw(Keyword::Tensor) {
            let elem = self.tatom()?;
            self.expect_sym(Symbol::LBracket)?;
            let mut dims = Vec::new();
            if !self.at_sym(Symbol::RBracket) {
                loop {
                    dims.push(self.ty()?);
                    if !self.eat_sym(Symbol::Comma) {
                        break;
                    }
                }
            }
            self.expect_sym(Symbol::RBracket)?;
            return Ok(TypeExpr { kind: TypeKind::Tensor { elem: Box::new(elem), dims }, span });
        }
        if self.eat_kw(Keyword::Vector) {
            let elem = self.tatom()?;
            let dim = self.tatom()?;
            return Ok(TypeExpr { kind: TypeKind::Vector { elem: Box::new(elem), dim: Box::new(dim) }, span });
        }
        if self.eat_kw(Keyword::Index) {
            let dim = self.tatom()?;
            return Ok(TypeExpr { kind: TypeKind::Index(Box::new(dim)), span });
        }
        self.tatom()
    }

    fn tatom(&mut self) -> PResult<TypeExpr> {
        let span = self.span();
        let kind = match self.peek().cloned() {
            Some(TokenKind::Keyword(Keyword::Rat)) => TypeKind::Rat,
            Some(TokenKind::Keyword(Keyword::Bool)) => TypeKind::Bool,
            Some(TokenKind::Keyword(Keyword::Nat)) => TypeKind::Nat,
            Some(TokenKind::Nat(n)) => TypeKind::NatLit(n),
            Some(TokenKind::Ident(name)) => TypeKind::Var { name, res: Res::Unresolved },
            Some(TokenKind::Symbol(Symbol::LParen)) => {
                self.bump();
                let t = self.ty()?;
                self.expect_sym(Symbol::RParen)?;
                return Ok(t);
            }
            _ => return Err(self.error(&["type"])),
        };
        self.bump();
        Ok(TypeExpr { kind, span })
    }

    // ---- expressions ----

    fn expr(&mut self) -> PResult<Expr> {
        let span = self.span();
        match self.peek() {
            Some(TokenKind::Keyword(Keyword::Forall)) => self.quant(Quantifier::Forall),
            Some(TokenKind::Keyword(Keyword::Exists)) => self.quant(Quantifier::Exists),
            Some(TokenKind::Keyword(Keyword::Foreach)) => self.quant(Quantifier::Foreach),
            Some(TokenKind::Symbol(Symbol::Backslash)) => {
                self.bump();
                let mut binders = Vec::new();
                while !self.at_sym(Symbol::Arrow) {
                    binders.push(self.binder()?);
                }
                if binders.is_empty() {
                    return Err(self.error(&["binder"]));
                }
                self.bump();
                let mut body = self.expr()?;
                for binder in binders.into_iter().rev() {
                    body = Expr::new(ExprKind::Lambda { binder, body: Box::new(body) }, span);
                }
                Ok(body)
            }
            Some(TokenKind::Keyword(Keyword::Let)) => {
                self.bump();
                let binder = self.binder()?;
                self.expect_sym(Symbol::Assign)?;
                let bound = self.expr()?;
                self.expect_kw(Keyword::In)?;
                let body = self.expr()?;
                Ok(Expr::new(ExprKind::Let { binder, bound: Box::new(bound), body: Box::new(body) }, span))
            }
            Some(TokenKind::Keyword(Keyword::If)) => {
                self.bump();
                let c = self.expr()?;
                self.expect_kw(Keyword::Then)?;
                let t = self.expr()?;
                self.expect_kw(Keyword::Else)?;
                let e = self.expr()?;
                Ok(Expr::new(ExprKind::If(Box::new(c), Box::new(t), Box::new(e)), span))
            }
            _ => self.implies(),
        }
    }

    fn quant(&mut self, q: Quantifier) -> PResult<Expr> {
        let span = self.span();
        self.bump();
        let mut binders = Vec::new();
        while !self.at_sym(Symbol::Dot) {
            binders.push(self.binder()?);
        }
        if binders.is_empty() {
            return Err(self.error(&["binder"]));
        }
        self.bump();
        let mut body = self.expr()?;
        for binder in binders.into_iter().rev() {
            body = Expr::new(ExprKind::Quant { q, binder, body: Box::new(body) }, span);
        }
        Ok(body)
    }

    fn starts_binder_form(&self) -> bool {
        matches!(
            self.peek(),
            Some(TokenKind::Keyword(Keyword::Forall | Keyword::Exists | Keyword::Foreach | Keyword::Let | Keyword::If))
                | Some(TokenKind::Symbol(Symbol::Backslash))
        )
    }

    fn implies(&mut self) -> PResult<Expr> {
        let lhs = self.or()?;
        if self.at_sym(Symbol::Implies) {
            let span = self.span();
            self.bump();
            let rhs = if self.starts_binder_form() { self.expr()? } else { self.implies()? };
            return Ok(Expr::new(ExprKind::Binary(BinOp::Implies, Box::new(lhs), Box::new(rhs)), span));
        }
        Ok(lhs)
    }

    fn left_assoc(
        &mut self,
        ops: &[(TokenKind, BinOp)],
        next: fn(&mut Self) -> PResult<Expr>,
    ) -> PResult<Expr> {
        let mut lhs = next(self)?;
        'outer: loop {
            for (tok, op) in ops {
                if self.peek() == Some(tok) {
                    let span = self.span();
                    self.bump();
                    let rhs = if self.starts_binder_form() { self.expr()? } else { next(self)? };
                    lhs = Expr::new(ExprKind::Binary(*op, Box::new(lhs), Box::new(rhs)), span);
                    continue 'outer;
                }
            }
            return Ok(lhs);
        }
    }

    fn or(&mut self) -> PResult<Expr> {
        self.left_assoc(&[(TokenKind::Keyword(Keyword::Or), BinOp::Or)], Self::and)
    }

    fn and(&mut self) -> PResult<Expr> {
        self.left_assoc(&[(TokenKind::Keyword(Keyword::And), BinOp::And)], Self::not)
    }

    fn not(&mut self) -> PResult<Expr> {
        if self.at_kw(Keyword::Not) {
            let span = self.span();
            self.bump();
            let inner = if self.starts_binder_form() { self.expr()? } else { self.not()? };
            return Ok(Expr::new(ExprKind::Unary(UnOp::Not, Box::new(inner)), span));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> PResult<Expr> {
        let first = self.arith()?;
        let mut operands = vec![first];
        let mut ops: Vec<(BinOp, Span)> = Vec::new();
        loop {
            let op = match self.peek() {
                Some(TokenKind::Symbol(Symbol::EqEq)) => BinOp::Eq,
                Some(TokenKind::Symbol(Symbol::NotEq)) => BinOp::Neq,
                Some(TokenKind::Symbol(Symbol::Leq)) => BinOp::Leq,
                Some(TokenKind::Symbol(Symbol::Lt)) => BinOp::Lt,
                Some(TokenKind::Symbol(Symbol::Geq)) => BinOp::Geq,
                Some(TokenKind::Symbol(Symbol::Gt)) => BinOp::Gt,
                _ => break,
            };
            ops.push((op, self.span()));
            self.bump();
            operands.push(self.arith()?);
        }
        if ops.is_empty() {
            return Ok(operands.pop().unwrap());
        }
        // a op1 b op2 c  ==>  (a op1 b) and (b op2 c)
        let mut atoms = Vec::new();
        for (i, (op, span)) in ops.iter().enumerate() {
            atoms.push(Expr::new(
                ExprKind::Binary(*op, Box::new(operands[i].clone()), Box::new(operands[i + 1].clone())),
                *span,
            ));
        }
        let mut atoms = atoms.into_iter();
        let mut acc = atoms.next().unwrap();
        for atom in atoms {
            let span = atom.span;
            acc = Expr::new(ExprKind::Binary(BinOp::And, Box::new(acc), Box::new(atom)), span);
        }
        Ok(acc)
    }

    fn arith(&mut self) -> PResult<Expr> {
        self.left_assoc(
            &[(TokenKind::Symbol(Symbol::Plus), BinOp::Add), (TokenKind::Symbol(Symbol::Minus), BinOp::Sub)],
            Self::term,
        )
    }

    fn term(&mut self) -> PResult<Expr> {
        self.left_assoc(
            &[(TokenKind::Symbol(Symbol::Star), BinOp::Mul), (TokenKind::Symbol(Symbol::Slash), BinOp::Div)],
            Self::unary,
        )
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.at_sym(Symbol::Minus) {
            let span = self.span();
            self.bump();
            let inner = self.unary()?;
            return Ok(Expr::new(ExprKind::Unary(UnOp::Neg, Box::new(inner)), span));
        }
        if self.starts_binder_form() {
            return self.expr();
        }
        self.index()
    }

    fn index(&mut self) -> PResult<Expr> {
        let mut lhs = self.app()?;
        while self.at_sym(Symbol::Bang) {
            let span = self.span();
            self.bump();
            let rhs = self.atom()?;
            lhs = Expr::new(ExprKind::Binary(BinOp::Index, Box::new(lhs), Box::new(rhs)), span);
        }
        Ok(lhs)
    }

    fn starts_atom(&self) -> bool {
        matches!(
            self.peek(),
            Some(
                TokenKind::Ident(_)
                    | TokenKind::Nat(_)
                    | TokenKind::Rat(_)
                    | TokenKind::Keyword(Keyword::True | Keyword::False)
                    | TokenKind::Symbol(Symbol::LParen | Symbol::LBracket)
            )
        )
    }

    fn app(&mut self) -> PResult<Expr> {
        let span = self.span();
        if self.eat_kw(Keyword::Fold) {
            let f = self.atom()?;
            let init = self.atom()?;
            let vec = self.atom()?;
            let mut e = Expr::new(ExprKind::Fold { f: Box::new(f), init: Box::new(init), vec: Box::new(vec) }, span);
            while self.starts_atom() {
                let arg = self.atom()?;
                e = Expr::new(ExprKind::App(Box::new(e), Box::new(arg)), span);
            }
            return Ok(e);
        }
        let mut head = self.atom()?;
        while self.starts_atom() {
            let arg = self.atom()?;
            head = Expr::new(ExprKind::App(Box::new(head), Box::new(arg)), span);
        }
        Ok(head)
    }

    fn atom(&mut self) -> PResult<Expr> {
        let span = self.span();
        let kind = match self.peek().cloned() {
            Some(TokenKind::Ident(name)) => ExprKind::Var { name, res: Res::Unresolved },
            Some(TokenKind::Nat(n)) => ExprKind::NatLit(n),
            Some(TokenKind::Rat(q)) => ExprKind::RatLit(q),
            Some(TokenKind::Keyword(Keyword::True)) => ExprKind::True,
            Some(TokenKind::Keyword(Keyword::False)) => ExprKind::False,
            Some(TokenKind::Symbol(Symbol::LBracket)) => {
                self.bump();
                let mut items = Vec::new();
                if !self.at_sym(Symbol::RBracket) {
                    loop {
                        items.push(self.expr()?);
                        if !self.eat_sym(Symbol::Comma) {
                            break;
                        }
                    }
                }
                self.expect_sym(Symbol::RBracket)?;
                return Ok(Expr::new(ExprKind::VecLit(items), span));
            }
            Some(TokenKind::Symbol(Symbol::LParen)) => {
                self.bump();
                if let Some(op) = self.section_op() {
                    if self.peek_at(1) == Some(&TokenKind::Symbol(Symbol::RParen)) {
                        self.bump();
                        self.bump();
                        return Ok(section(op, span));
                    }
                }
                let e = self.expr()?;
                self.expect_sym(Symbol::RParen)?;
                return Ok(e);
            }
            _ => return Err(self.error(&["expression"])),
        };
        self.bump();
        Ok(Expr::new(kind, span))
    }

    fn section_op(&self) -> Option<BinOp> {
        Some(match self.peek()? {
            TokenKind::Symbol(Symbol::Plus) => BinOp::Add,
            TokenKind::Symbol(Symbol::Minus) => BinOp::Sub,
            TokenKind::Symbol(Symbol::Star) => BinOp::Mul,
            TokenKind::Symbol(Symbol::Slash) => BinOp::Div,
            TokenKind::Keyword(Keyword::And) => BinOp::And,
            TokenKind::Keyword(Keyword::Or) => BinOp::Or,
            TokenKind::Symbol(Symbol::Implies) => BinOp::Implies,
            TokenKind::Symbol(Symbol::EqEq) => BinOp::Eq,
            TokenKind::Symbol(Symbol::NotEq) => BinOp::Neq,
            TokenKind::Symbol(Symbol::Leq) => BinOp::Leq,
            TokenKind::Symbol(Symbol::Lt) => BinOp::Lt,
            TokenKind::Symbol(Symbol::Geq) => BinOp::Geq,
            TokenKind::Symbol(Symbol::Gt) => BinOp::Gt,
            _ => return None,
        })
    }
}

/// `(+)` becomes `\_l _r -> _l + _r`.
fn section(op: BinOp, span: Span) -> Expr {
    let var = |name: &str| Expr::new(ExprKind::Var { name: name.into(), res: Res::Unresolved }, span);
    let body = Expr::new(ExprKind::Binary(op, Box::new(var("_l")), Box::new(var("_r"))), span);
    let inner = Expr::new(
        ExprKind::Lambda { binder: Binder { name: "_r".into(), ty: None, span }, body: Box::new(body) },
        span,
    );
    Expr::new(
        ExprKind::Lambda { binder: Binder { name: "_l".into(), ty: None, span }, body: Box::new(inner) },
        span,
    )
}
