//! Canonical pretty-printer. `print ∘ parse ∘ print = print`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::ast::*;
use crate::rational::format_exact;
use num_traits::Signed;

pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for (i, d) in p.decls.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&print_decl(d));
    }
    out
}

pub fn print_decl(d: &Decl) -> String {
    let mut out = String::new();
    match d.kind {
        DeclKind::TypeSynonym => {
            let ty = d.signature.as_ref().map(print_type).unwrap_or_default();
            out.push_str(&format!("type {} = {}\n", d.name, ty));
            return out;
        }
        DeclKind::Network | DeclKind::Dataset | DeclKind::Parameter | DeclKind::Property => {
            out.push_str(&format!("@{}\n", d.kind.as_str()));
        }
        DeclKind::Def => {}
    }
    if let Some(sig) = &d.signature {
        out.push_str(&format!("{} : {}\n", d.name, print_type(sig)));
    }
    if let Some(body) = &d.body {
        let mut params = Vec::new();
        let mut e = body;
        while let ExprKind::Lambda { binder, body } = &e.kind {
            params.push(print_binder(binder));
            e = body;
        }
        out.push_str(&d.name);
        for p in params {
            out.push(' ');
            out.push_str(&p);
        }
        out.push_str(" = ");
        out.push_str(&print_expr(e));
        out.push('\n');
    }
    out
}

fn print_binder(b: &Binder) -> String {
    match &b.ty {
        Some(t) => format!("({} : {})", b.name, print_type(t)),
        None => b.name.clone(),
    }
}

pub fn print_type(t: &TypeExpr) -> String {
    type_at(t, 0)
}

// 0: Pi / function, 1: applied constructor, 2: atom
fn type_at(t: &TypeExpr, ctx: u8) -> String {
    let (s, prec) = match &t.kind {
        TypeKind::Pi { binder, kind, body } => (format!("forall ({binder} : {kind}) . {}", type_at(body, 0)), 0),
        TypeKind::Fun(a, b) => (format!("{} -> {}", type_at(a, 1), type_at(b, 0)), 0),
        TypeKind::Var { name, .. } => (name.clone(), 2),
        TypeKind::NatLit(n) => (format!("{n}"), 2),
        TypeKind::Tensor { elem, dims } => {
            let dims: Vec<String> = dims.iter().map(|d| type_at(d, 0)).collect();
            (format!("Tensor {} [{}]", type_at(elem, 2), dims.join(", ")), 1)
        }
        TypeKind::Vector { elem, dim } => (format!("Vector {} {}", type_at(elem, 2), type_at(dim, 2)), 1),
        TypeKind::Index(d) => (format!("Index {}", type_at(d, 2)), 1),
        TypeKind::Bool => ("Bool".into(), 2),
        TypeKind::Rat => ("Rat".into(), 2),
        TypeKind::Nat => ("Nat".into(), 2),
    };
    if prec < ctx {
        format!("({s})")
    } else {
        s
    }
}

pub fn print_expr(e: &Expr) -> String {
    expr_at(e, 0)
}

fn binop_prec(op: BinOp) -> (u8, u8, u8) {
    // (own, left operand, right operand)
    match op {
        BinOp::Implies => (1, 2, 1),
        BinOp::Or => (2, 2, 3),
        BinOp::And => (3, 3, 4),
        BinOp::Eq | BinOp::Neq | BinOp::Leq | BinOp::Lt | BinOp::Geq | BinOp::Gt => (5, 6, 6),
        BinOp::Add | BinOp::Sub => (6, 6, 7),
        BinOp::Mul | BinOp::Div => (7, 7, 8),
        BinOp::Index => (9, 9, 11),
    }
}

fn expr_at(e: &Expr, ctx: u8) -> String {
    let (s, prec) = match &e.kind {
        ExprKind::Var { name, .. } => (name.clone(), 11),
        ExprKind::NatLit(n) => (format!("{n}"), 11),
        ExprKind::RatLit(q) => {
            let mut s = format_exact(q);
            if !s.contains('.') && !s.contains('/') {
                s.push_str(".0");
            }
            if s.contains('/') {
                (s, 7)
            } else if q.is_negative() {
                (s, 8)
            } else {
                (s, 11)
            }
        }
        ExprKind::True => ("true".into(), 11),
        ExprKind::False => ("false".into(), 11),
        ExprKind::Lambda { .. } => {
            let mut binders = Vec::new();
            let mut cur = e;
            while let ExprKind::Lambda { binder, body } = &cur.kind {
                binders.push(print_binder(binder));
                cur = body;
            }
            (format!("\\{} -> {}", binders.join(" "), expr_at(cur, 0)), 0)
        }
        ExprKind::App(f, a) => (format!("{} {}", expr_at(f, 10), expr_at(a, 11)), 10),
        ExprKind::Unary(UnOp::Neg, a) => (format!("-{}", expr_at(a, 8)), 8),
        ExprKind::Unary(UnOp::Not, a) => (format!("not {}", expr_at(a, 4)), 4),
        ExprKind::Binary(op, a, b) => {
            let (own, l, r) = binop_prec(*op);
            (format!("{} {} {}", expr_at(a, l), op.symbol(), expr_at(b, r)), own)
        }
        ExprKind::If(c, t, f) => (
            format!("if {} then {} else {}", expr_at(c, 0), expr_at(t, 0), expr_at(f, 0)),
            0,
        ),
        ExprKind::Quant { q, binder, body } => {
            (format!("{} {} . {}", q.keyword(), print_binder(binder), expr_at(body, 0)), 0)
        }
        ExprKind::VecLit(items) => {
            let items: Vec<String> = items.iter().map(|i| expr_at(i, 0)).collect();
            (format!("[{}]", items.join(", ")), 11)
        }
        ExprKind::Fold { f, init, vec } => (
            format!("fold {} {} {}", expr_at(f, 11), expr_at(init, 11), expr_at(vec, 11)),
            10,
        ),
        ExprKind::Let { binder, bound, body } => (
            format!("let {} = {} in {}", print_binder(binder), expr_at(bound, 0), expr_at(body, 0)),
            0,
        ),
    };
    if prec < ctx {
        format!("({s})")
    } else {
        s
    }
}
