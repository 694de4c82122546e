//! Line-based query text: one constraint per line,
//! `<c>x<i> [+ <c>x<j>|y<k>]* <op> <const>`.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use super::compile::{QVar, Query};
use crate::qelim::{LinRel, LinearConstraint, LinearExpr};
use crate::rational::{format_exact, parse_decimal, Q};
use num_traits::Signed;

/// Renders `q`. Each constraint is scaled so its first coefficient is
/// positive; strict inequalities are tightened by `slack` (so a slack of
/// 0 turns `<` into `<=`).
pub fn render_query(q: &Query, slack: &Q) -> String {
    let mut out = String::new();
    for c in &q.constraints {
        out.push_str(&render_constraint(c, slack));
        out.push('\n');
    }
    out
}

pub fn render_constraint(c: &LinearConstraint<QVar>, slack: &Q) -> String {
    // c.expr rel 0, with rel in {=, <=, <}.
    let flip = c.expr.coeffs.values().next().is_some_and(|k| k.is_negative());
    let expr = if flip { c.expr.scale(&-Q::from_integer(1.into())) } else { c.expr.clone() };
    let mut rhs = -expr.constant.clone();
    let op = match (c.rel, flip) {
        (LinRel::Eq, _) => "=",
        (LinRel::Le, false) => "<=",
        (LinRel::Le, true) => ">=",
        (LinRel::Lt, false) => {
            rhs -= slack;
            "<="
        }
        (LinRel::Lt, true) => {
            rhs += slack;
            ">="
        }
    };
    let mut s = String::new();
    for (i, (v, k)) in expr.coeffs.iter().enumerate() {
        if i > 0 {
            s.push_str(" + ");
        }
        let _ = write!(s, "{}{}", format_exact(k), v);
    }
    if expr.coeffs.is_empty() {
        s.push('0');
    }
    let _ = write!(s, " {op} {}", format_exact(&rhs));
    s
}

/// Parses text produced by [`render_query`] back into constraints (with
/// strictness lost, as in the text).
pub fn parse_query_text(text: &str) -> Option<Vec<LinearConstraint<QVar>>> {
    let mut out = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (lhs, op, rhs) = ["<=", ">=", "="].iter().find_map(|op| {
            let (l, r) = line.split_once(&alloc::format!(" {op} "))?;
            Some((l, *op, r))
        })?;
        let mut e = LinearExpr::constant(-parse_decimal(rhs)?);
        if lhs.trim() != "0" {
            for term in lhs.split(" + ") {
                let at = term.find(['x', 'y'])?;
                let k = parse_decimal(&term[..at])?;
                let idx: usize = term[at + 1..].parse().ok()?;
                let v = if term.as_bytes()[at] == b'x' { QVar::Input(idx) } else { QVar::Output(idx) };
                e.add_term(v, k);
            }
        }
        out.push(match op {
            "<=" => LinearConstraint::new(e, LinRel::Le),
            ">=" => LinearConstraint::new(e.scale(&-Q::from_integer(1.into())), LinRel::Le),
            _ => LinearConstraint::new(e, LinRel::Eq),
        });
    }
    Some(out)
}
