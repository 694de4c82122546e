//! Sampling domains: bound atoms on a quantified variable become a
//! hyperrectangle, the rest of the body stays as the residual.

use alloc::string::ToString;
use alloc::vec::Vec;

use super::{orient, LossError};
use crate::nbe::{Arith, Formula, QuantVar};
use crate::rational::Q;
use crate::typecheck::{Quant, Rel};

/// Closed per-component intervals, row-major over the variable's shape.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Domain {
    pub lo: Vec<Q>,
    pub hi: Vec<Q>,
}

/// A bound `var[offset] (>= | <=) value`.
enum Bound {
    Lower(usize, Q),
    Upper(usize, Q),
}

/// The bound expressed by `atom`, if it compares a component of `var`
/// with a constant. Strictness is dropped: domains are closed.
fn as_bound(atom: &Formula, var: usize) -> Option<Bound> {
    let Formula::Atom(rel, a, b) = atom else { return None };
    let (rel, swapped) = orient(*rel);
    let (a, b) = if swapped { (b, a) } else { (a, b) };
    match (rel, a, b) {
        (Rel::Le | Rel::Lt, Arith::Var { var: v, offset }, Arith::Const(c)) if *v == var => Some(Bound::Upper(*offset, c.clone())),
        (Rel::Le | Rel::Lt, Arith::Const(c), Arith::Var { var: v, offset }) if *v == var => Some(Bound::Lower(*offset, c.clone())),
        _ => None,
    }
}

fn negate_atom(f: &Formula) -> Formula {
    match f {
        Formula::Atom(r, a, b) => Formula::Atom(r.negate(), a.clone(), b.clone()),
        other => Formula::not(other.clone()),
    }
}

fn flatten<'a>(f: &'a Formula, or: bool, out: &mut Vec<&'a Formula>) {
    match (f, or) {
        (Formula::Or(a, b), true) | (Formula::And(a, b), false) => {
            flatten(a, or, out);
            flatten(b, or, out);
        }
        _ => out.push(f),
    }
}

fn rebuild(parts: Vec<Formula>, or: bool) -> Formula {
    let unit = Formula::Const(!or);
    parts.into_iter().reduce(|a, b| if or { Formula::or(a, b) } else { Formula::and(a, b) }).unwrap_or(unit)
}

/// Splits the body of quantifier `q` over `var` (in negation normal form)
/// into a sampling domain and a residual body.
///
/// Absorbed atoms: negated bounds among the disjuncts of a universal body
/// (the antecedent of an implication), and bounds among the top-level
/// conjuncts. Dimensions left unbounded use `fallback`. An empty box
/// gives `None`.
pub fn extract_domain(
    q: Quant,
    var: &QuantVar,
    body: &Formula,
    fallback: Option<&(Q, Q)>,
    extract: bool,
) -> Result<(Option<Domain>, Formula), LossError> {
    let n = var.size();
    let mut lo: Vec<Option<Q>> = alloc::vec![None; n];
    let mut hi: Vec<Option<Q>> = alloc::vec![None; n];
    let mut absorb = |b: Bound| match b {
        Bound::Lower(o, c) => {
            if lo[o].as_ref().is_none_or(|l| c > *l) {
                lo[o] = Some(c);
            }
        }
        Bound::Upper(o, c) => {
            if hi[o].as_ref().is_none_or(|h| c < *h) {
                hi[o] = Some(c);
            }
        }
    };
    let residual = if !extract {
        body.clone()
    } else if q == Quant::Forall && matches!(body, Formula::Or(..)) {
        let mut parts = Vec::new();
        flatten(body, true, &mut parts);
        let mut rest = Vec::new();
        for p in parts {
            match as_bound(&negate_atom(p), var.id) {
                Some(b) if matches!(p, Formula::Atom(..)) => absorb(b),
                _ => rest.push(p.clone()),
            }
        }
        rebuild(rest, true)
    } else {
        let mut parts = Vec::new();
        flatten(body, false, &mut parts);
        let mut rest = Vec::new();
        for p in parts {
            match as_bound(p, var.id) {
                Some(b) => absorb(b),
                None => rest.push(p.clone()),
            }
        }
        rebuild(rest, false)
    };
    let missing: Vec<usize> = (0..n).filter(|&i| lo[i].is_none() || hi[i].is_none()).collect();
    if !missing.is_empty() && fallback.is_none() {
        return Err(LossError::UnboundedDimension { var: var.name.to_string(), dims: missing });
    }
    let mut domain = Domain { lo: Vec::with_capacity(n), hi: Vec::with_capacity(n) };
    for i in 0..n {
        let l = lo[i].clone().or_else(|| fallback.map(|f| f.0.clone())).expect("checked above");
        let h = hi[i].clone().or_else(|| fallback.map(|f| f.1.clone())).expect("checked above");
        if h < l {
            return Ok((None, residual));
        }
        domain.lo.push(l);
        domain.hi.push(h);
    }
    Ok((Some(domain), residual))
}
