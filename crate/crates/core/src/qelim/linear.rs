use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

use crate::rational::{format_exact, Q};
use num_traits::{One, Signed, Zero};

/// `Σ coeffs[v]·v + constant`, with no zero coefficients stored.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinearExpr<V: Ord> {
    pub coeffs: BTreeMap<V, Q>,
    pub constant: Q,
}

impl<V: Ord + Clone> LinearExpr<V> {
    pub fn constant(c: Q) -> Self {
        LinearExpr { coeffs: BTreeMap::new(), constant: c }
    }

    pub fn zero() -> Self {
        Self::constant(Q::zero())
    }

    pub fn var(v: V) -> Self {
        Self::term(v, Q::one())
    }

    pub fn term(v: V, c: Q) -> Self {
        let mut e = Self::zero();
        e.add_term(v, c);
        e
    }

    pub fn add_term(&mut self, v: V, c: Q) {
        if c.is_zero() {
            return;
        }
        let slot = self.coeffs.entry(v.clone()).or_insert_with(Q::zero);
        *slot += c;
        if slot.is_zero() {
            self.coeffs.remove(&v);
        }
    }

    pub fn coeff(&self, v: &V) -> Q {
        self.coeffs.get(v).cloned().unwrap_or_else(Q::zero)
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn mentions(&self, v: &V) -> bool {
        self.coeffs.contains_key(v)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (v, c) in &other.coeffs {
            out.add_term(v.clone(), c.clone());
        }
        out.constant += &other.constant;
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&-Q::one()))
    }

    pub fn scale(&self, k: &Q) -> Self {
        if k.is_zero() {
            return Self::zero();
        }
        LinearExpr {
            coeffs: self.coeffs.iter().map(|(v, c)| (v.clone(), c * k)).collect(),
            constant: &self.constant * k,
        }
    }

    /// Replaces `v` by `by`.
    pub fn substitute(&self, v: &V, by: &Self) -> Self {
        match self.coeffs.get(v) {
            None => self.clone(),
            Some(c) => {
                let c = c.clone();
                let mut rest = self.clone();
                rest.coeffs.remove(v);
                rest.add(&by.scale(&c))
            }
        }
    }

    pub fn vars(&self) -> impl Iterator<Item = &V> {
        self.coeffs.keys()
    }

    /// Value under `assign`; `None` if a variable is unassigned.
    pub fn eval(&self, assign: &BTreeMap<V, Q>) -> Option<Q> {
        let mut total = self.constant.clone();
        for (v, c) in &self.coeffs {
            total += c * assign.get(v)?;
        }
        Some(total)
    }
}

impl<V: Ord + fmt::Display> fmt::Display for LinearExpr<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, c) in &self.coeffs {
            if first {
                if c.is_negative() {
                    f.write_str("-")?;
                }
            } else {
                f.write_str(if c.is_negative() { " - " } else { " + " })?;
            }
            let a = c.abs();
            if !a.is_one() {
                write!(f, "{}*", format_exact(&a))?;
            }
            write!(f, "{v}")?;
            first = false;
        }
        if first {
            return f.write_str(&format_exact(&self.constant));
        }
        if !self.constant.is_zero() {
            let sign = if self.constant.is_negative() { " - " } else { " + " };
            write!(f, "{sign}{}", format_exact(&self.constant.abs()))?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LinRel {
    Eq,
    Le,
    Lt,
}

impl LinRel {
    pub fn symbol(self) -> &'static str {
        match self {
            LinRel::Eq => "=",
            LinRel::Le => "<=",
            LinRel::Lt => "<",
        }
    }
}

/// `expr rel 0`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinearConstraint<V: Ord> {
    pub expr: LinearExpr<V>,
    pub rel: LinRel,
}

impl<V: Ord + Clone> LinearConstraint<V> {
    pub fn new(expr: LinearExpr<V>, rel: LinRel) -> Self {
        LinearConstraint { expr, rel }
    }

    /// `a <= b`
    pub fn le(a: &LinearExpr<V>, b: &LinearExpr<V>) -> Self {
        Self::new(a.sub(b), LinRel::Le)
    }

    /// `a < b`
    pub fn lt(a: &LinearExpr<V>, b: &LinearExpr<V>) -> Self {
        Self::new(a.sub(b), LinRel::Lt)
    }

    /// `a >= b`
    pub fn ge(a: &LinearExpr<V>, b: &LinearExpr<V>) -> Self {
        Self::le(b, a)
    }

    /// `a > b`
    pub fn gt(a: &LinearExpr<V>, b: &LinearExpr<V>) -> Self {
        Self::lt(b, a)
    }

    /// `a = b`
    pub fn eq(a: &LinearExpr<V>, b: &LinearExpr<V>) -> Self {
        Self::new(a.sub(b), LinRel::Eq)
    }

    pub fn holds_for(&self, value: &Q) -> bool {
        match self.rel {
            LinRel::Eq => value.is_zero(),
            LinRel::Le => !value.is_positive(),
            LinRel::Lt => value.is_negative(),
        }
    }

    /// Truth value if the constraint mentions no variables.
    pub fn constant_truth(&self) -> Option<bool> {
        self.expr.is_constant().then(|| self.holds_for(&self.expr.constant))
    }

    pub fn holds(&self, assign: &BTreeMap<V, Q>) -> Option<bool> {
        self.expr.eval(assign).map(|v| self.holds_for(&v))
    }

    pub fn mentions(&self, v: &V) -> bool {
        self.expr.mentions(v)
    }

    pub fn substitute(&self, v: &V, by: &LinearExpr<V>) -> Self {
        Self::new(self.expr.substitute(v, by), self.rel)
    }

    /// Positive rescaling making the leading coefficient ±1 (+1 for
    /// equalities). Constraints with equal keys are equivalent.
    pub fn canonical(&self) -> Self {
        let lead = match self.expr.coeffs.values().next() {
            Some(c) => c.clone(),
            None => {
                // Constant constraints collapse to their truth value.
                let t = self.holds_for(&self.expr.constant);
                return Self::new(LinearExpr::constant(if t { Q::zero() } else { Q::one() }), LinRel::Le);
            }
        };
        let k = if self.rel == LinRel::Eq { Q::one() / lead } else { Q::one() / lead.abs() };
        Self::new(self.expr.scale(&k), self.rel)
    }
}

impl<V: Ord + fmt::Display> fmt::Display for LinearConstraint<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} 0", self.expr, self.rel.symbol())
    }
}

/// Drops constant tautologies and constraints equivalent to an earlier one.
pub fn prune<V: Ord + Clone>(cs: Vec<LinearConstraint<V>>) -> Vec<LinearConstraint<V>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(cs.len());
    for c in cs {
        if c.constant_truth() == Some(true) {
            continue;
        }
        if seen.insert(c.canonical()) {
            out.push(c);
        }
    }
    out
}
