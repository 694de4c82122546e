use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::rational::{format_exact, Q};
use crate::typecheck::{ArithOp, Quant, Rel};
use num_traits::{One, Zero};

pub type VarId = usize;

/// A quantified tensor variable. `dims` is empty for a scalar.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QuantVar {
    pub id: VarId,
    pub name: String,
    pub dims: Vec<usize>,
}

impl QuantVar {
    pub fn size(&self) -> usize {
        self.dims.iter().product()
    }

    /// Multi-index of a flat (row-major) offset.
    pub fn unflatten(&self, mut offset: usize) -> Vec<usize> {
        let mut idx = alloc::vec![0; self.dims.len()];
        for (slot, d) in idx.iter_mut().zip(&self.dims).rev() {
            *slot = offset % d;
            offset /= d;
        }
        idx
    }
}

/// Rational-valued neutral terms.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Arith {
    Const(Q),
    /// Scalar component `offset` (row-major) of quantified variable `var`.
    Var { var: VarId, offset: usize },
    /// An opaque `@parameter`.
    Param(String),
    /// Component of an unbound `@dataset`.
    Data { name: String, offset: usize },
    /// Output `output` of `network` applied to `input`.
    Net { network: String, input: Vec<Arith>, output: usize },
    Bin(ArithOp, Box<Arith>, Box<Arith>),
    Neg(Box<Arith>),
    Ite(Box<Formula>, Box<Arith>, Box<Arith>),
}

/// Boolean neutral terms, which double as the normal form of properties.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    Const(bool),
    Atom(Rel, Arith, Arith),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Quant { q: Quant, var: QuantVar, body: Box<Formula> },
}

impl Arith {
    pub fn constant(&self) -> Option<&Q> {
        match self {
            Arith::Const(q) => Some(q),
            _ => None,
        }
    }

    /// Builds `a op b`, folding constants and unit laws. Division by a
    /// constant zero returns `None`.
    pub fn bin(op: ArithOp, a: Arith, b: Arith) -> Option<Arith> {
        use ArithOp::*;
        Some(match (op, a, b) {
            (Div, _, Arith::Const(z)) if z.is_zero() => return None,
            (op, Arith::Const(x), Arith::Const(y)) => Arith::Const(match op {
                Add => x + y,
                Sub => x - y,
                Mul => x * y,
                Div => x / y,
            }),
            (Add, Arith::Const(z), e) | (Add, e, Arith::Const(z)) | (Sub, e, Arith::Const(z)) if z.is_zero() => e,
            (Sub, Arith::Const(z), e) if z.is_zero() => Arith::neg(e),
            (Mul, Arith::Const(o), e) | (Mul, e, Arith::Const(o)) | (Div, e, Arith::Const(o)) if o.is_one() => e,
            (Mul, Arith::Const(z), _) | (Mul, _, Arith::Const(z)) if z.is_zero() => Arith::Const(z),
            (op, a, b) => Arith::Bin(op, Box::new(a), Box::new(b)),
        })
    }

    pub fn neg(a: Arith) -> Arith {
        match a {
            Arith::Const(q) => Arith::Const(-q),
            Arith::Neg(e) => *e,
            e => Arith::Neg(Box::new(e)),
        }
    }

    pub fn ite(c: Formula, t: Arith, e: Arith) -> Arith {
        match c {
            Formula::Const(true) => t,
            Formula::Const(false) => e,
            c if t == e => {
                let _ = c;
                t
            }
            c => Arith::Ite(Box::new(c), Box::new(t), Box::new(e)),
        }
    }

    pub fn vars(&self, out: &mut BTreeSet<VarId>) {
        match self {
            Arith::Var { var, .. } => {
                out.insert(*var);
            }
            Arith::Const(_) | Arith::Param(_) | Arith::Data { .. } => {}
            Arith::Net { input, .. } => input.iter().for_each(|a| a.vars(out)),
            Arith::Bin(_, a, b) => {
                a.vars(out);
                b.vars(out);
            }
            Arith::Neg(a) => a.vars(out),
            Arith::Ite(c, a, b) => {
                c.vars(out);
                a.vars(out);
                b.vars(out);
            }
        }
    }

    pub fn mentions_network(&self) -> bool {
        match self {
            Arith::Net { .. } => true,
            Arith::Const(_) | Arith::Var { .. } | Arith::Param(_) | Arith::Data { .. } => false,
            Arith::Bin(_, a, b) => a.mentions_network() || b.mentions_network(),
            Arith::Neg(a) => a.mentions_network(),
            Arith::Ite(c, a, b) => c.mentions_network() || a.mentions_network() || b.mentions_network(),
        }
    }

    /// Exact value under a ground environment.
    pub fn eval(&self, g: &dyn Ground) -> Result<Q, GroundError> {
        Ok(match self {
            Arith::Const(q) => q.clone(),
            Arith::Var { var, offset } => g.var(*var, *offset).ok_or(GroundError::UnassignedVar(*var))?,
            Arith::Param(name) => g.param(name).ok_or_else(|| GroundError::Unbound(name.clone()))?,
            Arith::Data { name, offset } => g.data(name, *offset).ok_or_else(|| GroundError::Unbound(name.clone()))?,
            Arith::Net { network, input, output } => {
                let xs = input.iter().map(|a| a.eval(g)).collect::<Result<Vec<_>, _>>()?;
                let ys = g.network(network, &xs).ok_or_else(|| GroundError::Unbound(network.clone()))?;
                ys.get(*output).cloned().ok_or_else(|| GroundError::Unbound(network.clone()))?
            }
            Arith::Bin(op, a, b) => {
                let (x, y) = (a.eval(g)?, b.eval(g)?);
                match op {
                    ArithOp::Add => x + y,
                    ArithOp::Sub => x - y,
                    ArithOp::Mul => x * y,
                    ArithOp::Div => {
                        if y.is_zero() {
                            return Err(GroundError::DivisionByZero);
                        }
                        x / y
                    }
                }
            }
            Arith::Neg(a) => -a.eval(g)?,
            Arith::Ite(c, a, b) => {
                if c.eval(g)? {
                    a.eval(g)?
                } else {
                    b.eval(g)?
                }
            }
        })
    }
}

/// Values for the free symbols of a normal form.
pub trait Ground {
    fn var(&self, var: VarId, offset: usize) -> Option<Q>;
    fn param(&self, _name: &str) -> Option<Q> {
        None
    }
    fn data(&self, _name: &str, _offset: usize) -> Option<Q> {
        None
    }
    fn network(&self, name: &str, input: &[Q]) -> Option<Vec<Q>>;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroundError {
    UnassignedVar(VarId),
    Unbound(String),
    DivisionByZero,
}

impl fmt::Display for GroundError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroundError::UnassignedVar(v) => write!(f, "quantified variable #{v} has no value"),
            GroundError::Unbound(n) => write!(f, "`{n}` has no value"),
            GroundError::DivisionByZero => f.write_str("division by zero"),
        }
    }
}

impl Formula {
    pub fn and(a: Formula, b: Formula) -> Formula {
        match (a, b) {
            (Formula::Const(true), x) | (x, Formula::Const(true)) => x,
            (Formula::Const(false), _) | (_, Formula::Const(false)) => Formula::Const(false),
            (a, b) => Formula::And(Box::new(a), Box::new(b)),
        }
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        match (a, b) {
            (Formula::Const(false), x) | (x, Formula::Const(false)) => x,
            (Formula::Const(true), _) | (_, Formula::Const(true)) => Formula::Const(true),
            (a, b) => Formula::Or(Box::new(a), Box::new(b)),
        }
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        match (a, b) {
            (Formula::Const(true), x) => x,
            (Formula::Const(false), _) | (_, Formula::Const(true)) => Formula::Const(true),
            (a, b) => Formula::Implies(Box::new(a), Box::new(b)),
        }
    }

    pub fn not(a: Formula) -> Formula {
        match a {
            Formula::Const(b) => Formula::Const(!b),
            Formula::Not(x) => *x,
            x => Formula::Not(Box::new(x)),
        }
    }

    pub fn atom(rel: Rel, a: Arith, b: Arith) -> Formula {
        match (&a, &b) {
            (Arith::Const(x), Arith::Const(y)) => Formula::Const(rel.holds(x.cmp(y))),
            _ => Formula::Atom(rel, a, b),
        }
    }

    pub fn quant(q: Quant, var: QuantVar, body: Formula) -> Formula {
        let mut free = BTreeSet::new();
        body.vars(&mut free);
        if free.contains(&var.id) {
            Formula::Quant { q, var, body: Box::new(body) }
        } else {
            body
        }
    }

    pub fn vars(&self, out: &mut BTreeSet<VarId>) {
        match self {
            Formula::Const(_) => {}
            Formula::Atom(_, a, b) => {
                a.vars(out);
                b.vars(out);
            }
            Formula::Not(a) => a.vars(out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.vars(out);
                b.vars(out);
            }
            Formula::Quant { body, .. } => body.vars(out),
        }
    }

    pub fn mentions_network(&self) -> bool {
        match self {
            Formula::Const(_) => false,
            Formula::Atom(_, a, b) => a.mentions_network() || b.mentions_network(),
            Formula::Not(a) => a.mentions_network(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.mentions_network() || b.mentions_network()
            }
            Formula::Quant { body, .. } => body.mentions_network(),
        }
    }

    /// Negation normal form: no `Not` or `Implies`; negated atoms flip
    /// their relation and negated quantifiers dualise.
    pub fn nnf(self) -> Formula {
        self.nnf_signed(true)
    }

    fn nnf_signed(self, positive: bool) -> Formula {
        match self {
            Formula::Const(b) => Formula::Const(b == positive),
            Formula::Atom(r, a, b) => Formula::Atom(if positive { r } else { r.negate() }, a, b),
            Formula::Not(a) => a.nnf_signed(!positive),
            Formula::And(a, b) => {
                let (a, b) = (a.nnf_signed(positive), b.nnf_signed(positive));
                if positive {
                    Formula::and(a, b)
                } else {
                    Formula::or(a, b)
                }
            }
            Formula::Or(a, b) => {
                let (a, b) = (a.nnf_signed(positive), b.nnf_signed(positive));
                if positive {
                    Formula::or(a, b)
                } else {
                    Formula::and(a, b)
                }
            }
            Formula::Implies(a, b) => {
                let (a, b) = (a.nnf_signed(!positive), b.nnf_signed(positive));
                if positive {
                    Formula::or(a, b)
                } else {
                    Formula::and(a, b)
                }
            }
            Formula::Quant { q, var, body } => {
                let q = match (q, positive) {
                    (q, true) => q,
                    (Quant::Forall, false) => Quant::Exists,
                    (Quant::Exists, false) => Quant::Forall,
                };
                Formula::Quant { q, var, body: Box::new(body.nnf_signed(positive)) }
            }
        }
    }

    /// Truth value with every quantifier instantiated at the ground value
    /// of its variable.
    pub fn eval(&self, g: &dyn Ground) -> Result<bool, GroundError> {
        Ok(match self {
            Formula::Const(b) => *b,
            Formula::Atom(r, a, b) => r.holds(a.eval(g)?.cmp(&b.eval(g)?)),
            Formula::Not(a) => !a.eval(g)?,
            Formula::And(a, b) => a.eval(g)? && b.eval(g)?,
            Formula::Or(a, b) => a.eval(g)? || b.eval(g)?,
            Formula::Implies(a, b) => !a.eval(g)? || b.eval(g)?,
            Formula::Quant { body, .. } => body.eval(g)?,
        })
    }

    /// Quantified variables in binding order.
    pub fn quant_vars(&self) -> Vec<QuantVar> {
        let mut out = Vec::new();
        self.collect_quant_vars(&mut out);
        out
    }

    fn collect_quant_vars(&self, out: &mut Vec<QuantVar>) {
        match self {
            Formula::Const(_) | Formula::Atom(..) => {}
            Formula::Not(a) => a.collect_quant_vars(out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.collect_quant_vars(out);
                b.collect_quant_vars(out);
            }
            Formula::Quant { var, body, .. } => {
                out.push(var.clone());
                body.collect_quant_vars(out);
            }
        }
    }
}

impl fmt::Display for Arith {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_arith(f, self, 0)
    }
}

fn write_arith(f: &mut fmt::Formatter<'_>, a: &Arith, ctx: u8) -> fmt::Result {
    let prec = match a {
        Arith::Bin(ArithOp::Add | ArithOp::Sub, ..) => 1,
        Arith::Bin(..) => 2,
        Arith::Neg(_) => 3,
        Arith::Ite(..) => 0,
        Arith::Const(q) if *q < Q::zero() => 3,
        _ => 4,
    };
    if prec < ctx {
        f.write_str("(")?;
    }
    match a {
        Arith::Const(q) => f.write_str(&format_exact(q))?,
        Arith::Var { var, offset } => write!(f, "#{var}[{offset}]")?,
        Arith::Param(n) => f.write_str(n)?,
        Arith::Data { name, offset } => write!(f, "{name}[{offset}]")?,
        Arith::Net { network, input, output } => {
            write!(f, "{network}(")?;
            for (i, x) in input.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write_arith(f, x, 0)?;
            }
            write!(f, ")[{output}]")?;
        }
        Arith::Bin(op, x, y) => {
            write_arith(f, x, prec)?;
            write!(f, " {} ", op.symbol())?;
            write_arith(f, y, prec + 1)?;
        }
        Arith::Neg(x) => {
            f.write_str("-")?;
            write_arith(f, x, 3)?;
        }
        Arith::Ite(c, x, y) => write!(f, "if {c} then {x} else {y}")?,
    }
    if prec < ctx {
        f.write_str(")")?;
    }
    Ok(())
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_formula(f, self, 0)
    }
}

fn write_formula(f: &mut fmt::Formatter<'_>, p: &Formula, ctx: u8) -> fmt::Result {
    let prec = match p {
        Formula::Quant { .. } => 0,
        Formula::Implies(..) => 1,
        Formula::Or(..) => 2,
        Formula::And(..) => 3,
        Formula::Not(_) => 4,
        _ => 5,
    };
    if prec < ctx {
        f.write_str("(")?;
    }
    match p {
        Formula::Const(b) => f.write_str(if *b { "true" } else { "false" })?,
        Formula::Atom(r, a, b) => write!(f, "{a} {} {b}", r.symbol())?,
        Formula::Not(a) => {
            f.write_str("not ")?;
            write_formula(f, a, 4)?;
        }
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            let op = match p {
                Formula::And(..) => "and",
                Formula::Or(..) => "or",
                _ => "=>",
            };
            // `=>` is right-associative, the others associative.
            let (l, r) = if op == "=>" { (prec + 1, prec) } else { (prec, prec) };
            write_formula(f, a, l)?;
            write!(f, " {op} ")?;
            write_formula(f, b, r)?;
        }
        Formula::Quant { q, var, body } => {
            let kw = if *q == Quant::Forall { "forall" } else { "exists" };
            write!(f, "{kw} #{} {}{:?} . ", var.id, var.name, var.dims)?;
            write_formula(f, body, 0)?;
        }
    }
    if prec < ctx {
        f.write_str(")")?;
    }
    Ok(())
}
