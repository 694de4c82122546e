use alloc::sync::Arc;
use alloc::string::String;
use alloc::vec::Vec;

use super::normal::{Arith, Formula};
use crate::rational::Q;
use crate::typecheck::{Term, Ty};

/// Semantic values. Rational and Boolean values that depend on unknowns
/// (quantified variables, networks, opaque parameters) are neutral terms.
#[derive(Clone, Debug)]
pub enum Value {
    /// Rationals, naturals and indices.
    Num(Q),
    Bool(bool),
    Vec(Vec<Value>),
    Closure(Arc<Closure>),
    /// An unapplied `@network`.
    Network(String),
    NeutralRat(Arith),
    NeutralBool(Formula),
}

#[derive(Debug)]
pub struct Closure {
    pub env: Vec<Value>,
    pub shapes: Vec<Ty>,
    pub body: Arc<Term>,
}

impl Value {
    pub fn into_arith(self) -> Option<Arith> {
        match self {
            Value::Num(q) => Some(Arith::Const(q)),
            Value::NeutralRat(a) => Some(a),
            _ => None,
        }
    }

    pub fn into_formula(self) -> Option<Formula> {
        match self {
            Value::Bool(b) => Some(Formula::Const(b)),
            Value::NeutralBool(f) => Some(f),
            _ => None,
        }
    }

    pub fn from_arith(a: Arith) -> Value {
        match a {
            Arith::Const(q) => Value::Num(q),
            a => Value::NeutralRat(a),
        }
    }

    pub fn from_formula(f: Formula) -> Value {
        match f {
            Formula::Const(b) => Value::Bool(b),
            f => Value::NeutralBool(f),
        }
    }

    /// Builds a tensor value from a row-major list of scalars.
    pub fn tensor(dims: &[usize], scalars: &mut impl Iterator<Item = Value>) -> Value {
        match dims.split_first() {
            None => scalars.next().expect("enough scalars for the tensor"),
            Some((&n, rest)) => Value::Vec((0..n).map(|_| Value::tensor(rest, scalars)).collect()),
        }
    }

    /// Row-major scalars of a (nested) vector value.
    pub fn flatten(&self, out: &mut Vec<Value>) {
        match self {
            Value::Vec(items) => items.iter().for_each(|v| v.flatten(out)),
            v => out.push(v.clone()),
        }
    }

    pub fn as_num(&self) -> Option<&Q> {
        match self {
            Value::Num(q) => Some(q),
            _ => None,
        }
    }
}
