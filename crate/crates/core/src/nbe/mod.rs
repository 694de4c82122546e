//! Normalisation by evaluation.
//!
//! Terms are evaluated into [`Value`]s: closures for functions, exact
//! rationals, Booleans and vectors for known data, and neutral terms
//! ([`Arith`], [`Formula`]) for anything that depends on a quantified
//! variable, a network application or an unbound parameter. Definitions,
//! tensor comprehensions, folds and decidable conditionals disappear on
//! the way. Reading a property's value back gives its [`Formula`] normal
//! form.

mod eval;
mod normal;
mod quote;
mod value;

use alloc::string::String;
use thiserror::Error;

pub use eval::{Assignment, Evaluator, Externals, NetworkOracle};
pub use normal::{Arith, Formula, Ground, GroundError, QuantVar, VarId};
pub use quote::{quote, quote_formula, recheck_decl};
pub use value::{Closure, Value};

use crate::frontend::{DeclKind, Span};
use crate::typecheck::TypedProgram;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum NbeError {
    #[error("{span}: division by zero")]
    DivisionByZero { span: Span },
    #[error("parameter `{name}` has no value")]
    UnboundParameter { name: String },
    #[error("network `{name}` has no implementation")]
    UnboundNetwork { name: String },
    #[error("no declaration named `{name}`")]
    UnknownDecl { name: String },
    #[error("`{name}` is not a property")]
    NotAProperty { name: String },
    #[error("`{name}` is shape-polymorphic and cannot be evaluated on its own")]
    Polymorphic { name: String },
    #[error("{span}: unsupported: {what}")]
    Unsupported { span: Span, what: String },
    #[error("internal evaluation error: {0}")]
    Internal(String),
}

fn lookup<'a>(tp: &'a TypedProgram, name: &str) -> Result<(usize, &'a crate::typecheck::TypedDecl), NbeError> {
    tp.decl(name).ok_or_else(|| NbeError::UnknownDecl { name: name.into() })
}

/// Value of a monomorphic declaration.
pub fn normalise_decl(tp: &TypedProgram, name: &str, ext: &Externals) -> Result<Value, NbeError> {
    let (index, d) = lookup(tp, name)?;
    if !d.scheme.params.is_empty() {
        return Err(NbeError::Polymorphic { name: name.into() });
    }
    Evaluator::new(tp, ext).eval_decl(index, &[])
}

/// Fully evaluated property, before negation normal form.
pub fn evaluate_property(tp: &TypedProgram, name: &str, ext: &Externals) -> Result<Formula, NbeError> {
    let (index, d) = lookup(tp, name)?;
    if d.kind != DeclKind::Property {
        return Err(NbeError::NotAProperty { name: name.into() });
    }
    let v = Evaluator::new(tp, ext).eval_decl(index, &[])?;
    v.into_formula().ok_or_else(|| NbeError::Internal("property did not evaluate to a Boolean".into()))
}

/// Normal form of a property: all definitions inlined, `=>` eliminated
/// and negations pushed onto atoms.
pub fn normalise_property(tp: &TypedProgram, name: &str, ext: &Externals) -> Result<Formula, NbeError> {
    Ok(evaluate_property(tp, name, ext)?.nnf())
}

/// Evaluates a property directly from its definition, with networks run
/// by `oracle` and each quantifier instantiated at `assignment`.
pub fn eval_property_ground(
    tp: &TypedProgram,
    name: &str,
    ext: &Externals,
    oracle: &dyn NetworkOracle,
    assignment: &Assignment,
) -> Result<bool, NbeError> {
    let (index, d) = lookup(tp, name)?;
    if d.kind != DeclKind::Property {
        return Err(NbeError::NotAProperty { name: name.into() });
    }
    let v = Evaluator::new(tp, ext).with_oracle(oracle).with_ground(assignment).eval_decl(index, &[])?;
    match v {
        Value::Bool(b) => Ok(b),
        _ => Err(NbeError::Internal("ground evaluation left free symbols".into())),
    }
}
