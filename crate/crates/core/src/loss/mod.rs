//! Differentiable-logic backend: a property becomes a loss program, a
//! term tree scoring "how false" the property is for given networks, with
//! quantifiers replaced by sampling over extracted domains.

mod compile;
mod domain;
mod interp;

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use thiserror::Error;

pub use compile::{compile_formula, compile_loss};
pub use domain::{extract_domain, Domain};
pub use interp::{eval_loss, eval_loss_with, grad_loss, sample_point, LossGradient, Resources};

use crate::nbe::{NbeError, QuantVar};
use crate::network::NetworkError;
use crate::rational::{int, ratio, Q};
use crate::typecheck::Rel;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Logic {
    Dl2,
    Godel,
    Lukasiewicz,
    Product,
    /// Yager logic with exponent `p > 0`.
    Yager(Q),
}

impl Logic {
    pub fn name(&self) -> &'static str {
        match self {
            Logic::Dl2 => "dl2",
            Logic::Godel => "godel",
            Logic::Lukasiewicz => "lukasiewicz",
            Logic::Product => "product",
            Logic::Yager(_) => "yager",
        }
    }

    /// DL2 terms are losses; the fuzzy logics compute truth values that
    /// are flipped to `1 - t` at the root.
    pub fn is_fuzzy(&self) -> bool {
        !matches!(self, Logic::Dl2)
    }
}

/// Compilation settings.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LossOptions {
    pub logic: Logic,
    /// Scale of the fuzzy atom truthiness.
    pub sigma: Q,
    /// Penalty for equality in a DL2 strict inequality.
    pub xi: Q,
    /// Sampling interval for dimensions the property does not bound.
    pub fallback: Option<(Q, Q)>,
    /// Absorb bound atoms into sampling domains.
    pub extract_domains: bool,
    pub samples: usize,
    pub seed: u64,
}

impl Default for LossOptions {
    fn default() -> Self {
        LossOptions {
            logic: Logic::Dl2,
            sigma: int(1),
            xi: int(1),
            fallback: None,
            extract_domains: true,
            samples: 10,
            seed: 0,
        }
    }
}

impl LossOptions {
    pub fn with_logic(logic: Logic) -> Self {
        LossOptions { logic, ..Self::default() }
    }

    pub fn default_fallback() -> (Q, Q) {
        (ratio(-4, 1), ratio(4, 1))
    }
}

/// A loss program node. Arithmetic is on floats at evaluation time.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LossTerm {
    Const(Q),
    /// Component `offset` of the sampled variable `var`.
    Var { var: usize, offset: usize },
    Param(String),
    Data { name: String, offset: usize },
    NetworkApply { network: String, inputs: Vec<LossTerm>, output: usize },
    Add(Box<LossTerm>, Box<LossTerm>),
    Sub(Box<LossTerm>, Box<LossTerm>),
    Mul(Box<LossTerm>, Box<LossTerm>),
    Div(Box<LossTerm>, Box<LossTerm>),
    Max(Box<LossTerm>, Box<LossTerm>),
    Min(Box<LossTerm>, Box<LossTerm>),
    /// `base ^ exponent` for a constant exponent.
    Pow(Box<LossTerm>, Q),
    /// 1 if the operands are equal, else 0.
    Indicator(Box<LossTerm>, Box<LossTerm>),
    /// Aggregates `body` over samples of `var` drawn from `domain`: DL2
    /// takes the mean, fuzzy logics fold their conjunction.
    SampleForall { id: usize, var: QuantVar, domain: Domain, body: Box<LossTerm> },
    /// DL2 takes the minimum, fuzzy logics fold their disjunction.
    SampleExists { id: usize, var: QuantVar, domain: Domain, body: Box<LossTerm> },
}

/// Shape of a resource the program needs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Slot {
    pub name: String,
    pub dims: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LossProgram {
    pub property: String,
    pub logic: Logic,
    pub samples: usize,
    pub seed: u64,
    /// `dims` is `[inputs, outputs]`.
    pub networks: Vec<Slot>,
    pub datasets: Vec<Slot>,
    pub parameters: Vec<String>,
    pub root: LossTerm,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum LossError {
    #[error(transparent)]
    Nbe(#[from] NbeError),
    #[error(
        "quantified variable `{var}` has no bounds in dimension(s) {dims:?} and no fallback sampling domain is configured"
    )]
    UnboundedDimension { var: String, dims: Vec<usize> },
    #[error("{what} cannot be translated to a loss")]
    Unsupported { what: String },
    #[error("no value bound for {what}")]
    MissingResource { what: String },
    #[error("{what} has shape {actual:?}, expected {expected:?}")]
    Shape { what: String, expected: Vec<usize>, actual: Vec<usize> },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("sample count must be at least 1")]
    NoSamples,
}

impl LossError {
    pub fn code(&self) -> &'static str {
        match self {
            LossError::Nbe(_) => "E-NORMALISE",
            LossError::UnboundedDimension { .. } => "E-UNBOUNDED-DOMAIN",
            LossError::Unsupported { .. } => "E-UNSUPPORTED",
            LossError::MissingResource { .. } => "E-UNBOUND-RESOURCE",
            LossError::Shape { .. } => "E-RESOURCE-SHAPE",
            LossError::Network(_) => "E-NETWORK",
            LossError::NoSamples => "E-USAGE",
        }
    }
}

/// Relation with operands swapped so only `<=`, `<`, `=`, `!=` remain.
pub(crate) fn orient(rel: Rel) -> (Rel, bool) {
    match rel {
        Rel::Ge => (Rel::Le, true),
        Rel::Gt => (Rel::Lt, true),
        r => (r, false),
    }
}
