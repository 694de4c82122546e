//! Query backend: property → and/or tree of linear queries over network
//! inputs and outputs, a built-in exact solver, and lifting of witnesses
//! back to the problem space.

mod compile;
mod solve;
mod status;
mod text;

use alloc::string::String;
use thiserror::Error;

pub use compile::{compile_queries, Application, CompiledProperty, QVar, Query, QueryTree, MAX_DISJUNCTS};
pub use solve::{solve_query, solver_calls, Networks, SolveResult, DEFAULT_PATTERN_BUDGET};
pub use status::{evaluate_tree, lift_counterexample, verify_property, Counterexample, PropertyStatus, TreeOutcome};
pub use text::{parse_query_text, render_constraint, render_query};

use crate::nbe::NbeError;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum VerifyError {
    #[error(transparent)]
    Nbe(#[from] NbeError),
    #[error(
        "property `{property}` has alternating quantifiers: its negation mixes universal and existential \
         quantifiers over rationals, so it cannot be reduced to satisfiability queries and compilation will error"
    )]
    AlternatingQuantifiers { property: String },
    #[error(
        "property `{property}` is existential: its negation quantifies universally over rationals, which \
         satisfiability queries cannot express"
    )]
    ExistentialProperty { property: String },
    #[error(
        "non-linear embedding: `{term}` multiplies or divides quantified variables or network outputs; \
         queries must be linear in the problem-space variables"
    )]
    NonlinearEmbedding { term: String },
    #[error("{what} has no value; bind it before compiling queries")]
    Opaque { what: String },
    #[error("{what} is not supported by the query backend")]
    Unsupported { what: String },
    #[error("the property expands to more than {limit} disjuncts")]
    TooManyDisjuncts { limit: usize },
    #[error("network `{name}` has no implementation")]
    UnboundNetwork { name: String },
    #[error("network `{name}` is declared {}→{} but the file is {}→{}", expected.0, expected.1, actual.0, actual.1)]
    NetworkShape { name: String, expected: (usize, usize), actual: (usize, usize) },
    #[error("query has {relus} ReLU units, above the pattern budget of {budget}")]
    PatternBudgetExceeded { relus: usize, budget: usize },
    #[error("internal error: {0}")]
    Internal(String),
}

impl VerifyError {
    /// Stable identifier for diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            VerifyError::Nbe(_) => "E-NORMALISE",
            VerifyError::AlternatingQuantifiers { .. } => "E-ALTERNATING-QUANTIFIERS",
            VerifyError::ExistentialProperty { .. } => "E-EXISTENTIAL-PROPERTY",
            VerifyError::NonlinearEmbedding { .. } => "E-NONLINEAR-EMBEDDING",
            VerifyError::Opaque { .. } => "E-UNBOUND-RESOURCE",
            VerifyError::Unsupported { .. } => "E-UNSUPPORTED",
            VerifyError::TooManyDisjuncts { .. } => "E-TOO-MANY-DISJUNCTS",
            VerifyError::UnboundNetwork { .. } => "E-UNBOUND-RESOURCE",
            VerifyError::NetworkShape { .. } => "E-NETWORK-SHAPE",
            VerifyError::PatternBudgetExceeded { .. } => "E-PATTERN-BUDGET",
            VerifyError::Internal(_) => "E-INTERNAL",
        }
    }
}
