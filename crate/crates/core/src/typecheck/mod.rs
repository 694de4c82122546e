//! Kind and type checking with shape-indexed tensor types.
//!
//! Checking is bidirectional. Dimensions live at the type level, so tensor
//! shape mismatches and out-of-range index literals are type errors.
//! Surface `forall` with a non-Boolean body is elaborated into a tensor
//! comprehension (`Foreach`).

mod check;
mod error;
mod term;
mod ty;

pub use check::{check_program, infer_kind, shape_of, walk, TypedDecl, TypedProgram};
pub use error::{TypeError, TypeErrorKind};
pub use term::{ArithOp, LogicOp, Quant, Rel, Term, TermNode};
pub use ty::{Scheme, Ty};
