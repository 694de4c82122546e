//! Exact linear arithmetic over the rationals: Gaussian elimination for
//! equalities, Fourier–Motzkin elimination for inequalities, and the
//! reconstruction maps that carry solutions of a projected system back to
//! the original variables.

mod eliminate;
mod linear;

pub use eliminate::{
    eliminate_variables, find_solution, fourier_motzkin, gaussian_eliminate, is_feasible, Bound, Infeasible,
    ReconstructionMap, Step,
};
pub use linear::{prune, LinRel, LinearConstraint, LinearExpr};
