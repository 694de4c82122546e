//! Tree evaluation, counterexample lifting and the end-to-end driver.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::compile::{compile_queries, CompiledProperty, QVar, Query, QueryTree};
use super::solve::{solve_query, Networks, SolveResult};
use super::VerifyError;
use crate::nbe::{eval_property_ground, Assignment, Externals, QuantVar};
use crate::rational::{zero, Q};
use crate::typecheck::TypedProgram;

/// Outcome of searching a tree for a counterexample.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TreeOutcome {
    /// Leaf `leaf` is satisfiable with this `x`/`y` assignment.
    Sat { leaf: usize, embedding: BTreeMap<QVar, Q> },
    Unsat,
}

/// Short-circuiting evaluation: an `Or` stops at its first satisfiable
/// child, an `And` at its first unsatisfiable one. `solve` is called only
/// for leaves whose result is needed.
pub fn evaluate_tree<E>(
    tree: &QueryTree,
    solve: &mut dyn FnMut(&Query) -> Result<SolveResult, E>,
) -> Result<TreeOutcome, E> {
    match tree {
        QueryTree::Leaf(q) => Ok(match solve(q)? {
            SolveResult::Sat(embedding) => TreeOutcome::Sat { leaf: q.id, embedding },
            SolveResult::Unsat => TreeOutcome::Unsat,
        }),
        QueryTree::Or(cs) => {
            for c in cs {
                if let sat @ TreeOutcome::Sat { .. } = evaluate_tree(c, solve)? {
                    return Ok(sat);
                }
            }
            Ok(TreeOutcome::Unsat)
        }
        QueryTree::And(cs) => {
            // Every conjunct must be satisfiable; the first conjunct's
            // witness is reported.
            let mut first = None;
            for c in cs {
                match evaluate_tree(c, solve)? {
                    TreeOutcome::Unsat => return Ok(TreeOutcome::Unsat),
                    sat => {
                        first.get_or_insert(sat);
                    }
                }
            }
            Ok(first.unwrap_or(TreeOutcome::Unsat))
        }
    }
}

/// A problem-space counterexample.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample {
    pub leaf: usize,
    /// Each quantified variable with its row-major components.
    pub problem: Vec<(QuantVar, Vec<Q>)>,
    /// The `x`/`y` assignment the solver found.
    pub embedding: BTreeMap<QVar, Q>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PropertyStatus {
    Verified,
    Falsified(Counterexample),
    Error(String),
}

impl PropertyStatus {
    pub fn name(&self) -> &'static str {
        match self {
            PropertyStatus::Verified => "Verified",
            PropertyStatus::Falsified(_) => "Falsified",
            PropertyStatus::Error(_) => "Error",
        }
    }
}

/// Replays the leaf's reconstruction map, then checks that the embedding
/// of the lifted point is exactly the solver's `x` values and that the
/// property is false there with the real networks.
///
/// # Panics
///
/// If either check fails: that would be a compiler bug.
pub fn lift_counterexample(
    tp: &TypedProgram,
    compiled: &CompiledProperty,
    ext: &Externals,
    networks: &Networks,
    query: &Query,
    embedding: &BTreeMap<QVar, Q>,
) -> Result<Counterexample, VerifyError> {
    let mut assign = embedding.clone();
    query.recon.replay(&mut assign);
    let mut problem = Vec::with_capacity(compiled.problem_vars.len());
    let mut ground: Assignment = BTreeMap::new();
    for v in &compiled.problem_vars {
        let values: Vec<Q> = (0..v.size()).map(|o| assign.get(&QVar::Problem(v.id, o)).cloned().unwrap_or_else(zero)).collect();
        for (o, val) in values.iter().enumerate() {
            assign.insert(QVar::Problem(v.id, o), val.clone());
        }
        ground.insert(v.id, values.clone());
        problem.push((v.clone(), values));
    }
    for app in &query.applications {
        for (x, e) in app.inputs.iter().zip(&app.embedding) {
            let lifted = e.eval(&assign);
            let solved = embedding.get(&QVar::Input(*x));
            assert!(
                lifted.as_ref() == solved,
                "internal error: embedding of the lifted point gives x{x} = {lifted:?}, solver found {solved:?}"
            );
        }
    }
    let holds = eval_property_ground(tp, &compiled.property, ext, networks, &ground)?;
    assert!(!holds, "internal error: lifted counterexample satisfies property `{}`", compiled.property);
    Ok(Counterexample { leaf: query.id, problem, embedding: embedding.clone() })
}

/// Compiles, solves and lifts in one go.
pub fn verify_property(
    tp: &TypedProgram,
    property: &str,
    ext: &Externals,
    networks: &Networks,
    budget: usize,
) -> Result<(CompiledProperty, PropertyStatus), VerifyError> {
    let compiled = compile_queries(tp, property, ext)?;
    let outcome = evaluate_tree(&compiled.tree, &mut |q| solve_query(q, networks, budget))?;
    let status = match outcome {
        TreeOutcome::Unsat => PropertyStatus::Verified,
        TreeOutcome::Sat { leaf, embedding } => {
            let q = compiled
                .tree
                .leaf(leaf)
                .ok_or_else(|| VerifyError::Internal(format!("no leaf {leaf}")))?;
            PropertyStatus::Falsified(lift_counterexample(tp, &compiled, ext, networks, q, &embedding)?)
        }
    };
    Ok((compiled, status))
}
